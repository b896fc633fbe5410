#ifndef INTERVENE_SCENARIO_H_
#define INTERVENE_SCENARIO_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "intervene/network.h"

namespace intervene {

inline constexpr int kScenarioSchemaVersion = 1;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

// Positions in the plane; every gain is d^-a.
struct Geometry {
  std::vector<Point> tx;
  std::vector<Point> rx;
  Point device_tx;
  // Device receiver positions. The first one provides h_0i for aggregate
  // monitoring; all of them are measurement locations.
  std::vector<Point> device_rx;
  double path_loss_exponent = 3.0;
  std::vector<double> noise;
  std::vector<double> max_powers;
  std::vector<double> device_noise;
  double capability = 0.0;
};

// Throws ValidationError on a zero distance or inconsistent sizes.
NetworkParams network_from_geometry(const Geometry& geometry);

// Copy of `geometry` with `user`'s transmitter moved along the line from
// its receiver so that their distance becomes `d`.
Geometry with_link_distance(const Geometry& geometry, std::size_t user, double d);

struct Scenario {
  std::string name;
  // "geometry", "explicit" or "random".
  std::string kind;
  std::uint64_t seed = 0;
  NetworkParams params;
  std::optional<Geometry> geometry;
  std::optional<PowerProfile> target;
};

// Parses scenario JSON text. `seed_override` replaces the file's seed for
// random scenarios. Throws ValidationError with a specific message on
// malformed input.
Scenario parse_scenario(const std::string& text,
                        std::optional<std::uint64_t> seed_override = std::nullopt);
Scenario load_scenario(const std::string& path,
                       std::optional<std::uint64_t> seed_override = std::nullopt);

// Uniform double in [0, 1) from a 64-bit engine draw.
double unit_uniform(std::uint64_t draw);

}  // namespace intervene

#endif  // INTERVENE_SCENARIO_H_
