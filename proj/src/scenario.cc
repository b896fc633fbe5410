#include "intervene/scenario.h"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "intervene/error.h"
#include "json.hpp"

namespace intervene {
namespace {

using nlohmann::json;

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError("missing field '" + std::string(key) + "' in " + where);
  }
  return obj.at(key);
}

double number(const json& v, const std::string& what) {
  if (!v.is_number()) throw ValidationError(what + " must be a number");
  return v.get<double>();
}

Point point(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != 2) throw ValidationError(what + " must be an [x, y] pair");
  return {number(v[0], what), number(v[1], what)};
}

std::vector<double> numbers(const json& v, const std::string& what) {
  if (!v.is_array()) throw ValidationError(what + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(number(x, what));
  return out;
}

// A scalar broadcast to n entries, or an array of exactly n numbers.
std::vector<double> per_user(const json& v, std::size_t n, const std::string& what) {
  if (v.is_number()) return std::vector<double>(n, v.get<double>());
  auto out = numbers(v, what);
  if (out.size() != n) {
    throw ValidationError(what + " must have " + std::to_string(n) + " entries");
  }
  return out;
}

Eigen::MatrixXd matrix(const json& v, const std::string& what) {
  if (!v.is_array() || v.empty()) throw ValidationError(what + " must be a nonempty matrix");
  const std::size_t rows = v.size();
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = numbers(v[r], what);
    if (row.size() != cols) throw ValidationError(what + " rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return m;
}

double gain(Point from, Point to, double exponent, const std::string& what) {
  const double d = distance(from, to);
  if (!(d > 0.0)) throw ValidationError("nonpositive distance between " + what);
  return std::pow(d, -exponent);
}

Geometry parse_geometry(const json& doc) {
  Geometry g;
  g.path_loss_exponent = number(field(doc, "path_loss_exponent", "scenario"),
                                "path_loss_exponent");
  const json& users = field(doc, "users", "scenario");
  if (!users.is_array() || users.empty()) throw ValidationError("users must be a nonempty array");
  for (std::size_t i = 0; i < users.size(); ++i) {
    const std::string where = "users[" + std::to_string(i) + "]";
    g.tx.push_back(point(field(users[i], "tx", where), where + ".tx"));
    g.rx.push_back(point(field(users[i], "rx", where), where + ".rx"));
    g.noise.push_back(number(field(users[i], "noise", where), where + ".noise"));
    g.max_powers.push_back(number(field(users[i], "max_power", where), where + ".max_power"));
  }
  const json& device = field(doc, "device", "scenario");
  g.device_tx = point(field(device, "tx", "device"), "device.tx");
  const json& rx = field(device, "rx", "device");
  if (!rx.is_array() || rx.empty()) throw ValidationError("device.rx must list receiver positions");
  for (const auto& p : rx) g.device_rx.push_back(point(p, "device.rx"));
  if (device.contains("noise")) {
    g.device_noise = per_user(device.at("noise"), g.device_rx.size(), "device.noise");
  }
  g.capability = number(field(doc, "capability", "scenario"), "capability");
  return g;
}

Geometry random_geometry(const json& doc, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(
      number(field(doc, "n_users", "random scenario"), "n_users"));
  if (n == 0) throw ValidationError("n_users must be positive");
  const double area = number(field(doc, "area", "random scenario"), "area");
  const auto link = numbers(field(doc, "link_distance", "random scenario"), "link_distance");
  if (link.size() != 2 || !(link[0] > 0.0) || link[1] < link[0]) {
    throw ValidationError("link_distance must be [min, max] with 0 < min <= max");
  }
  Geometry g;
  g.path_loss_exponent = number(field(doc, "path_loss_exponent", "random scenario"),
                                "path_loss_exponent");
  g.noise = per_user(field(doc, "noise", "random scenario"), n, "noise");
  g.max_powers = per_user(field(doc, "max_power", "random scenario"), n, "max_power");
  g.capability = number(field(doc, "capability", "random scenario"), "capability");

  std::mt19937_64 rng(seed);
  auto u = [&] { return unit_uniform(rng()); };
  for (std::size_t i = 0; i < n; ++i) {
    const Point tx{u() * area, u() * area};
    const double angle = 2.0 * std::numbers::pi * u();
    const double d = link[0] + (link[1] - link[0]) * u();
    g.tx.push_back(tx);
    g.rx.push_back({tx.x + d * std::cos(angle), tx.y + d * std::sin(angle)});
  }
  const Point center{area / 2.0, area / 2.0};
  g.device_tx = center;
  double radius = area;
  std::size_t locations = n;
  if (doc.contains("device")) {
    const json& device = doc.at("device");
    if (device.contains("tx")) g.device_tx = point(device.at("tx"), "device.tx");
    if (device.contains("radius")) radius = number(device.at("radius"), "device.radius");
    if (device.contains("locations")) {
      locations = static_cast<std::size_t>(number(device.at("locations"), "device.locations"));
    }
  }
  for (std::size_t k = 0; k < locations; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(locations);
    g.device_rx.push_back(
        {center.x + radius * std::cos(angle), center.y + radius * std::sin(angle)});
  }
  return g;
}

NetworkParams explicit_network(const json& doc) {
  NetworkSpec spec;
  spec.gains = matrix(field(doc, "gains", "scenario"), "gains");
  spec.device_to_user = numbers(field(doc, "device_to_user", "scenario"), "device_to_user");
  spec.user_to_device = numbers(field(doc, "user_to_device", "scenario"), "user_to_device");
  spec.noise = numbers(field(doc, "noise", "scenario"), "noise");
  spec.max_powers = numbers(field(doc, "max_powers", "scenario"), "max_powers");
  spec.capability = number(field(doc, "capability", "scenario"), "capability");
  if (doc.contains("location_gains")) {
    spec.location_gains = matrix(doc.at("location_gains"), "location_gains");
  }
  if (doc.contains("device_noise")) {
    spec.device_noise = numbers(doc.at("device_noise"), "device_noise");
  }
  return NetworkParams(std::move(spec));
}

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double unit_uniform(std::uint64_t draw) { return static_cast<double>(draw >> 11) * 0x1.0p-53; }

NetworkParams network_from_geometry(const Geometry& g) {
  const std::size_t n = g.tx.size();
  if (g.rx.size() != n || g.noise.size() != n || g.max_powers.size() != n) {
    throw ValidationError("geometry user fields must all have one entry per user");
  }
  if (g.device_rx.empty()) throw ValidationError("geometry needs a device receiver position");
  const double a = g.path_loss_exponent;
  NetworkSpec spec;
  const Eigen::Index en = static_cast<Eigen::Index>(n);
  spec.gains.resize(en, en);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      spec.gains(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          gain(g.tx[j], g.rx[i], a,
               "transmitter " + std::to_string(j) + " and receiver " + std::to_string(i));
    }
    spec.device_to_user.push_back(
        gain(g.device_tx, g.rx[i], a, "device transmitter and receiver " + std::to_string(i)));
  }
  spec.location_gains.resize(static_cast<Eigen::Index>(g.device_rx.size()), en);
  for (std::size_t k = 0; k < g.device_rx.size(); ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      spec.location_gains(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
          gain(g.tx[j], g.device_rx[k], a,
               "transmitter " + std::to_string(j) + " and device location " + std::to_string(k));
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    spec.user_to_device.push_back(spec.location_gains(0, static_cast<Eigen::Index>(j)));
  }
  spec.noise = g.noise;
  spec.max_powers = g.max_powers;
  spec.capability = g.capability;
  spec.device_noise = g.device_noise;
  return NetworkParams(std::move(spec));
}

Geometry with_link_distance(const Geometry& geometry, std::size_t user, double d) {
  if (user >= geometry.tx.size()) throw ValidationError("user index out of range");
  if (!(d > 0.0)) throw ValidationError("link distance must be positive");
  Geometry out = geometry;
  const Point rx = geometry.rx[user];
  const Point tx = geometry.tx[user];
  const double len = distance(tx, rx);
  if (!(len > 0.0)) throw ValidationError("nonpositive distance between user transmitter and receiver");
  out.tx[user] = {rx.x + (tx.x - rx.x) / len * d, rx.y + (tx.y - rx.y) / len * d};
  return out;
}

Scenario parse_scenario(const std::string& text, std::optional<std::uint64_t> seed_override) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed scenario file: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("scenario must be a JSON object");
  const int version = static_cast<int>(number(field(doc, "schema_version", "scenario"),
                                              "schema_version"));
  if (version != kScenarioSchemaVersion) {
    throw ValidationError("unsupported schema_version " + std::to_string(version));
  }
  const json& kind_field = field(doc, "kind", "scenario");
  if (!kind_field.is_string()) throw ValidationError("kind must be a string");
  const std::string kind = kind_field.get<std::string>();
  std::uint64_t seed = 0;
  if (doc.contains("seed")) seed = doc.at("seed").get<std::uint64_t>();
  if (seed_override) seed = *seed_override;

  std::optional<Geometry> geometry;
  if (kind == "geometry") {
    geometry = parse_geometry(doc);
  } else if (kind == "random") {
    geometry = random_geometry(doc, seed);
  } else if (kind != "explicit") {
    throw ValidationError("unknown scenario kind '" + kind + "'");
  }
  NetworkParams params = geometry ? network_from_geometry(*geometry) : explicit_network(doc);

  std::optional<PowerProfile> target;
  if (doc.contains("target") && doc.contains("target_fraction")) {
    throw ValidationError("give either target or target_fraction, not both");
  }
  if (doc.contains("target")) {
    target = PowerProfile(per_user(doc.at("target"), params.size(), "target"));
  } else if (doc.contains("target_fraction")) {
    auto frac = per_user(doc.at("target_fraction"), params.size(), "target_fraction");
    for (std::size_t i = 0; i < frac.size(); ++i) frac[i] *= params.max_power(i);
    target = PowerProfile(std::move(frac));
  }
  if (target) params.check_profile(*target);

  std::string name = doc.contains("name") ? doc.at("name").get<std::string>() : std::string();
  return Scenario{std::move(name), kind, seed, std::move(params), std::move(geometry),
                  std::move(target)};
}

Scenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), seed_override);
}

}  // namespace intervene
