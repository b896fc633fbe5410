#ifndef INTERVENE_WELFARE_H_
#define INTERVENE_WELFARE_H_

#include <functional>
#include <span>
#include <string>

#include "intervene/network.h"

namespace intervene {

enum class WelfareKind { kSumRate, kMaxMin };

struct WelfareSpec {
  WelfareKind kind = WelfareKind::kSumRate;
};

std::string to_string(WelfareKind kind);
// Accepts "sum_rate" and "max_min"; throws ValidationError otherwise.
WelfareKind parse_welfare_kind(const std::string& name);

// Maps the users' SINRs (device silent) to a welfare value.
using WelfareObjective = std::function<double(std::span<const double>)>;

WelfareObjective objective_for(WelfareSpec spec);

// Natural-log rates: sum or minimum of log(1 + SINR_i) with no intervention.
double welfare(const NetworkParams& params, const PowerProfile& profile, WelfareSpec spec);
double welfare(const NetworkParams& params, const PowerProfile& profile,
               const WelfareObjective& objective);

struct TargetSolution {
  PowerProfile target;
  double value = 0.0;
  // Best value on the seeding grid (or the best start for local search).
  double seed_value = 0.0;
  // Exhaustive grid for N <= 3, multi-start local search otherwise.
  bool exhaustive = false;
  int grid_points = 0;
};

// Lower bound on every target coordinate, as a fraction of P_i.
inline constexpr double kTargetFloor = 1e-6;

// Approximate maximizer of the welfare over prod_i [1e-6 P_i, P_i].
TargetSolution solve_target(const NetworkParams& params, WelfareSpec spec, int grid_points = 41,
                            int refine_iters = 40);
TargetSolution solve_target(const NetworkParams& params, const WelfareObjective& objective,
                            int grid_points = 41, int refine_iters = 40);

}  // namespace intervene

#endif  // INTERVENE_WELFARE_H_
