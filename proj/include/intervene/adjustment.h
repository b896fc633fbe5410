#ifndef INTERVENE_ADJUSTMENT_H_
#define INTERVENE_ADJUSTMENT_H_

#include <cstddef>
#include <optional>
#include <vector>

#include "intervene/design.h"
#include "intervene/network.h"
#include "intervene/rules.h"

namespace intervene {

inline constexpr double kConvergenceTol = 1e-9;
inline constexpr double kDefaultEps1 = 1e-3;
inline constexpr double kDefaultEps2 = 1e-3;

// sum_i (p_i - q_i) / p_i. Throws ValidationError if some p_i is 0.
double relative_distance(const PowerProfile& p, const PowerProfile& q);

// b_i(p) = (sum_{j != i} h_ij p_j + n_i) / h_i0 for every user.
std::vector<double> normalized_interference(const NetworkParams& params,
                                            const PowerProfile& profile);

// Budget the paper assigns to moving from `previous` to `next` in one step.
// Infinite when the relative distance reaches 1.
double step_budget(const NetworkParams& params, const PowerProfile& previous,
                   const PowerProfile& next);

struct TargetSequence {
  // targets[0] = P, targets.back() = final target.
  std::vector<PowerProfile> targets;
  // step_budgets[t] is the step budget of moving to targets[t]; 0 for t = 0.
  std::vector<double> step_budgets;
  // MRD only: true when every user ran out of room before the budget bound.
  std::vector<bool> underfilled;

  std::size_t length() const { return targets.size(); }
};

// Fixed relative distance delta between successive targets, greedily
// keeping the users with the largest normalized interference in place.
// Ignores the capability.
TargetSequence fixed_rd_sequence(const NetworkParams& params, const PowerProfile& target,
                                 double delta);

// Maximal relative distances under `budget`.
TargetSequence mrd_sequence(const NetworkParams& params, const PowerProfile& target, double budget,
                            double eps1 = kDefaultEps1, double eps2 = kDefaultEps2);

// Smallest budget accepted by mrd_sequence (exclusive), eps1 included.
double mrd_budget_threshold(const NetworkParams& params, const PowerProfile& target,
                            double eps1 = kDefaultEps1);

// p~^t_i = eta_i^(t-1) P_i with eta_i = (p*_i / P_i)^(1/(T-1)).
TargetSequence geometric_sequence(const PowerProfile& target, const PowerProfile& max_powers,
                                  int length);

// Smallest length whose geometric sequence satisfies both step constraints
// under `budget`. Throws InfeasibleError if none up to max_length does.
int geometric_time(const NetworkParams& params, const PowerProfile& target, double budget,
                   double eps1 = kDefaultEps1, double eps2 = kDefaultEps2,
                   int max_length = 10000);

// Smallest budget accepted by convergence_time_bound (exclusive).
double bound_budget_threshold(const NetworkParams& params, const PowerProfile& target);

// Upper bound on the minimum convergence time under `budget`: the largest
// T > 2 for which sum_i (p*_i/P_i)^(1/(T-2)) < N - 1 + 1/C.
int convergence_time_bound(const NetworkParams& params, const PowerProfile& target,
                           double budget);

// One-step rule leading users from `previous` to `target` when all of them
// best-respond simultaneously. Users with target_i = P_i get rate 0.
struct StepRule {
  IndividualRule rule;
  // Capability the rule needs for the move to be a best response.
  double required_budget = 0.0;
};
StepRule step_rule(const NetworkParams& params, const PowerProfile& previous,
                   const PowerProfile& target, double margin = kDefaultMargin);

struct TrajectoryStep {
  Rule rule;
  PowerProfile target;
  PowerProfile profile;
  double intervention_power = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  bool converged = false;
  std::optional<int> steps_to_converge;
};

// Best-response dynamics under a fixed rule. The convergence target is the
// rule's target (P for NoIntervention; aggregate rules converge once the
// profile stops moving with zero intervention).
Trajectory run_adjustment(const NetworkParams& params, const Rule& rule,
                          const PowerProfile& initial, int max_steps);

// Best-response dynamics following a schedule of intermediate targets, one
// step per target, with the step rule rebuilt from the realized profile.
// After the schedule ends the final target's step rule stays in force.
Trajectory run_adjustment(const NetworkParams& params, const TargetSequence& schedule,
                          const PowerProfile& initial, int max_steps,
                          double margin = kDefaultMargin);

}  // namespace intervene

#endif  // INTERVENE_ADJUSTMENT_H_
