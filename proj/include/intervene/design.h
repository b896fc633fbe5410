#ifndef INTERVENE_DESIGN_H_
#define INTERVENE_DESIGN_H_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "intervene/equilibrium.h"
#include "intervene/network.h"
#include "intervene/rules.h"

namespace intervene {

inline constexpr double kDefaultMargin = 1e-6;

enum class DesignMode { kSustain, kStrongSustain, kFastConverge, kAggregateSustain };

std::string to_string(DesignMode mode);

struct DesignOptions {
  // Thresholds are multiplied by (1 + margin) to make strict inequalities hold.
  double margin = kDefaultMargin;
  // Throw InfeasibleError when params.capability() is below the requirement.
  bool check_capability = true;
  // Strong sustainment only: order in which the recursive rate condition
  // indexes users. Empty means active users first, each group by index.
  std::vector<std::size_t> ordering;
};

struct DesignReport {
  // IndividualRule or AggregateRule; budget set to params.capability().
  Rule rule;
  // Rate thresholds before the margin is applied. For the aggregate mode
  // these are the per-user thresholds whose maximum is the aggregate rate.
  std::vector<double> min_rates;
  // Budget threshold of the mode: PB_1 for sustain and aggregate,
  // the induced requirement of the chosen rates for strong sustainment,
  // the closed-form fast-convergence budget for fast_converge.
  double min_budget = 0.0;
  // Budget the designed rates actually need (>= min_budget).
  double required_budget = 0.0;
  // Strong sustainment: closed-form upper bound on the minimum budget.
  double budget_upper_bound = 0.0;
  // Aggregate mode: per-user budget thresholds (zero outside active users).
  std::vector<double> user_budgets;
  DesignMode mode = DesignMode::kSustain;
  double margin = kDefaultMargin;
  std::vector<std::size_t> active_users;
  std::vector<std::size_t> ordering;

  const IndividualRule& individual() const { return std::get<IndividualRule>(rule); }
  const AggregateRule& aggregate() const { return std::get<AggregateRule>(rule); }
};

// Users whose target is strictly below their maximum power.
std::vector<std::size_t> active_users(const NetworkParams& params, const PowerProfile& target);

// Throws ValidationError unless every target power lies in (0, P_i].
void check_target(const NetworkParams& params, const PowerProfile& target);

// (sum_{j != i} h_ij p*_j + n_i) / (p*_i h_i0): the minimum sustaining rate.
double sustain_rate_threshold(const NetworkParams& params, const PowerProfile& target,
                              std::size_t i);

// Minimum budget to sustain the target (0 when no user is active).
double sustain_budget(const NetworkParams& params, const PowerProfile& target);

// Closed-form upper bound on the minimum strong-sustainment budget.
double strong_sustain_upper_bound(const NetworkParams& params, const PowerProfile& target,
                                  const std::vector<std::size_t>& ordering = {});

// Budget required by the fast-convergence construction. Throws
// InfeasibleError when sum_i (P_i - p*_i)/P_i >= 1.
double fast_converge_budget(const NetworkParams& params, const PowerProfile& target);

DesignReport design_sustain(const NetworkParams& params, const PowerProfile& target,
                            const DesignOptions& options = {});
DesignReport design_strong_sustain(const NetworkParams& params, const PowerProfile& target,
                                   const DesignOptions& options = {});
DesignReport design_fast_converge(const NetworkParams& params, const PowerProfile& target,
                                  const DesignOptions& options = {});
DesignReport design_aggregate(const NetworkParams& params, const PowerProfile& target,
                              const DesignOptions& options = {});

// Looks for an equilibrium of the aggregate rule other than the target,
// with the same aggregate receive power and within Euclidean distance
// epsilon of the target. Returns nullopt when no pair of active users
// satisfies the ordering condition or the line search finds nothing.
std::optional<PowerProfile> aggregate_nonuniqueness_witness(const NetworkParams& params,
                                                            const AggregateRule& rule,
                                                            const PowerProfile& target,
                                                            double epsilon);

struct ExtremeRuleDesign {
  ExtremeRule rule;
  std::vector<PowerProfile> predicted_equilibria;
};

// Extreme rule at the capability budget with its predicted equilibrium set.
ExtremeRuleDesign extreme_rule(const NetworkParams& params, const PowerProfile& target);

}  // namespace intervene

#endif  // INTERVENE_DESIGN_H_
