#ifndef INTERVENE_RULES_H_
#define INTERVENE_RULES_H_

#include <cstddef>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "intervene/network.h"

namespace intervene {

// [x] clipped to [0, budget].
double clip_power(double x, double budget);

// The device never transmits.
struct NoIntervention {};

// f(p) = [sum_i rates_i |p_i - target_i|] clipped to [0, budget].
struct IndividualRule {
  PowerProfile target;
  std::vector<double> rates;
  double budget = 0.0;
};

// f(p) = [rate |sum_i weights_i p_i - target_aggregate|] clipped to [0, budget].
struct AggregateRule {
  double rate = 0.0;
  double target_aggregate = 0.0;
  std::vector<double> weights;
  double budget = 0.0;
};

// f(p) = [sum_i sum_k coeffs(i, k-1) |p_i - target_i|^k] clipped to [0, budget].
// coeffs is N x K.
struct GenericRule {
  PowerProfile target;
  Eigen::MatrixXd coeffs;
  double budget = 0.0;
};

// 0 at the target, budget everywhere else.
struct ExtremeRule {
  PowerProfile target;
  double budget = 0.0;
};

using Rule = std::variant<NoIntervention, IndividualRule, AggregateRule, GenericRule, ExtremeRule>;

// Relative tolerance used by ExtremeRule to decide "at the target".
inline constexpr double kExtremeTargetTol = 1e-12;

double evaluate(const IndividualRule& rule, const PowerProfile& profile);
double evaluate(const AggregateRule& rule, const PowerProfile& profile);
double evaluate(const GenericRule& rule, const PowerProfile& profile);
double evaluate(const ExtremeRule& rule, const PowerProfile& profile);
double evaluate(const Rule& rule, const PowerProfile& profile);

// Throws ValidationError for negative rates, nonpositive budgets or a rule
// whose dimension differs from the network's.
void validate_rule(const NetworkParams& params, const Rule& rule);

double rule_budget(const Rule& rule);

// The target profile of rules that have one (none for NoIntervention and
// AggregateRule).
const PowerProfile* rule_target(const Rule& rule);

}  // namespace intervene

#endif  // INTERVENE_RULES_H_
