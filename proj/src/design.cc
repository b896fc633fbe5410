#include "intervene/design.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "intervene/error.h"

namespace intervene {
namespace {

constexpr double kCapabilitySlack = 1e-12;

void require_capability(const NetworkParams& params, double required, const char* what) {
  if (params.capability() < required * (1.0 - kCapabilitySlack)) {
    throw InfeasibleError(std::string("capability ") + std::to_string(params.capability()) +
                          " below the " + what + " requirement " + std::to_string(required));
  }
}

void check_margin(double margin) {
  if (!std::isfinite(margin) || margin < 0.0) throw ValidationError("margin must be >= 0");
}

std::vector<std::size_t> resolve_ordering(const NetworkParams& params, const PowerProfile& target,
                                          const std::vector<std::size_t>& ordering) {
  const std::size_t n = params.size();
  if (ordering.empty()) {
    std::vector<std::size_t> out = active_users(params, target);
    for (std::size_t i = 0; i < n; ++i) {
      if (target[i] >= params.max_power(i)) out.push_back(i);
    }
    return out;
  }
  if (ordering.size() != n) throw ValidationError("ordering must list every user once");
  std::vector<bool> seen(n, false);
  for (std::size_t u : ordering) {
    if (u >= n || seen[u]) throw ValidationError("ordering must be a permutation of the users");
    seen[u] = true;
  }
  return ordering;
}

IndividualRule make_rule(const NetworkParams& params, const PowerProfile& target,
                         std::vector<double> rates) {
  return IndividualRule{target, std::move(rates), params.capability()};
}

// Interference-plus-noise term of the recursive strong-sustainment
// condition for the user at `position`, normalized by p*_i h_i0.
double strong_base(const NetworkParams& params, const PowerProfile& target,
                   const std::vector<std::size_t>& order, std::size_t position) {
  const std::size_t i = order[position];
  double sum = params.noise(i);
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k == position) continue;
    const std::size_t j = order[k];
    sum += params.gain(i, j) * (k < position ? target[j] : params.max_power(j));
  }
  return sum / (target[i] * params.device_to_user(i));
}

}  // namespace

std::string to_string(DesignMode mode) {
  switch (mode) {
    case DesignMode::kSustain:
      return "sustain";
    case DesignMode::kStrongSustain:
      return "strong_sustain";
    case DesignMode::kFastConverge:
      return "fast_converge";
    case DesignMode::kAggregateSustain:
      return "aggregate_sustain";
  }
  return "unknown";
}

std::vector<std::size_t> active_users(const NetworkParams& params, const PowerProfile& target) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (target[i] < params.max_power(i)) out.push_back(i);
  }
  return out;
}

void check_target(const NetworkParams& params, const PowerProfile& target) {
  params.check_profile(target);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!(target[i] > 0.0)) {
      throw ValidationError("target power of user " + std::to_string(i) + " must be positive");
    }
  }
}

double sustain_rate_threshold(const NetworkParams& params, const PowerProfile& target,
                              std::size_t i) {
  return (params.interference(i, target) + params.noise(i)) /
         (target[i] * params.device_to_user(i));
}

double sustain_budget(const NetworkParams& params, const PowerProfile& target) {
  check_target(params, target);
  double best = 0.0;
  for (std::size_t i : active_users(params, target)) {
    best = std::max(best, (params.max_power(i) - target[i]) *
                              sustain_rate_threshold(params, target, i));
  }
  return best;
}

double strong_sustain_upper_bound(const NetworkParams& params, const PowerProfile& target,
                                  const std::vector<std::size_t>& ordering) {
  check_target(params, target);
  const auto order = resolve_ordering(params, target, ordering);
  double sum = 0.0;
  double product = 1.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    const double gap = params.max_power(i) - target[i];
    sum += product * gap * strong_base(params, target, order, k);
    product *= params.max_power(i) / target[i];
  }
  return sum;
}

double fast_converge_budget(const NetworkParams& params, const PowerProfile& target) {
  check_target(params, target);
  double distance = 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double pmax = params.max_power(i);
    const double gap = pmax - target[i];
    distance += gap / pmax;
    weighted += gap * (params.interference(i, params.max_profile()) + params.noise(i)) /
                (pmax * params.device_to_user(i));
  }
  if (distance >= 1.0) {
    throw InfeasibleError("fast convergence needs sum_i (P_i - p*_i)/P_i < 1 (got " +
                          std::to_string(distance) + "); use intermediate targets instead");
  }
  return weighted / (1.0 - distance);
}

DesignReport design_sustain(const NetworkParams& params, const PowerProfile& target,
                            const DesignOptions& options) {
  check_target(params, target);
  check_margin(options.margin);
  DesignReport report;
  report.mode = DesignMode::kSustain;
  report.margin = options.margin;
  report.active_users = active_users(params, target);
  report.min_rates.assign(params.size(), 0.0);
  std::vector<double> rates(params.size(), 0.0);
  for (std::size_t i : report.active_users) {
    report.min_rates[i] = sustain_rate_threshold(params, target, i);
    rates[i] = (1.0 + options.margin) * report.min_rates[i];
  }
  report.min_budget = sustain_budget(params, target);
  report.required_budget = report.min_budget;
  if (options.check_capability) require_capability(params, report.min_budget, "sustain");
  report.rule = make_rule(params, target, std::move(rates));
  return report;
}

DesignReport design_strong_sustain(const NetworkParams& params, const PowerProfile& target,
                                   const DesignOptions& options) {
  check_target(params, target);
  check_margin(options.margin);
  DesignReport report;
  report.mode = DesignMode::kStrongSustain;
  report.margin = options.margin;
  report.active_users = active_users(params, target);
  report.ordering = resolve_ordering(params, target, options.ordering);
  const auto& order = report.ordering;
  const std::size_t n = params.size();
  report.min_rates.assign(n, 0.0);
  std::vector<double> rates(n, 0.0);

  double downstream = 0.0;  // sum over later positions of alpha_j (P_j - p*_j)
  double required = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t i = order[k];
    const double gap = params.max_power(i) - target[i];
    if (gap > 0.0) {
      const double base = strong_base(params, target, order, k);
      report.min_rates[i] = downstream / target[i] + base;
      rates[i] = (1.0 + options.margin) * report.min_rates[i];
      required = std::max(required, params.max_power(i) / target[i] * downstream + gap * base);
    }
    downstream += rates[i] * gap;
  }
  report.min_budget = required;
  report.required_budget = required;
  report.budget_upper_bound = strong_sustain_upper_bound(params, target, order);
  if (options.check_capability) require_capability(params, required, "strong sustain");
  report.rule = make_rule(params, target, std::move(rates));
  return report;
}

DesignReport design_fast_converge(const NetworkParams& params, const PowerProfile& target,
                                  const DesignOptions& options) {
  check_margin(options.margin);
  const double closed_form = fast_converge_budget(params, target);
  DesignReport report;
  report.mode = DesignMode::kFastConverge;
  report.margin = options.margin;
  report.active_users = active_users(params, target);
  const std::size_t n = params.size();
  report.min_rates.assign(n, 0.0);
  std::vector<double> rates(n, 0.0);

  // At equality every user's condition reads alpha_i P_i = S + p*_i C_i with
  // S = sum_j alpha_j (P_j - p*_j); solving for S gives the closed form.
  const PowerProfile pmax = params.max_profile();
  const double s = closed_form;
  double total = 0.0;
  for (std::size_t i : report.active_users) {
    const double c = (params.interference(i, pmax) + params.noise(i)) /
                     (target[i] * params.device_to_user(i));
    report.min_rates[i] = (s + target[i] * c) / params.max_power(i);
    rates[i] = (1.0 + options.margin) * report.min_rates[i];
    total += rates[i] * (params.max_power(i) - target[i]);
  }
  double required = 0.0;
  for (std::size_t i : report.active_users) {
    const double gap = params.max_power(i) - target[i];
    const double others = total - rates[i] * gap;
    const double c = (params.interference(i, pmax) + params.noise(i)) /
                     (target[i] * params.device_to_user(i));
    required = std::max(required, params.max_power(i) / target[i] * others + gap * c);
  }
  report.min_budget = closed_form;
  report.required_budget = required;
  if (options.check_capability) require_capability(params, required, "fast convergence");
  report.rule = make_rule(params, target, std::move(rates));
  return report;
}

DesignReport design_aggregate(const NetworkParams& params, const PowerProfile& target,
                              const DesignOptions& options) {
  check_target(params, target);
  check_margin(options.margin);
  const std::size_t n = params.size();
  DesignReport report;
  report.mode = DesignMode::kAggregateSustain;
  report.margin = options.margin;
  report.active_users = active_users(params, target);
  report.min_rates.assign(n, 0.0);
  report.user_budgets.assign(n, 0.0);
  double rate = 0.0;
  for (std::size_t i : report.active_users) {
    const double threshold = sustain_rate_threshold(params, target, i);
    report.min_rates[i] = threshold / params.user_to_device(i);
    report.user_budgets[i] = (params.max_power(i) - target[i]) * threshold;
    rate = std::max(rate, report.min_rates[i]);
  }
  report.min_budget = sustain_budget(params, target);
  report.required_budget = report.min_budget;
  if (options.check_capability) require_capability(params, report.min_budget, "aggregate sustain");
  AggregateRule rule;
  rule.rate = (1.0 + options.margin) * rate;
  rule.weights.assign(params.user_to_device().begin(), params.user_to_device().end());
  for (std::size_t i = 0; i < n; ++i) rule.target_aggregate += rule.weights[i] * target[i];
  rule.budget = params.capability();
  report.rule = rule;
  return report;
}

std::optional<PowerProfile> aggregate_nonuniqueness_witness(const NetworkParams& params,
                                                            const AggregateRule& rule,
                                                            const PowerProfile& target,
                                                            double epsilon) {
  check_target(params, target);
  validate_rule(params, rule);
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  const std::size_t n = params.size();
  const auto active = active_users(params, target);
  std::vector<double> alpha(n, 0.0);
  std::vector<double> budget(n, 0.0);
  double alpha_max = 0.0;
  double budget_max = 0.0;
  for (std::size_t i : active) {
    const double threshold = sustain_rate_threshold(params, target, i);
    alpha[i] = threshold / params.user_to_device(i);
    budget[i] = (params.max_power(i) - target[i]) * threshold;
    alpha_max = std::max(alpha_max, alpha[i]);
    budget_max = std::max(budget_max, budget[i]);
  }
  auto ordered = [](double vi, double vj, double vmax) {
    return (vi == vmax && vi > vj) || (vi < vmax && vj < vmax);
  };

  // Pairs where i holds both maxima are tried first: moving along the pair
  // then only loosens user i's conditions.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i : active) {
      const bool leader = alpha[i] == alpha_max && budget[i] == budget_max;
      if ((pass == 0) != leader) continue;
      for (std::size_t j : active) {
        if (j != i && ordered(alpha[i], alpha[j], alpha_max) &&
            ordered(budget[i], budget[j], budget_max)) {
          pairs.emplace_back(i, j);
        }
      }
    }
  }

  const Rule as_rule = rule;
  for (auto [i, j] : pairs) {
    const double wi = rule.weights[i];
    const double wj = rule.weights[j];
    const double norm = std::hypot(1.0 / wi, 1.0 / wj);
    std::vector<double> steps;
    for (int k = 1; k <= 9; ++k) steps.push_back(k * epsilon / 10.0);
    for (int k = 1; k <= 30; ++k) steps.push_back(epsilon / 10.0 * std::ldexp(1.0, -k));
    for (double len : steps) {
      const double s = len / norm;
      PowerProfile candidate = target;
      candidate[i] += s / wi;
      candidate[j] -= s / wj;
      if (candidate[i] > params.max_power(i) || candidate[j] <= 0.0) continue;
      if (is_nash(params, as_rule, candidate)) return candidate;
    }
  }
  return std::nullopt;
}

ExtremeRuleDesign extreme_rule(const NetworkParams& params, const PowerProfile& target) {
  check_target(params, target);
  ExtremeRuleDesign out;
  out.rule = ExtremeRule{target, params.capability()};
  const auto active = active_users(params, target);
  const PowerProfile pmax = params.max_profile();
  if (active.empty()) {
    out.predicted_equilibria = {pmax};
    return out;
  }
  const double pb = sustain_budget(params, target);
  const double p0 = params.capability();
  const bool target_stable = p0 >= pb * (1.0 - kCapabilitySlack);
  // With a single active user the others already sit at their targets when
  // everyone plays P, so that user can still collect zero intervention.
  const bool max_stable = active.size() >= 2 || p0 <= pb * (1.0 + kCapabilitySlack);
  if (target_stable) out.predicted_equilibria.push_back(target);
  if (max_stable) out.predicted_equilibria.push_back(pmax);
  return out;
}

}  // namespace intervene
