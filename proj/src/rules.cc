#include "intervene/rules.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "intervene/error.h"

namespace intervene {
namespace {

void check_dim(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw ValidationError("dimension mismatch: rule has " + std::to_string(expected) +
                          " users, profile has " + std::to_string(got));
  }
}

void check_budget(double budget) {
  if (!std::isfinite(budget) || budget <= 0.0) {
    throw ValidationError("rule budget must be positive and finite");
  }
}

void check_nonneg(double x, const char* what) {
  if (!std::isfinite(x) || x < 0.0) {
    throw ValidationError(std::string(what) + " must be finite and nonnegative");
  }
}

}  // namespace

double clip_power(double x, double budget) { return std::min(std::max(x, 0.0), budget); }

double evaluate(const IndividualRule& rule, const PowerProfile& profile) {
  check_dim(rule.target.size(), profile.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    sum += rule.rates[i] * std::abs(profile[i] - rule.target[i]);
  }
  return clip_power(sum, rule.budget);
}

double evaluate(const AggregateRule& rule, const PowerProfile& profile) {
  check_dim(rule.weights.size(), profile.size());
  double aggregate = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) aggregate += rule.weights[i] * profile[i];
  return clip_power(rule.rate * std::abs(aggregate - rule.target_aggregate), rule.budget);
}

double evaluate(const GenericRule& rule, const PowerProfile& profile) {
  check_dim(rule.target.size(), profile.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    const double dev = std::abs(profile[i] - rule.target[i]);
    double power = 1.0;
    for (Eigen::Index k = 0; k < rule.coeffs.cols(); ++k) {
      power *= dev;
      sum += rule.coeffs(static_cast<Eigen::Index>(i), k) * power;
    }
  }
  return clip_power(sum, rule.budget);
}

double evaluate(const ExtremeRule& rule, const PowerProfile& profile) {
  check_dim(rule.target.size(), profile.size());
  for (std::size_t i = 0; i < profile.size(); ++i) {
    const double scale = std::max(std::abs(rule.target[i]), 1.0);
    if (std::abs(profile[i] - rule.target[i]) > kExtremeTargetTol * scale) return rule.budget;
  }
  return 0.0;
}

double evaluate(const Rule& rule, const PowerProfile& profile) {
  return std::visit(
      [&](const auto& r) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(r)>, NoIntervention>) {
          return 0.0;
        } else {
          return evaluate(r, profile);
        }
      },
      rule);
}

double rule_budget(const Rule& rule) {
  return std::visit(
      [](const auto& r) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(r)>, NoIntervention>) {
          return 0.0;
        } else {
          return r.budget;
        }
      },
      rule);
}

const PowerProfile* rule_target(const Rule& rule) {
  if (const auto* r = std::get_if<IndividualRule>(&rule)) return &r->target;
  if (const auto* r = std::get_if<GenericRule>(&rule)) return &r->target;
  if (const auto* r = std::get_if<ExtremeRule>(&rule)) return &r->target;
  return nullptr;
}

void validate_rule(const NetworkParams& params, const Rule& rule) {
  const std::size_t n = params.size();
  if (const auto* r = std::get_if<IndividualRule>(&rule)) {
    check_dim(n, r->target.size());
    check_dim(n, r->rates.size());
    check_budget(r->budget);
    for (double a : r->rates) check_nonneg(a, "intervention rate");
    params.check_profile(r->target);
  } else if (const auto* r = std::get_if<AggregateRule>(&rule)) {
    check_dim(n, r->weights.size());
    check_budget(r->budget);
    check_nonneg(r->rate, "aggregate rate");
    check_nonneg(r->target_aggregate, "target aggregate");
    for (double w : r->weights) {
      if (!std::isfinite(w) || w <= 0.0) throw ValidationError("aggregate weights must be positive");
    }
  } else if (const auto* r = std::get_if<GenericRule>(&rule)) {
    check_dim(n, r->target.size());
    check_dim(n, static_cast<std::size_t>(r->coeffs.rows()));
    if (r->coeffs.cols() < 1) throw ValidationError("generic rule needs order K >= 1");
    check_budget(r->budget);
    for (Eigen::Index i = 0; i < r->coeffs.size(); ++i) {
      check_nonneg(r->coeffs.data()[i], "generic rule coefficient");
    }
    params.check_profile(r->target);
  } else if (const auto* r = std::get_if<ExtremeRule>(&rule)) {
    check_dim(n, r->target.size());
    check_budget(r->budget);
    params.check_profile(r->target);
  }
}

}  // namespace intervene
