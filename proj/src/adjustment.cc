#include "intervene/adjustment.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "intervene/equilibrium.h"
#include "intervene/error.h"

namespace intervene {
namespace {

constexpr double kSnapTol = 1e-12;
constexpr double kBisectTol = 1e-9;
constexpr int kMaxSequenceLength = 100000;

bool same_profile(const PowerProfile& a, const PowerProfile& b) {
  return approx_equal(a, b, kSnapTol);
}

bool converged_at(const PowerProfile& profile, const PowerProfile& target, double intervention,
                  double capability) {
  return approx_equal(profile, target, kConvergenceTol) &&
         intervention < kConvergenceTol * capability;
}

void check_eps(double eps1, double eps2) {
  if (!(eps1 > 0.0 && eps1 < 1.0) || !(eps2 > 0.0 && eps2 < 1.0)) {
    throw ValidationError("eps1 and eps2 must lie in (0, 1)");
  }
}

}  // namespace

double relative_distance(const PowerProfile& p, const PowerProfile& q) {
  if (p.size() != q.size()) throw ValidationError("profile dimension mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) throw ValidationError("relative distance undefined: p_i = 0");
    d += (p[i] - q[i]) / p[i];
  }
  return d;
}

std::vector<double> normalized_interference(const NetworkParams& params,
                                            const PowerProfile& profile) {
  std::vector<double> b(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    b[i] = (params.interference(i, profile) + params.noise(i)) / params.device_to_user(i);
  }
  return b;
}

double step_budget(const NetworkParams& params, const PowerProfile& previous,
                   const PowerProfile& next) {
  const auto b = normalized_interference(params, previous);
  double ratio = 0.0;
  double weighted = 0.0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double r = (previous[j] - next[j]) / previous[j];
    ratio += r;
    weighted += r * b[j];
  }
  if (ratio >= 1.0) return std::numeric_limits<double>::infinity();
  const double s = weighted / (1.0 - ratio);
  double best = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!(next[i] < params.max_power(i))) continue;
    const double pmax = params.max_power(i);
    best = std::max(best, pmax / previous[i] * s + (pmax - previous[i]) * b[i] / previous[i]);
  }
  return best;
}

TargetSequence fixed_rd_sequence(const NetworkParams& params, const PowerProfile& target,
                                 double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  check_target(params, target);
  const std::size_t n = params.size();
  TargetSequence seq;
  seq.targets.push_back(params.max_profile());
  seq.step_budgets.push_back(0.0);
  seq.underfilled.push_back(false);
  const double goal = static_cast<double>(n) - delta;

  while (relative_distance(seq.targets.back(), target) >= 1.0) {
    if (seq.targets.size() > kMaxSequenceLength) throw Error("fixed-distance sequence diverged");
    const PowerProfile& prev = seq.targets.back();
    const auto b = normalized_interference(params, prev);
    std::vector<double> ratio(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ratio[i] = target[i] / prev[i];
      sum += ratio[i];
    }
    std::vector<bool> open(n, true);
    while (sum < goal) {
      std::size_t pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (open[i] && (pick == n || b[i] > b[pick])) pick = i;
      }
      if (pick == n) break;
      double r = std::min(1.0, goal - (sum - ratio[pick]));
      if (1.0 - r <= kSnapTol) r = 1.0;
      sum += r - ratio[pick];
      ratio[pick] = r;
      open[pick] = false;
    }
    PowerProfile next = prev;
    for (std::size_t i = 0; i < n; ++i) next[i] = ratio[i] == 1.0 ? prev[i] : ratio[i] * prev[i];
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(next[i] - target[i]) <= kSnapTol * target[i]) next[i] = target[i];
    }
    seq.step_budgets.push_back(step_budget(params, prev, next));
    seq.targets.push_back(next);
    seq.underfilled.push_back(false);
  }
  if (same_profile(seq.targets.back(), target)) {
    seq.targets.back() = target;
  } else {
    seq.step_budgets.push_back(step_budget(params, seq.targets.back(), target));
    seq.targets.push_back(target);
    seq.underfilled.push_back(false);
  }
  return seq;
}

double mrd_budget_threshold(const NetworkParams& params, const PowerProfile& target,
                            double eps1) {
  check_target(params, target);
  const auto b = normalized_interference(params, params.max_profile());
  double best = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    best = std::max(best, (params.max_power(i) - target[i]) / target[i] * b[i]);
  }
  return best + eps1;
}

TargetSequence mrd_sequence(const NetworkParams& params, const PowerProfile& target, double budget,
                            double eps1, double eps2) {
  check_eps(eps1, eps2);
  const double threshold = mrd_budget_threshold(params, target, eps1);
  if (!(budget > threshold)) {
    throw InfeasibleError("budget " + std::to_string(budget) +
                          " does not exceed the MRD requirement " + std::to_string(threshold));
  }
  const std::size_t n = params.size();
  const double level = budget - eps1;
  TargetSequence seq;
  seq.targets.push_back(params.max_profile());
  seq.step_budgets.push_back(0.0);
  seq.underfilled.push_back(false);

  while (!same_profile(seq.targets.back(), target)) {
    if (seq.targets.size() > kMaxSequenceLength) throw Error("MRD sequence diverged");
    const PowerProfile prev = seq.targets.back();
    const auto b = normalized_interference(params, prev);
    PowerProfile next = prev;
    std::vector<bool> open(n, false);
    for (std::size_t i = 0; i < n; ++i) open[i] = prev[i] > target[i];
    double p0t = 0.0;
    bool binding = false;
    while (true) {
      std::size_t pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (open[i] && (pick == n || b[i] < b[pick])) pick = i;
      }
      if (pick == n) break;
      double others = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i != pick) others += next[i] / prev[i];
      }
      double lo = std::max(target[pick],
                           (static_cast<double>(n) - 1.0 + eps2 - others) * prev[pick]);
      if (lo - target[pick] <= kSnapTol * target[pick]) lo = target[pick];
      lo = std::min(lo, prev[pick]);
      next[pick] = lo;
      p0t = step_budget(params, prev, next);
      if (p0t < level) {
        open[pick] = false;
        continue;
      }
      if (p0t > level) {
        // The step budget decreases in this user's power; keep the feasible end.
        double hi = prev[pick];
        next[pick] = hi;
        if (step_budget(params, prev, next) > level) {
          throw InfeasibleError("MRD step cannot move any user within the budget");
        }
        while (hi - lo > kBisectTol) {
          const double mid = 0.5 * (lo + hi);
          next[pick] = mid;
          if (step_budget(params, prev, next) > level) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        next[pick] = hi;
        p0t = step_budget(params, prev, next);
      }
      binding = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(next[i] - target[i]) <= kSnapTol * target[i]) next[i] = target[i];
    }
    if (same_profile(next, prev)) throw InfeasibleError("MRD sequence made no progress");
    seq.targets.push_back(next);
    seq.step_budgets.push_back(step_budget(params, prev, next));
    seq.underfilled.push_back(!binding);
  }
  seq.targets.back() = target;
  return seq;
}

TargetSequence geometric_sequence(const PowerProfile& target, const PowerProfile& max_powers,
                                  int length) {
  if (target.size() != max_powers.size()) throw ValidationError("profile dimension mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!(target[i] > 0.0) || !(target[i] <= max_powers[i])) {
      throw ValidationError("geometric sequence needs 0 < p*_i <= P_i");
    }
  }
  const bool trivial = target == max_powers;
  if (length < 1 || (length < 2 && !trivial)) {
    throw ValidationError("geometric sequence needs length >= 2 when the target differs from P");
  }
  TargetSequence seq;
  for (int t = 1; t <= length; ++t) {
    PowerProfile p = max_powers;
    if (t == length) {
      p = target;
    } else {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double eta = std::pow(target[i] / max_powers[i], 1.0 / (length - 1));
        p[i] = std::pow(eta, t - 1) * max_powers[i];
      }
    }
    seq.targets.push_back(p);
    seq.step_budgets.push_back(0.0);
    seq.underfilled.push_back(false);
  }
  return seq;
}

int geometric_time(const NetworkParams& params, const PowerProfile& target, double budget,
                   double eps1, double eps2, int max_length) {
  check_eps(eps1, eps2);
  check_target(params, target);
  const PowerProfile pmax = params.max_profile();
  if (target == pmax) return 1;
  for (int length = 2; length <= max_length; ++length) {
    const auto seq = geometric_sequence(target, pmax, length);
    bool ok = true;
    for (std::size_t t = 1; t < seq.targets.size() && ok; ++t) {
      const auto& prev = seq.targets[t - 1];
      const auto& next = seq.targets[t];
      ok = relative_distance(prev, next) <= 1.0 - eps2 &&
           step_budget(params, prev, next) <= budget - eps1;
    }
    if (ok) return length;
  }
  throw InfeasibleError("no geometric sequence within the budget up to length " +
                        std::to_string(max_length));
}

double bound_budget_threshold(const NetworkParams& params, const PowerProfile& target) {
  check_target(params, target);
  const auto b = normalized_interference(params, target);
  double ratio = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    ratio = std::max(ratio, params.max_power(i) / target[i]);
  }
  return (ratio - 1.0) * *std::max_element(b.begin(), b.end());
}

int convergence_time_bound(const NetworkParams& params, const PowerProfile& target,
                           double budget) {
  const double threshold = bound_budget_threshold(params, target);
  const PowerProfile pmax = params.max_profile();
  if (target == pmax) throw InfeasibleError("convergence bound needs a target other than P");
  if (relative_distance(pmax, target) < 1.0) {
    throw InfeasibleError("convergence bound needs sum_i (P_i - p*_i)/P_i >= 1");
  }
  if (!(budget > threshold)) {
    throw InfeasibleError("budget " + std::to_string(budget) +
                          " does not exceed the bound's requirement " + std::to_string(threshold));
  }
  const auto b = normalized_interference(params, target);
  double ratio = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    ratio = std::max(ratio, params.max_power(i) / target[i]);
  }
  const double c = budget / (*std::max_element(b.begin(), b.end()) * ratio) + 1.0 / ratio;
  if (!(c > 1.0)) throw InfeasibleError("convergence bound constant C must exceed 1");
  const double rhs = static_cast<double>(params.size()) - 1.0 + 1.0 / c;
  auto lhs = [&](int t) {
    double sum = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      sum += std::pow(target[i] / params.max_power(i), 1.0 / (t - 2));
    }
    return sum;
  };
  int t = 3;
  while (lhs(t + 1) < rhs) {
    if (++t > kMaxSequenceLength) throw Error("convergence bound did not terminate");
  }
  return t;
}

StepRule step_rule(const NetworkParams& params, const PowerProfile& previous,
                   const PowerProfile& target, double margin) {
  params.check_profile(previous);
  params.check_profile(target);
  const std::size_t n = params.size();
  const auto b = normalized_interference(params, previous);
  std::vector<double> gap(n, 0.0);
  std::vector<double> scale(n, 0.0);
  double ratio = 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(target[i] < params.max_power(i))) continue;
    if (!(target[i] > 0.0)) throw ValidationError("step target must be positive");
    gap[i] = std::abs(previous[i] - target[i]);
    scale[i] = target[i] + gap[i];
    ratio += gap[i] / scale[i];
    weighted += gap[i] / scale[i] * b[i];
  }
  if (ratio >= 1.0) {
    throw InfeasibleError("step relative distance reaches 1; no one-step rule exists");
  }
  const double s = weighted / (1.0 - ratio);
  auto build = [&](double m) {
    std::vector<double> rates(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (scale[i] > 0.0) rates[i] = (1.0 + m) * (s + b[i]) / scale[i];
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += rates[i] * gap[i];
    double required = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (scale[i] == 0.0) continue;
      const double others = total - rates[i] * gap[i];
      required = std::max(required, params.max_power(i) / target[i] * (others + b[i]) - b[i]);
    }
    return StepRule{IndividualRule{target, std::move(rates), params.capability()}, required};
  };
  StepRule out = build(margin);
  // The required budget is affine in the margin; shrink the margin when the
  // full one would not fit the capability but a smaller one does.
  if (margin > 0.0 && out.required_budget > params.capability()) {
    const double base = build(0.0).required_budget;
    if (base < params.capability()) {
      out = build(0.5 * margin * (params.capability() - base) / (out.required_budget - base));
    }
  }
  return out;
}

Trajectory run_adjustment(const NetworkParams& params, const Rule& rule,
                          const PowerProfile& initial, int max_steps) {
  validate_rule(params, rule);
  params.check_profile(initial);
  Trajectory traj;
  const PowerProfile* target = rule_target(rule);
  const PowerProfile pmax = params.max_profile();
  const bool aggregate = std::holds_alternative<AggregateRule>(rule);
  const PowerProfile& goal = target != nullptr ? *target : pmax;
  const double cap = std::max(rule_budget(rule), params.capability());

  PowerProfile current = initial;
  if (!aggregate && converged_at(current, goal, evaluate(rule, current), cap)) {
    traj.converged = true;
    traj.steps_to_converge = 0;
    return traj;
  }
  for (int t = 1; t <= max_steps; ++t) {
    PowerProfile next = best_response_step(params, rule, current);
    const double f = evaluate(rule, next);
    traj.steps.push_back({rule, goal, next, f});
    const bool done = aggregate ? (approx_equal(next, current, kConvergenceTol) &&
                                   f < kConvergenceTol * cap)
                                : converged_at(next, goal, f, cap);
    current = next;
    if (done) {
      traj.converged = true;
      traj.steps_to_converge = aggregate ? t - 1 : t;
      if (aggregate) traj.steps.pop_back();
      return traj;
    }
  }
  return traj;
}

Trajectory run_adjustment(const NetworkParams& params, const TargetSequence& schedule,
                          const PowerProfile& initial, int max_steps, double margin) {
  if (schedule.targets.empty()) throw ValidationError("empty target schedule");
  params.check_profile(initial);
  for (const auto& t : schedule.targets) params.check_profile(t);
  Trajectory traj;
  const PowerProfile& final_target = schedule.targets.back();
  PowerProfile current = initial;
  const int scheduled = static_cast<int>(schedule.targets.size());
  for (int t = 1; t <= max_steps; ++t) {
    const PowerProfile& step_target = schedule.targets[std::min(t, scheduled) - 1];
    const StepRule sr = step_rule(params, current, step_target, margin);
    const Rule rule = sr.rule;
    PowerProfile next = best_response_step(params, rule, current);
    const double f = evaluate(rule, next);
    traj.steps.push_back({rule, step_target, next, f});
    current = next;
    if (t >= scheduled && converged_at(next, final_target, f, params.capability())) {
      traj.converged = true;
      traj.steps_to_converge = t;
      return traj;
    }
  }
  return traj;
}

}  // namespace intervene
