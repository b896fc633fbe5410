#include "intervene/experiments.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <thread>

#include "intervene/error.h"
#include "intervene/welfare.h"

namespace intervene {
namespace {

constexpr double kMaxRateGridProfiles = 1e6;
constexpr int kMaxBudgetDoublings = 60;

// out[k] = fn(k) for k < count, spread over hardware threads. The first
// exception (by index) is rethrown after all workers stop.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t count, Fn fn) {
  std::vector<T> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        out[k] = fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// Utility-relevant part of user i's SINR at power x, others fixed at q.
double corner_sinr(const NetworkParams& params, const IndividualRule& rule, const PowerProfile& q,
                   std::size_t i, double x) {
  double c = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (j != i) c += rule.rates[j] * std::abs(q[j] - rule.target[j]);
  }
  const double f = clip_power(c + rule.rates[i] * std::abs(x - rule.target[i]), rule.budget);
  PowerProfile p = q.with(i, x);
  return sinr_unchecked(params, f, p, i);
}

bool corner_is_nash(const NetworkParams& params, const IndividualRule& rule, const PowerProfile& q,
                    double tol) {
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double t = rule.target[i];
    const double pmax = params.max_power(i);
    if (t >= pmax) continue;
    const double other = q[i] == t ? pmax : t;
    const double here = corner_sinr(params, rule, q, i, q[i]);
    const double there = corner_sinr(params, rule, q, i, other);
    if (there > here * (1.0 + tol)) return false;
  }
  return true;
}

// The target is the only corner equilibrium.
bool strongly_sustains(const NetworkParams& params, const IndividualRule& rule,
                       const std::vector<std::size_t>& active, double tol) {
  if (!corner_is_nash(params, rule, rule.target, tol)) return false;
  const std::size_t corners = std::size_t{1} << active.size();
  for (std::size_t mask = 1; mask < corners; ++mask) {
    PowerProfile q = rule.target;
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (mask & (std::size_t{1} << k)) q[active[k]] = params.max_power(active[k]);
    }
    if (corner_is_nash(params, rule, q, tol)) return false;
  }
  return true;
}

// Searches the rate grid for a rule with budget `budget` that strongly
// sustains the target.
std::optional<IndividualRule> find_strong_rule(const NetworkParams& params,
                                               const PowerProfile& target,
                                               const std::vector<std::size_t>& active,
                                               const std::vector<double>& extra_rates,
                                               double budget, const StrongBudgetOptions& opt) {
  const std::size_t n = params.size();
  std::vector<std::vector<double>> axes;
  for (std::size_t i : active) {
    const double lo = (1.0 + opt.margin) * sustain_rate_threshold(params, target, i);
    const double hi = std::max(lo, budget / (params.max_power(i) - target[i]));
    std::vector<double> axis = linspace(lo, hi, opt.rate_grid);
    if (extra_rates[i] > lo && extra_rates[i] < hi) axis.push_back(extra_rates[i]);
    axes.push_back(std::move(axis));
  }
  IndividualRule rule{target, std::vector<double>(n, 0.0), budget};
  std::vector<std::size_t> idx(active.size(), 0);
  while (true) {
    for (std::size_t k = 0; k < active.size(); ++k) rule.rates[active[k]] = axes[k][idx[k]];
    if (strongly_sustains(params, rule, active, opt.nash_tol)) return rule;
    std::size_t d = 0;
    while (d < active.size() && ++idx[d] == axes[d].size()) idx[d++] = 0;
    if (d == active.size()) break;
  }
  return std::nullopt;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) throw ValidationError("linspace needs at least one point");
  if (count == 1) return {lo};
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    out[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / (count - 1);
  }
  out.back() = hi;
  return out;
}

WelfareRow welfare_point(const NetworkParams& params, double distance, int grid_points,
                         int refine_iters) {
  WelfareRow row;
  row.distance = distance;
  const PowerProfile ne = params.max_profile();
  row.ne_sum_rate = welfare(params, ne, WelfareSpec{WelfareKind::kSumRate});
  row.ne_max_min = welfare(params, ne, WelfareSpec{WelfareKind::kMaxMin});
  row.opt_sum_rate =
      solve_target(params, WelfareSpec{WelfareKind::kSumRate}, grid_points, refine_iters).value;
  row.opt_max_min =
      solve_target(params, WelfareSpec{WelfareKind::kMaxMin}, grid_points, refine_iters).value;
  row.sum_rate_ratio = row.ne_sum_rate > 0.0 ? row.opt_sum_rate / row.ne_sum_rate : 1.0;
  row.max_min_ratio = row.ne_max_min > 0.0 ? row.opt_max_min / row.ne_max_min : 1.0;
  return row;
}

std::vector<WelfareRow> welfare_sweep(const Geometry& geometry, std::size_t moving_user,
                                      const std::vector<double>& distances, int grid_points,
                                      int refine_iters) {
  for (double d : distances) with_link_distance(geometry, moving_user, d);
  return parallel_map<WelfareRow>(distances.size(), [&](std::size_t k) {
    const double d = distances[k];
    const NetworkParams params = network_from_geometry(with_link_distance(geometry, moving_user, d));
    return welfare_point(params, d, grid_points, refine_iters);
  });
}

std::vector<PowerProfile> corner_equilibria(const NetworkParams& params, const IndividualRule& rule,
                                            double tol) {
  validate_rule(params, Rule{rule});
  const std::vector<std::size_t> active = active_users(params, rule.target);
  std::vector<PowerProfile> out;
  const std::size_t corners = std::size_t{1} << active.size();
  for (std::size_t mask = 0; mask < corners; ++mask) {
    PowerProfile q = rule.target;
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (mask & (std::size_t{1} << k)) q[active[k]] = params.max_power(active[k]);
    }
    if (corner_is_nash(params, rule, q, tol)) out.push_back(q);
  }
  return out;
}

StrongBudgetResult simulated_strong_budget(const NetworkParams& params, const PowerProfile& target,
                                           const StrongBudgetOptions& options) {
  check_target(params, target);
  if (options.rate_grid < 2) throw ValidationError("rate_grid must be at least 2");
  const std::size_t n = params.size();
  const std::vector<std::size_t> active = active_users(params, target);
  if (active.empty()) {
    return {0.0, IndividualRule{target, std::vector<double>(n, 0.0), 0.0}};
  }
  if (std::pow(options.rate_grid + 1.0, static_cast<double>(active.size())) >
      kMaxRateGridProfiles) {
    throw ValidationError("rate grid too large for this many active users");
  }

  DesignOptions design;
  design.margin = options.margin;
  design.check_capability = false;
  const DesignReport strong = design_strong_sustain(params, target, design);
  const std::vector<double>& closed_rates = strong.individual().rates;

  double lo = sustain_budget(params, target);
  auto found = find_strong_rule(params, target, active, closed_rates, lo, options);
  if (found) return {lo, *found};

  double hi = strong.required_budget * (1.0 + options.margin);
  std::optional<IndividualRule> best;
  for (int k = 0; k <= kMaxBudgetDoublings; ++k) {
    best = find_strong_rule(params, target, active, closed_rates, hi, options);
    if (best) break;
    lo = hi;
    hi *= 2.0;
  }
  if (!best) throw InfeasibleError("no strongly sustaining rule found on the rate grid");
  while (hi - lo > options.rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    auto rule = find_strong_rule(params, target, active, closed_rates, mid, options);
    if (rule) {
      hi = mid;
      best = std::move(rule);
    } else {
      lo = mid;
    }
  }
  return {hi, *best};
}

std::vector<ContourRow> budget_contour(const NetworkParams& params, int grid,
                                       const StrongBudgetOptions& options) {
  if (params.size() != 2) throw ValidationError("budget contour needs a two-user network");
  if (grid < 1) throw ValidationError("contour grid must be positive");
  const auto g = static_cast<std::size_t>(grid);
  return parallel_map<ContourRow>(g * g, [&](std::size_t k) {
    const double a = static_cast<double>(k / g);
    const double b = static_cast<double>(k % g);
    const PowerProfile target{params.max_power(0) * (a + 1) / grid,
                              params.max_power(1) * (b + 1) / grid};
    ContourRow row;
    row.p1 = target[0];
    row.p2 = target[1];
    row.sustain = sustain_budget(params, target);
    row.simulated_strong = simulated_strong_budget(params, target, options).budget;
    row.strong_bound = strong_sustain_upper_bound(params, target);
    try {
      row.fast_bound = fast_converge_budget(params, target);
      row.fast_feasible = true;
    } catch (const InfeasibleError&) {
      row.fast_bound = std::numeric_limits<double>::quiet_NaN();
    }
    return row;
  });
}

double max_step_budget(const NetworkParams& params, const TargetSequence& seq) {
  double out = 0.0;
  for (std::size_t t = 1; t < seq.targets.size(); ++t) {
    out = std::max(out, step_budget(params, seq.targets[t - 1], seq.targets[t]));
  }
  return out;
}

TargetSequence geometric_for_distance(const NetworkParams& params, const PowerProfile& target,
                                      double delta) {
  check_target(params, target);
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  const PowerProfile pmax = params.max_profile();
  auto per_step = [&](int length) {
    double sum = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      sum += 1.0 - std::pow(target[i] / pmax[i], 1.0 / (length - 1));
    }
    return sum;
  };
  int length = 2;
  while (per_step(length) > delta) {
    if (length > 1000000) throw InfeasibleError("geometric sequence too long");
    ++length;
  }
  return geometric_sequence(target, pmax, length);
}

std::vector<TradeoffRow> rd_tradeoff(const NetworkParams& params, const PowerProfile& target,
                                     const std::vector<double>& deltas) {
  std::vector<TradeoffRow> rows;
  for (double delta : deltas) {
    TradeoffRow row;
    row.delta = delta;
    const TargetSequence rd = fixed_rd_sequence(params, target, delta);
    row.rd_steps = static_cast<int>(rd.length());
    row.rd_budget = max_step_budget(params, rd);
    const TargetSequence geo = geometric_for_distance(params, target, delta);
    row.geometric_steps = static_cast<int>(geo.length());
    row.geometric_budget = max_step_budget(params, geo);
    rows.push_back(row);
  }
  return rows;
}

BudgetTimeRow budget_time_point(const NetworkParams& params, const PowerProfile& target,
                                 double budget, double eps1, double eps2) {
  BudgetTimeRow row;
  row.budget = budget;
  const TargetSequence mrd = mrd_sequence(params, target, budget, eps1, eps2);
  row.mrd_time = static_cast<int>(mrd.length());
  row.geometric_time = geometric_time(params, target, budget, eps1, eps2);
  if (budget > bound_budget_threshold(params, target)) {
    row.time_bound = convergence_time_bound(params, target, budget);
  }
  const NetworkParams capped = params.with_capability(budget);
  const Trajectory traj =
      run_adjustment(capped, mrd, params.max_profile(), row.mrd_time + 50);
  if (traj.steps_to_converge) row.measured_time = *traj.steps_to_converge;
  return row;
}

std::vector<BudgetTimeRow> budget_time(const NetworkParams& params, const PowerProfile& target,
                                       const std::vector<double>& budgets, double eps1,
                                       double eps2) {
  return parallel_map<BudgetTimeRow>(budgets.size(), [&](std::size_t k) {
    return budget_time_point(params, target, budgets[k], eps1, eps2);
  });
}

}  // namespace intervene
