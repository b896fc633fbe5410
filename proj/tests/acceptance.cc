// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "intervene/adjustment.h"
#include "intervene/design.h"
#include "intervene/equilibrium.h"
#include "intervene/error.h"
#include "intervene/estimation.h"
#include "intervene/experiments.h"
#include "intervene/scenario.h"
#include "oracles.h"

using namespace intervene;

namespace {

// Pinned tolerances.
constexpr double kDesignMargin = 1e-6;
constexpr double kStrongRelTol = 1e-5;
constexpr double kHyperplaneTol = 1e-9;
constexpr double kWitnessEps = 1e-2;
constexpr double kEstimationEps = 1e-4;
constexpr double kGainTolFactor = 10.0;
constexpr double kMaxPowerTol = 1e-6;
constexpr double kPowerRecoveryTol = 1e-9;
constexpr double kBroadcastSlack = 0.5;
constexpr double kEstimateRuleMarginFactor = 100.0;
constexpr double kSumRateRatio = 1.9;
constexpr double kMaxMinEquality = 0.01;
constexpr double kStepTol = 1e-9;

Scenario load(const char* name) {
  return load_scenario(std::string(INTERVENE_SCENARIOS) + "/" + name);
}

struct Check {
  bool ok = true;
  std::string first_failure;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) first_failure = what;
    ok = ok && cond;
  }
};

double rel_err(double est, double truth) { return std::abs(est - truth) / std::abs(truth); }

double b_of(const NetworkSpec& s, const PowerProfile& p, std::size_t i) {
  double v = s.noise[i];
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (j != i) v += s.gains(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * p[j];
  }
  return v / s.device_to_user[i];
}

// Per-step budget written out from the model.
double step_budget_oracle(const NetworkParams& params, const PowerProfile& prev,
                          const PowerProfile& next) {
  const NetworkSpec s = params.spec();
  double num = 0.0;
  double den = 1.0;
  for (std::size_t j = 0; j < prev.size(); ++j) {
    num += (prev[j] - next[j]) * b_of(s, prev, j) / prev[j];
    den -= (prev[j] - next[j]) / prev[j];
  }
  double best = 0.0;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (!(next[i] < s.max_powers[i])) continue;
    best = std::max(best, s.max_powers[i] / prev[i] * num / den +
                              (s.max_powers[i] - prev[i]) * b_of(s, prev, i) / prev[i]);
  }
  return best;
}

double oracle_pb1(const NetworkParams& p, const PowerProfile& t) {
  const NetworkSpec s = p.spec();
  double best = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < p.max_power(i)) {
      best = std::max(best, (p.max_power(i) - t[i]) *
                                oracle::sustain_threshold(s, t.vector(), i));
    }
  }
  return best;
}

// Closed-form strong budget bound, active users first in index order.
double oracle_strong_bound(const NetworkParams& p, const PowerProfile& t) {
  const NetworkSpec s = p.spec();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < p.max_power(i)) order.push_back(i);
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] < p.max_power(i))) order.push_back(i);
  }
  double total = 0.0;
  double prod = 1.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    double interference = s.noise[i];
    for (std::size_t m = 0; m < order.size(); ++m) {
      if (m == k) continue;
      const std::size_t j = order[m];
      interference += s.gains(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                      (m < k ? t[j] : s.max_powers[j]);
    }
    total += prod * (s.max_powers[i] - t[i]) * interference / (t[i] * s.device_to_user[i]);
    prod *= s.max_powers[i] / t[i];
  }
  return total;
}

std::size_t active_count(const NetworkParams& p, const PowerProfile& t) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) n += t[i] < p.max_power(i) ? 1 : 0;
  return n;
}

// ---- 1 ----
Check criterion1() {
  Check c;
  std::mt19937_64 rng(1001);
  const Rule none = NoIntervention{};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 5;
    const NetworkParams p = oracle::random_network(rng, n);
    std::vector<double> start(n);
    for (std::size_t i = 0; i < n; ++i) start[i] = oracle::uniform(rng, 0.0, p.max_power(i));
    const Trajectory traj = run_adjustment(p, none, PowerProfile(start), 10);
    c.require(traj.converged && *traj.steps_to_converge <= 2, "no-intervention dynamics");
    c.require(is_nash(p, none, p.max_profile()), "P is Nash");
    if (n == 2) {
      const auto eqs = enumerate_equilibria(p, none, 101);
      c.require(eqs.size() == 1 && approx_equal(eqs[0], p.max_profile(), 1e-12),
                "N=2 enumeration is {P}");
    }
  }
  return c;
}

// ---- 2 ----
Check criterion2() {
  Check c;
  std::mt19937_64 rng(1002);
  DesignOptions opt;
  opt.margin = kDesignMargin;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 5;
    const NetworkParams p = oracle::random_network(rng, n);
    const PowerProfile t = oracle::random_target(rng, p, 0.1, 0.2);
    const DesignReport rep = design_sustain(p, t, opt);
    c.require(is_nash(p, rep.rule, t), "designed rule sustains");
    c.require(std::abs(rep.min_budget - oracle_pb1(p, t)) <= 1e-12 * std::max(1.0, rep.min_budget),
              "PB_1 matches oracle");
    for (std::size_t i : rep.active_users) {
      IndividualRule low = rep.individual();
      low.rates[i] = 0.99 * rep.min_rates[i];
      c.require(!is_nash(p, low, t), "1% rate reduction breaks");
    }
    if (!rep.active_users.empty()) {
      IndividualRule poor = rep.individual();
      poor.budget = 0.99 * rep.min_budget;
      c.require(!is_nash(p, poor, t), "1% budget reduction breaks");
    }
  }
  return c;
}

// ---- 3 ----
Check criterion3() {
  Check c;
  std::mt19937_64 rng(1003);
  for (int trial = 0; trial < 20; ++trial) {
    const NetworkParams p = oracle::random_network(rng, 2);
    const PowerProfile t = oracle::random_target(rng, p, 0.1, 0.1);
    const DesignReport rep = design_strong_sustain(p, t);
    const auto eqs = enumerate_equilibria(p, rep.rule, 101);
    c.require(eqs.size() == 1 && approx_equal(eqs[0], t, 1e-12), "Theorem-2 rule: unique NE");
    const double bound = strong_sustain_upper_bound(p, t);
    c.require(rel_err(bound, oracle_strong_bound(p, t)) <= 1e-12 || bound == 0.0,
              "strong bound matches oracle");
  }
  const Scenario sc = load("fig1.json");
  const auto rows = budget_contour(sc.params, 20);
  c.require(rows.size() == 400, "20x20 grid");
  for (const auto& r : rows) {
    const PowerProfile t{r.p1, r.p2};
    c.require(r.sustain == oracle_pb1(sc.params, t) ||
                  rel_err(r.sustain, oracle_pb1(sc.params, t)) <= 1e-12,
              "contour PB_1");
    c.require(r.simulated_strong >= r.sustain * (1.0 - 1e-12), "PB_1 <= simulated");
    c.require(r.simulated_strong <= r.strong_bound * (1.0 + kStrongRelTol), "simulated <= bound");
    const StrongBudgetResult s = simulated_strong_budget(sc.params, t);
    if (s.budget > 0.0) {
      const auto eqs = enumerate_equilibria(sc.params.with_capability(s.budget), s.rule, 41);
      c.require(eqs.size() == 1 && approx_equal(eqs[0], t, 1e-12),
                "simulated rule unique on the grid");
    }
  }
  return c;
}

// ---- 4 ----
Check criterion4() {
  Check c;
  std::mt19937_64 rng(1004);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 5;
    const NetworkParams p = oracle::random_network(rng, n);
    std::vector<double> x(n);
    double sum = 0.0;
    for (auto& v : x) sum += (v = oracle::uniform(rng, 0.0, 1.0));
    const double scale = oracle::uniform(rng, 0.05, 0.95) / sum;
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = p.max_power(i) * (1.0 - x[i] * scale);
    const PowerProfile target(t);
    const DesignReport rep = design_fast_converge(p, target);
    for (int s = 0; s < 50; ++s) {
      const bool upper = s % 2 == 0;
      std::vector<double> start(n);
      for (std::size_t i = 0; i < n; ++i) {
        start[i] = oracle::uniform(rng, upper ? t[i] : 0.0, p.max_power(i));
      }
      const Trajectory traj = run_adjustment(p, rep.rule, PowerProfile(start), 10);
      c.require(traj.converged, "fast rule converges");
      if (traj.converged) {
        c.require(*traj.steps_to_converge <= (upper ? 1 : 2), "step count");
      }
    }
  }
  return c;
}

// ---- 5 ----
Check criterion5() {
  Check c;
  std::mt19937_64 rng(1005);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 4;
    const NetworkParams p = oracle::random_network(rng, n);
    const PowerProfile t = oracle::random_target(rng, p, 0.05, 0.15);
    double ratio = 1.0;
    for (std::size_t i = 0; i < n; ++i) ratio = std::min(ratio, t[i] / p.max_power(i));
    if (ratio >= 1.0) continue;
    const TargetSequence seq = fixed_rd_sequence(p, t, 1.0 - ratio);
    c.require(seq.length() <= active_count(p, t) + 1, "T <= N'+1");
    c.require(seq.targets.back() == t, "ends at target");
  }
  const Scenario sc = load("five_user.json");
  const PowerProfile& t = *sc.target;
  double ratio = 1.0;
  for (std::size_t i = 0; i < t.size(); ++i) ratio = std::min(ratio, t[i] / sc.params.max_power(i));
  c.require(fixed_rd_sequence(sc.params, t, 1.0 - ratio).length() == 5, "five-user T = 5");
  return c;
}

// ---- 6 ----
Check criterion6() {
  Check c;
  const Scenario sc = load("five_user.json");
  const NetworkParams& p = sc.params;
  const PowerProfile& t = *sc.target;
  const double threshold = mrd_budget_threshold(p, t, kDefaultEps1);
  std::vector<double> budgets;
  for (double f : linspace(std::log(1.01), std::log(100.0), 20)) {
    budgets.push_back(threshold * std::exp(f));
  }
  const auto rows = budget_time(p, t, budgets);
  for (std::size_t k = 0; k < budgets.size(); ++k) {
    const TargetSequence seq = mrd_sequence(p, t, budgets[k]);
    for (std::size_t s = 1; s < seq.length(); ++s) {
      const auto& prev = seq.targets[s - 1];
      const auto& next = seq.targets[s];
      c.require(relative_distance(prev, next) <= 1.0 - kDefaultEps2 + kStepTol, "Eq. 20 distance");
      c.require(step_budget_oracle(p, prev, next) <= (budgets[k] - kDefaultEps1) * (1.0 + kStepTol),
                "step budget <= P0 - eps1");
    }
    const BudgetTimeRow& r = rows[k];
    c.require(r.measured_time >= 0, "MRD schedule converges");
    c.require(r.measured_time == r.mrd_time, "measured time equals MRD length");
    c.require(budgets[k] > bound_budget_threshold(p, t), "bound defined");
    c.require(r.measured_time <= r.time_bound, "measured <= bound");
    c.require(r.mrd_time <= r.geometric_time, "MRD <= geometric");
  }
  const BudgetTimeRow at_bound = budget_time_point(p, t, strong_sustain_upper_bound(p, t));
  c.require(at_bound.mrd_time == 5, "MRD time 5 at the strong budget");
  c.require(at_bound.geometric_time == 10, "geometric time 10 at the strong budget");
  return c;
}

// ---- 7 ----
Check criterion7() {
  Check c;
  std::mt19937_64 rng(1007);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 5;
    const NetworkParams p = oracle::random_network(rng, n);
    const PowerProfile t = oracle::random_target(rng, p, 0.1, 0.2);
    const DesignReport agg = design_aggregate(p, t);
    c.require(agg.min_budget == design_sustain(p, t).min_budget, "aggregate threshold = PB_1");
  }
  int witnesses = 0;
  while (witnesses < 20) {
    const NetworkParams p = oracle::random_network(rng, 3);
    std::vector<double> tv(3);
    for (std::size_t i = 0; i < 3; ++i) tv[i] = p.max_power(i) * oracle::uniform(rng, 0.2, 0.8);
    const PowerProfile t(tv);
    std::vector<double> alpha(3);
    std::vector<double> budget(3);
    for (std::size_t i = 0; i < 3; ++i) {
      const double th = sustain_rate_threshold(p, t, i);
      alpha[i] = th / p.user_to_device(i);
      budget[i] = (p.max_power(i) - t[i]) * th;
    }
    std::vector<std::size_t> by_alpha{0, 1, 2};
    std::vector<std::size_t> by_budget{0, 1, 2};
    std::sort(by_alpha.begin(), by_alpha.end(), [&](auto a, auto b) { return alpha[a] < alpha[b]; });
    std::sort(by_budget.begin(), by_budget.end(),
              [&](auto a, auto b) { return budget[a] < budget[b]; });
    const bool strict = alpha[by_alpha[0]] < alpha[by_alpha[1]] &&
                        alpha[by_alpha[1]] < alpha[by_alpha[2]] &&
                        budget[by_budget[0]] < budget[by_budget[1]] &&
                        budget[by_budget[1]] < budget[by_budget[2]] && by_alpha == by_budget;
    if (!strict) continue;
    ++witnesses;
    const DesignReport rep = design_aggregate(p, t);
    const auto w = aggregate_nonuniqueness_witness(p, rep.aggregate(), t, kWitnessEps);
    c.require(w.has_value(), "witness found");
    if (!w) continue;
    double residual = 0.0;
    double dist = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      residual += p.user_to_device(i) * ((*w)[i] - t[i]);
      dist += ((*w)[i] - t[i]) * ((*w)[i] - t[i]);
    }
    c.require(std::abs(residual) < kHyperplaneTol, "hyperplane residual");
    c.require(std::sqrt(dist) > 0.0 && std::sqrt(dist) < kWitnessEps, "witness distance");
    c.require(is_nash(p, rep.rule, *w), "witness is Nash");
    c.require(oracle::grid_deviation_gain(p, rep.rule, *w, 4001) <= 1e-9, "grid oracle agrees");
  }
  return c;
}

// ---- 8 ----
Check criterion8() {
  Check c;
  std::mt19937_64 rng(1008);
  oracle::RandomNetworkOptions o;
  o.cross_lo = 0.3;
  o.cross_hi = 1.0;
  o.direct_lo = 0.3;
  o.direct_hi = 1.0;
  o.device_lo = 1.0;
  o.device_hi = 2.0;
  o.noise_lo = 1.0;
  o.noise_hi = 2.0;
  o.power_lo = 1.0;
  o.power_hi = 1.5;
  o.capability = 1e3;
  o.locations = true;
  const double eps = kEstimationEps;
  const double nominal = 2.0 * 9.0 * std::log2(1.0 / eps);
  for (int trial = 0; trial < 50; ++trial) {
    const NetworkParams p = oracle::random_network(rng, 3, o);
    std::vector<double> half(3);
    for (std::size_t i = 0; i < 3; ++i) half[i] = 0.5 * p.max_power(i);
    const EstimationReport rep = estimate_parameters(p, PowerProfile(half), eps);
    for (std::size_t i = 0; i < 3; ++i) {
      const double h0 = p.device_to_user(i);
      c.require(rel_err(rep.normalized_noise[i], p.noise(i) / h0) <= kGainTolFactor * eps,
                "normalized noise");
      c.require(rel_err(rep.max_powers[i], p.max_power(i)) <= kMaxPowerTol, "max powers");
      for (std::size_t j = 0; j < 3; ++j) {
        if (j == i) continue;
        c.require(rel_err(rep.normalized_cross_gains(static_cast<Eigen::Index>(i),
                                                     static_cast<Eigen::Index>(j)),
                          p.gain(i, j) / h0) <= kGainTolFactor * eps,
                  "normalized cross gains");
      }
    }
    c.require(std::abs(rep.total_broadcasts - nominal) <= kBroadcastSlack * nominal,
              "broadcast count");

    const PowerProfile prof = oracle::random_target(rng, p, 0.0, 0.2);
    const auto readings = aggregate_readings(p, prof);
    const PowerProfile back = recover_individual_powers(rep.device_gains, readings,
                                                        p.device_noise());
    for (std::size_t i = 0; i < 3; ++i) {
      c.require(std::abs(back[i] - prof[i]) <= kPowerRecoveryTol * p.max_power(i),
                "individual powers");
    }

    const NetworkParams est = normalized_network(rep, p.capability());
    std::vector<double> t(3);
    for (std::size_t i = 0; i < 3; ++i) t[i] = oracle::uniform(rng, 0.3, 0.9) * rep.max_powers[i];
    DesignOptions opt;
    opt.margin = kEstimateRuleMarginFactor * eps;
    const DesignReport d = design_sustain(est, PowerProfile(t), opt);
    c.require(is_nash(p, d.rule, PowerProfile(t)), "estimated rule sustains on the truth");
  }
  return c;
}

// ---- 9 ----
Check criterion9() {
  Check c;
  const Scenario sc = load("fig1.json");
  const auto rows = welfare_sweep(*sc.geometry, 1, linspace(0.5, 1.5, 21), 41, 40);
  for (const auto& r : rows) {
    c.require(r.sum_rate_ratio >= kSumRateRatio, "sum-rate ratio >= 1.9");
    c.require(r.max_min_ratio >= 1.0 - 1e-12, "max-min ratio >= 1");
    const bool symmetric = std::abs(r.distance - 1.0) < 1e-12;
    const bool equal = r.max_min_ratio <= 1.0 + kMaxMinEquality;
    c.require(equal == symmetric, "max-min equality only at d = 1");
  }
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Check()>>> criteria = {
      {"no-intervention baseline", criterion1},
      {"sustain necessity and sufficiency", criterion2},
      {"strong sustainment", criterion3},
      {"fast convergence", criterion4},
      {"fixed relative distance length", criterion5},
      {"MRD schedule and time bounds", criterion6},
      {"aggregate monitoring", criterion7},
      {"estimation round trip", criterion8},
      {"welfare sweep", criterion9},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Check c;
    try {
      c = criteria[k].second();
    } catch (const std::exception& e) {
      c.ok = false;
      c.first_failure = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %zu %s (%.1fs)%s%s\n", c.ok ? "PASS" : "FAIL", k + 1, criteria[k].first, secs,
                c.ok ? "" : ": ", c.first_failure.c_str());
    std::fflush(stdout);
    failures += c.ok ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
