#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "intervene/adjustment.h"
#include "intervene/design.h"
#include "intervene/equilibrium.h"
#include "intervene/error.h"
#include "oracles.h"

using namespace intervene;

namespace {

double cross(const NetworkSpec& s, std::size_t i, std::size_t j) {
  return s.gains(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

// Closed-form bound on the strong budget, users taken in the given order.
double strong_bound_oracle(const NetworkParams& params, const PowerProfile& t,
                           const std::vector<std::size_t>& order) {
  const NetworkSpec s = params.spec();
  double total = 0.0;
  double prod = 1.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    double interference = s.noise[i];
    for (std::size_t m = 0; m < order.size(); ++m) {
      if (m == k) continue;
      const std::size_t j = order[m];
      interference += cross(s, i, j) * (m < k ? t[j] : s.max_powers[j]);
    }
    total += prod * (s.max_powers[i] - t[i]) * interference / (t[i] * s.device_to_user[i]);
    prod *= s.max_powers[i] / t[i];
  }
  return total;
}

double fast_budget_oracle(const NetworkParams& params, const PowerProfile& t) {
  const NetworkSpec s = params.spec();
  double d = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    d += (s.max_powers[i] - t[i]) / s.max_powers[i];
    double interference = s.noise[i];
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (j != i) interference += cross(s, i, j) * s.max_powers[j];
    }
    sum += (s.max_powers[i] - t[i]) * interference / (s.max_powers[i] * s.device_to_user[i]);
  }
  return sum / (1.0 - d);
}

std::vector<std::size_t> default_order(const NetworkParams& params, const PowerProfile& t) {
  std::vector<std::size_t> order = active_users(params, t);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] < params.max_power(i))) order.push_back(i);
  }
  return order;
}

PowerProfile fast_feasible_target(std::mt19937_64& rng, const NetworkParams& p) {
  const std::size_t n = p.size();
  std::vector<double> share(n);
  for (auto& x : share) x = oracle::uniform(rng, 0.0, 1.0);
  const double total = std::accumulate(share.begin(), share.end(), 0.0);
  const double budget = oracle::uniform(rng, 0.05, 0.95);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = p.max_power(i) * (1.0 - budget * share[i] / total);
  return PowerProfile(t);
}

}  // namespace

TEST_CASE("toy sustain design") {
  const NetworkParams p = oracle::toy_two_user(10.0);
  const DesignReport rep = design_sustain(p, PowerProfile{1.0, 1.0});
  CHECK(rep.min_rates[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(rep.min_budget == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(rep.individual().rates[0] == doctest::Approx(2.0 * (1.0 + kDefaultMargin)).epsilon(1e-15));
  CHECK(rep.mode == DesignMode::kSustain);
  CHECK(rep.active_users == std::vector<std::size_t>{0, 1});
}

TEST_CASE("target P needs nothing") {
  std::mt19937_64 rng(41);
  const NetworkParams p = oracle::random_network(rng, 3);
  const PowerProfile t = p.max_profile();
  const DesignReport rep = design_sustain(p, t);
  CHECK(rep.min_budget == 0.0);
  for (double a : rep.individual().rates) CHECK(a == 0.0);
  CHECK(rep.active_users.empty());
  CHECK(design_strong_sustain(p, t).min_budget == 0.0);
  CHECK(strong_sustain_upper_bound(p, t) == 0.0);
  CHECK(design_aggregate(p, t).min_budget == 0.0);
}

TEST_CASE("sustain thresholds match the written-out condition") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 5;
    const NetworkParams p = oracle::random_network(rng, n);
    const PowerProfile t = oracle::random_target(rng, p);
    const DesignReport rep = design_sustain(p, t);
    double pb1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(t[i] < p.max_power(i))) {
        CHECK(rep.individual().rates[i] == 0.0);
        continue;
      }
      const double th = oracle::sustain_threshold(p.spec(), t.vector(), i);
      CHECK(rep.min_rates[i] == doctest::Approx(th).epsilon(1e-13));
      pb1 = std::max(pb1, (p.max_power(i) - t[i]) * th);
    }
    CHECK(rep.min_budget == doctest::Approx(pb1).epsilon(1e-13));
  }
}

TEST_CASE("PB_1 equals the bisection-on-budget oracle") {
  const NetworkParams toy = oracle::toy_two_user(1e3);
  std::mt19937_64 rng(43);
  const NetworkParams rnd = oracle::random_network(rng, 2);
  for (const NetworkParams* p : {&toy, &rnd}) {
    for (double a : {0.2, 0.5, 0.8}) {
      for (double b : {0.3, 0.6, 1.0}) {
        const PowerProfile t{a * p->max_power(0), b * p->max_power(1)};
        const double pb1 = sustain_budget(*p, t);
        const double hi = 2.0 * pb1 + 1.0;
        CHECK(oracle::bisect_sustain_budget(*p, t, hi) ==
              doctest::Approx(pb1).epsilon(1e-6).scale(1.0));
      }
    }
  }
}

TEST_CASE("sustain necessity: 1% below a rate or the budget breaks it") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + trial % 4;
    const NetworkParams p = oracle::random_network(rng, n);
    const PowerProfile t = oracle::random_target(rng, p, 0.1, 0.0);
    const DesignReport rep = design_sustain(p, t);
    CHECK(is_nash(p, rep.rule, t));
    for (std::size_t i : rep.active_users) {
      IndividualRule low = rep.individual();
      low.rates[i] = 0.99 * rep.min_rates[i];
      CHECK_FALSE(is_nash(p, low, t));
    }
    IndividualRule poor = rep.individual();
    poor.budget = 0.99 * rep.min_budget;
    CHECK_FALSE(is_nash(p, poor, t));
  }
}

TEST_CASE("insufficient capability is infeasible") {
  const NetworkParams p = oracle::toy_two_user(1.0);
  CHECK_THROWS_AS(design_sustain(p, PowerProfile{1.0, 1.0}), InfeasibleError);
  DesignOptions opt;
  opt.check_capability = false;
  CHECK_NOTHROW(design_sustain(p, PowerProfile{1.0, 1.0}, opt));
  CHECK_THROWS_AS(design_sustain(p, PowerProfile{0.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(design_sustain(p, PowerProfile{3.0, 1.0}), ValidationError);
}

TEST_CASE("strong sustain rates satisfy the recursive condition") {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 5;
    const NetworkParams p = oracle::random_network(rng, n);
    const PowerProfile t = oracle::random_target(rng, p);
    const DesignReport rep = design_strong_sustain(p, t);
    const auto order = default_order(p, t);
    const NetworkSpec s = p.spec();
    const auto& a = rep.individual().rates;
    double induced = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::size_t i = order[k];
      if (!(t[i] < p.max_power(i))) continue;
      double later = 0.0;
      double interference = s.noise[i];
      for (std::size_t m = 0; m < order.size(); ++m) {
        if (m == k) continue;
        const std::size_t j = order[m];
        if (m > k) later += a[j] * (s.max_powers[j] - t[j]);
        interference += cross(s, i, j) * (m < k ? t[j] : s.max_powers[j]);
      }
      const double rhs = later / t[i] + interference / (t[i] * s.device_to_user[i]);
      CHECK(a[i] > rhs);
      induced = std::max(induced, s.max_powers[i] / t[i] * later +
                                      (s.max_powers[i] - t[i]) * interference /
                                          (t[i] * s.device_to_user[i]));
    }
    CHECK(rep.required_budget >= induced * (1.0 - 1e-12));
    CHECK(rep.budget_upper_bound ==
          doctest::Approx(strong_bound_oracle(p, t, order)).epsilon(1e-12));
    CHECK(rep.budget_upper_bound >= sustain_budget(p, t) * (1.0 - 1e-12));
    if (rep.active_users.size() <= 1) {
      CHECK(rep.budget_upper_bound == doctest::Approx(sustain_budget(p, t)).epsilon(1e-12));
    } else {
      CHECK(rep.budget_upper_bound > sustain_budget(p, t));
    }
  }
}

TEST_CASE("strong sustain: toy enumeration is exactly the target") {
  const NetworkParams p = oracle::toy_two_user(1e3);
  const PowerProfile t{1.0, 1.0};
  const DesignReport rep = design_strong_sustain(p, t);
  const auto eqs = enumerate_equilibria(p, rep.rule, 101);
  REQUIRE(eqs.size() == 1);
  CHECK(approx_equal(eqs[0], t, 1e-12));
}

TEST_CASE("strong sustain with a custom ordering") {
  std::mt19937_64 rng(46);
  const NetworkParams p = oracle::random_network(rng, 3);
  const PowerProfile t{0.5 * p.max_power(0), 0.4 * p.max_power(1), 0.3 * p.max_power(2)};
  DesignOptions opt;
  opt.ordering = {2, 0, 1};
  const DesignReport rep = design_strong_sustain(p, t, opt);
  CHECK(rep.budget_upper_bound ==
        doctest::Approx(strong_bound_oracle(p, t, {2, 0, 1})).epsilon(1e-12));
  CHECK(strong_sustain_upper_bound(p, t, {2, 0, 1}) == rep.budget_upper_bound);
  opt.ordering = {0, 0, 1};
  CHECK_THROWS_AS(design_strong_sustain(p, t, opt), ValidationError);
}

TEST_CASE("fast convergence budget and ordering of the bounds") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 5;
    const NetworkParams p = oracle::random_network(rng, n);
    const PowerProfile t = fast_feasible_target(rng, p);
    const double fast = fast_converge_budget(p, t);
    CHECK(fast == doctest::Approx(fast_budget_oracle(p, t)).epsilon(1e-10));
    const double bound = strong_sustain_upper_bound(p, t);
    if (active_users(p, t).size() <= 1) {
      CHECK(fast == doctest::Approx(bound).epsilon(1e-10));
    } else {
      CHECK(fast > bound);
    }
    const DesignReport rep = design_fast_converge(p, t);
    const NetworkSpec s = p.spec();
    const auto& a = rep.individual().rates;
    for (std::size_t i : rep.active_users) {
      double others = 0.0;
      double interference = s.noise[i];
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        others += a[j] * (s.max_powers[j] - t[j]);
        interference += cross(s, i, j) * s.max_powers[j];
      }
      CHECK(a[i] > others / t[i] + interference / (t[i] * s.device_to_user[i]));
    }
  }
}

TEST_CASE("fast convergence: one user reduces to the sustain thresholds") {
  std::mt19937_64 rng(48);
  const NetworkParams p = oracle::random_network(rng, 1);
  const PowerProfile t{0.5 * p.max_power(0)};
  const DesignReport fast = design_fast_converge(p, t);
  const DesignReport sus = design_sustain(p, t);
  CHECK(fast.individual().rates[0] == doctest::Approx(sus.individual().rates[0]).epsilon(1e-13));
  CHECK(fast.min_budget == doctest::Approx(sus.min_budget).epsilon(1e-13));
}

TEST_CASE("fast convergence: toy reaches the target in at most two steps") {
  const NetworkParams p = oracle::toy_two_user(1e3);
  const PowerProfile t{1.5, 1.5};
  const DesignReport rep = design_fast_converge(p, t);
  for (int a = 0; a <= 20; ++a) {
    for (int b = 0; b <= 20; ++b) {
      const PowerProfile start{0.1 * a, 0.1 * b};
      const Trajectory traj = run_adjustment(p, rep.rule, start, 10);
      REQUIRE(traj.converged);
      const bool upper = start[0] >= t[0] && start[1] >= t[1];
      CHECK(*traj.steps_to_converge <= (upper ? 1 : 2));
    }
  }
}

TEST_CASE("fast convergence precondition") {
  const NetworkParams p = oracle::toy_two_user(1e3);
  CHECK_THROWS_AS(design_fast_converge(p, PowerProfile{1.0, 1.0}), InfeasibleError);
  CHECK_THROWS_AS(fast_converge_budget(p, PowerProfile{0.5, 1.0}), InfeasibleError);
}

TEST_CASE("aggregate design") {
  const NetworkParams toy = oracle::toy_two_user(10.0);
  const DesignReport rep = design_aggregate(toy, PowerProfile{1.0, 1.0});
  CHECK(rep.aggregate().rate == doctest::Approx(2.0 * (1.0 + kDefaultMargin)).epsilon(1e-15));
  CHECK(rep.min_budget == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(rep.aggregate().target_aggregate == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(is_nash(toy, rep.rule, PowerProfile{1.0, 1.0}));

  std::mt19937_64 rng(49);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 5;
    const NetworkParams p = oracle::random_network(rng, n);
    const PowerProfile t = oracle::random_target(rng, p);
    const DesignReport agg = design_aggregate(p, t);
    CHECK(agg.min_budget == sustain_budget(p, t));
    CHECK(agg.min_budget == design_sustain(p, t).min_budget);
    CHECK(is_nash(p, agg.rule, t));
  }
}

TEST_CASE("thresholds are permutation equivariant") {
  std::mt19937_64 rng(50);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 4;
    const NetworkParams p = oracle::random_network(rng, n);
    const PowerProfile t = oracle::random_target(rng, p);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    NetworkSpec s = p.spec();
    NetworkSpec q = s;
    std::vector<double> tq(n);
    for (std::size_t a = 0; a < n; ++a) {
      const std::size_t i = perm[a];
      q.device_to_user[a] = s.device_to_user[i];
      q.user_to_device[a] = s.user_to_device[i];
      q.noise[a] = s.noise[i];
      q.max_powers[a] = s.max_powers[i];
      tq[a] = t[i];
      for (std::size_t b = 0; b < n; ++b) {
        q.gains(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            cross(s, i, perm[b]);
      }
    }
    const NetworkParams pq(q);
    const PowerProfile target_q(tq);
    CHECK(sustain_budget(pq, target_q) == doctest::Approx(sustain_budget(p, t)).epsilon(1e-13));
    CHECK(design_aggregate(pq, target_q).min_budget ==
          doctest::Approx(design_aggregate(p, t).min_budget).epsilon(1e-13));
    const auto r = design_sustain(p, t).min_rates;
    const auto rq = design_sustain(pq, target_q).min_rates;
    for (std::size_t a = 0; a < n; ++a) CHECK(rq[a] == doctest::Approx(r[perm[a]]).epsilon(1e-13));
  }
}

TEST_CASE("extreme rule predictions") {
  const PowerProfile t{1.0, 1.0};
  const double pb1 = sustain_budget(oracle::toy_two_user(10.0), t);
  SUBCASE("budget above PB_1") {
    const NetworkParams p = oracle::toy_two_user(pb1 + 1.0);
    const ExtremeRuleDesign d = extreme_rule(p, t);
    CHECK(d.predicted_equilibria.size() == 2);
    const auto eqs = enumerate_equilibria(p, d.rule, 41);
    CHECK(eqs.size() == 2);
  }
  SUBCASE("budget below PB_1") {
    const NetworkParams p = oracle::toy_two_user(pb1 / 2.0);
    const ExtremeRuleDesign d = extreme_rule(p, t);
    REQUIRE(d.predicted_equilibria.size() == 1);
    CHECK(d.predicted_equilibria[0] == p.max_profile());
    const auto eqs = enumerate_equilibria(p, d.rule, 41);
    REQUIRE(eqs.size() == 1);
    CHECK(approx_equal(eqs[0], p.max_profile(), 1e-12));
  }
  SUBCASE("target P") {
    const NetworkParams p = oracle::toy_two_user(10.0);
    const ExtremeRuleDesign d = extreme_rule(p, p.max_profile());
    REQUIRE(d.predicted_equilibria.size() == 1);
    CHECK(d.predicted_equilibria[0] == p.max_profile());
  }
}

TEST_CASE("extreme rule prediction agrees with enumeration on random pairs") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 30; ++trial) {
    NetworkParams p = oracle::random_network(rng, 2);
    const PowerProfile t = oracle::random_target(rng, p, 0.2, 0.25);
    const double pb1 = sustain_budget(p, t);
    p = p.with_capability(pb1 > 0.0 ? pb1 * oracle::uniform(rng, 0.3, 3.0) : 1.0);
    const ExtremeRuleDesign d = extreme_rule(p, t);
    const auto eqs = enumerate_equilibria(p, d.rule, 41);
    CHECK(eqs.size() == d.predicted_equilibria.size());
    for (const auto& e : d.predicted_equilibria) CHECK(is_nash(p, d.rule, e));
  }
}

TEST_CASE("aggregate non-uniqueness witness with three active users") {
  std::mt19937_64 rng(52);
  int found = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const NetworkParams p = oracle::random_network(rng, 3);
    const PowerProfile t{0.5 * p.max_power(0), 0.4 * p.max_power(1), 0.6 * p.max_power(2)};
    const DesignReport rep = design_aggregate(p, t);
    const auto w = aggregate_nonuniqueness_witness(p, rep.aggregate(), t, 1e-2);
    if (!w) continue;
    ++found;
    double residual = 0.0;
    double dist = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      residual += p.user_to_device(i) * ((*w)[i] - t[i]);
      dist += ((*w)[i] - t[i]) * ((*w)[i] - t[i]);
    }
    CHECK(std::abs(residual) < 1e-9);
    CHECK(std::sqrt(dist) < 1e-2);
    CHECK(std::sqrt(dist) > 0.0);
    CHECK(is_nash(p, rep.rule, *w));
    CHECK(oracle::grid_deviation_gain(p, rep.rule, *w, 4001) <= 1e-9);
  }
  CHECK(found > 0);
}

TEST_CASE("no witness when fewer than two users are active") {
  std::mt19937_64 rng(53);
  const NetworkParams p = oracle::random_network(rng, 3);
  const PowerProfile t{0.5 * p.max_power(0), p.max_power(1), p.max_power(2)};
  const DesignReport rep = design_aggregate(p, t);
  CHECK_FALSE(aggregate_nonuniqueness_witness(p, rep.aggregate(), t, 1e-2).has_value());
}
