#ifndef INTERVENE_EXPERIMENTS_H_
#define INTERVENE_EXPERIMENTS_H_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "intervene/adjustment.h"
#include "intervene/design.h"
#include "intervene/network.h"
#include "intervene/rules.h"
#include "intervene/scenario.h"

namespace intervene {

// ---- Welfare sweep (moving one user's transmitter) ----

struct WelfareRow {
  double distance = 0.0;
  double ne_sum_rate = 0.0;
  double opt_sum_rate = 0.0;
  double sum_rate_ratio = 0.0;
  double ne_max_min = 0.0;
  double opt_max_min = 0.0;
  double max_min_ratio = 0.0;
};

WelfareRow welfare_point(const NetworkParams& params, double distance, int grid_points,
                         int refine_iters);

std::vector<WelfareRow> welfare_sweep(const Geometry& geometry, std::size_t moving_user,
                                      const std::vector<double>& distances, int grid_points,
                                      int refine_iters);

// ---- Strong-sustainment budget by simulation ----

struct StrongBudgetOptions {
  // Grid points per rate axis searched for a strongly sustaining rule.
  int rate_grid = 24;
  // Bisection stops when the bracket is this small relative to its top.
  double rel_tol = 1e-7;
  double margin = kDefaultMargin;
  double nash_tol = kNashTol;
};

// Equilibria of a first-order individual rule among prod_i {p*_i, P_i}.
// Best responses under such rules always lie in {p*_i, P_i}, so this is the
// full equilibrium set up to knife-edge ties.
std::vector<PowerProfile> corner_equilibria(const NetworkParams& params, const IndividualRule& rule,
                                            double tol = kNashTol);

struct StrongBudgetResult {
  double budget = 0.0;
  // A rule with that budget whose only corner equilibrium is the target.
  IndividualRule rule;
};

// Smallest budget (within the options' tolerance) for which some rate
// vector on the search grid makes the target the unique equilibrium.
StrongBudgetResult simulated_strong_budget(const NetworkParams& params, const PowerProfile& target,
                                           const StrongBudgetOptions& options = {});

// ---- Budget contour over a two-user target grid ----

struct ContourRow {
  double p1 = 0.0;
  double p2 = 0.0;
  double sustain = 0.0;
  double simulated_strong = 0.0;
  double strong_bound = 0.0;
  // NaN when the fast-convergence construction does not exist.
  double fast_bound = 0.0;
  bool fast_feasible = false;
};

// Targets p_i = P_i (k+1)/grid, k = 0..grid-1, for two-user networks.
std::vector<ContourRow> budget_contour(const NetworkParams& params, int grid,
                                       const StrongBudgetOptions& options = {});

// ---- Relative distance vs. time and budget ----

struct TradeoffRow {
  double delta = 0.0;
  int rd_steps = 0;
  double rd_budget = 0.0;
  int geometric_steps = 0;
  double geometric_budget = 0.0;
};

// Largest step budget along a sequence.
double max_step_budget(const NetworkParams& params, const TargetSequence& seq);

// Shortest geometric sequence whose per-step relative distance is <= delta.
TargetSequence geometric_for_distance(const NetworkParams& params, const PowerProfile& target,
                                      double delta);

std::vector<TradeoffRow> rd_tradeoff(const NetworkParams& params, const PowerProfile& target,
                                     const std::vector<double>& deltas);

// ---- Budget vs. convergence time ----

struct BudgetTimeRow {
  double budget = 0.0;
  int mrd_time = 0;
  int geometric_time = 0;
  // -1 when the budget is at or below bound_budget_threshold.
  int time_bound = -1;
  // Steps run_adjustment needs to reach the target along the MRD schedule
  // starting from P; -1 if it did not converge.
  int measured_time = -1;
};

BudgetTimeRow budget_time_point(const NetworkParams& params, const PowerProfile& target,
                                 double budget, double eps1 = kDefaultEps1,
                                 double eps2 = kDefaultEps2);

std::vector<BudgetTimeRow> budget_time(const NetworkParams& params, const PowerProfile& target,
                                       const std::vector<double>& budgets,
                                       double eps1 = kDefaultEps1, double eps2 = kDefaultEps2);

// ---- Output helpers ----

// Shortest round-trip text for a double; locale-independent.
std::string format_number(double x);

std::vector<double> linspace(double lo, double hi, int count);

}  // namespace intervene

#endif  // INTERVENE_EXPERIMENTS_H_
