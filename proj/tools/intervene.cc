// intervene: experiment runner over scenario files.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "intervene/adjustment.h"
#include "intervene/design.h"
#include "intervene/equilibrium.h"
#include "intervene/error.h"
#include "intervene/estimation.h"
#include "intervene/experiments.h"
#include "intervene/scenario.h"
#include "intervene/welfare.h"
#include "json.hpp"

namespace {

using namespace intervene;
using nlohmann::ordered_json;

constexpr const char* kVersion = "1.0.0";

struct Common {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  double eps = 1e-3;
};

class Csv {
 public:
  Csv(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path), path_(path) {
    if (!out_) throw ValidationError("cannot write '" + path.string() + "'");
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
    out_ << '\n';
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

std::string num(double x) { return format_number(x); }
std::string num(int x) { return std::to_string(x); }

std::string user_col(const char* prefix, std::size_t i) { return prefix + std::to_string(i + 1); }

ordered_json profile_json(const PowerProfile& p) { return p.vector(); }

ordered_json tolerances() {
  return {{"nash", kNashTol},
          {"tie", kTieTol},
          {"convergence", kConvergenceTol},
          {"margin", kDefaultMargin},
          {"target_floor", kTargetFloor}};
}

std::filesystem::path prepare_out(const Common& c) {
  std::filesystem::path dir(c.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + c.out + "'");
  return dir;
}

void write_manifest(const std::filesystem::path& dir, const std::string& command, const Common& c,
                    const Scenario& sc, ordered_json inputs, ordered_json results,
                    const std::vector<std::string>& outputs) {
  ordered_json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["scenario"] = {{"path", c.scenario}, {"name", sc.name}, {"kind", sc.kind}};
  m["seed"] = sc.seed;
  m["eps"] = c.eps;
  m["inputs"] = std::move(inputs);
  m["tolerances"] = tolerances();
  m["results"] = std::move(results);
  m["outputs"] = outputs;
  std::ofstream out(dir / (command + ".manifest.json"));
  out << m.dump(2) << '\n';
}

PowerProfile scenario_target(const Scenario& sc, const std::vector<double>& override_target) {
  if (!override_target.empty()) {
    PowerProfile t(override_target);
    sc.params.check_profile(t);
    return t;
  }
  if (!sc.target) throw ValidationError("scenario has no target; pass --target");
  return *sc.target;
}

DesignReport run_design(const NetworkParams& params, const PowerProfile& target,
                        const std::string& mode, double margin) {
  DesignOptions opt;
  opt.margin = margin;
  if (mode == "sustain") return design_sustain(params, target, opt);
  if (mode == "strong") return design_strong_sustain(params, target, opt);
  if (mode == "fast") return design_fast_converge(params, target, opt);
  if (mode == "aggregate") return design_aggregate(params, target, opt);
  throw ValidationError("unknown design mode '" + mode + "'");
}

Rule make_rule(const NetworkParams& params, const PowerProfile& target, const std::string& kind,
               double margin) {
  if (kind == "none") return NoIntervention{};
  if (kind == "extreme") return extreme_rule(params, target).rule;
  return run_design(params, target, kind, margin).rule;
}

// ---- subcommands ----

struct WelfareArgs {
  std::size_t user = 1;
  double from = 0.5;
  double to = 1.5;
  int points = 11;
  int grid = 41;
  int refine = 40;
};

void sweep_welfare(const Common& c, const WelfareArgs& a) {
  const Scenario sc = load_scenario(c.scenario, c.seed);
  if (!sc.geometry) throw ValidationError("sweep-welfare needs a geometry scenario");
  const auto dir = prepare_out(c);
  const auto distances = linspace(a.from, a.to, a.points);
  const auto rows = welfare_sweep(*sc.geometry, a.user, distances, a.grid, a.refine);
  Csv csv(dir / "sweep-welfare.csv",
          {"distance", "ne_sum_rate", "opt_sum_rate", "sum_rate_ratio", "ne_max_min",
           "opt_max_min", "max_min_ratio"});
  for (const auto& r : rows) {
    csv.row({num(r.distance), num(r.ne_sum_rate), num(r.opt_sum_rate), num(r.sum_rate_ratio),
             num(r.ne_max_min), num(r.opt_max_min), num(r.max_min_ratio)});
  }
  write_manifest(dir, "sweep-welfare", c, sc,
                 {{"moving_user", a.user}, {"distances", distances}, {"grid_points", a.grid},
                  {"refine_iters", a.refine}},
                 {{"rows", rows.size()}}, {"sweep-welfare.csv"});
}

struct ContourArgs {
  int grid = 20;
  int rate_grid = 24;
};

void budget_contour_cmd(const Common& c, const ContourArgs& a) {
  const Scenario sc = load_scenario(c.scenario, c.seed);
  const auto dir = prepare_out(c);
  StrongBudgetOptions opt;
  opt.rate_grid = a.rate_grid;
  const auto rows = budget_contour(sc.params, a.grid, opt);
  Csv csv(dir / "budget-contour.csv",
          {"p1", "p2", "sustain_budget", "simulated_strong_budget", "strong_bound", "fast_bound",
           "fast_feasible"});
  for (const auto& r : rows) {
    csv.row({num(r.p1), num(r.p2), num(r.sustain), num(r.simulated_strong), num(r.strong_bound),
             r.fast_feasible ? num(r.fast_bound) : std::string("nan"),
             r.fast_feasible ? "1" : "0"});
  }
  write_manifest(dir, "budget-contour", c, sc,
                 {{"grid", a.grid},
                  {"rate_grid", a.rate_grid},
                  {"bisection_rel_tol", opt.rel_tol},
                  {"margin", opt.margin}},
                 {{"rows", rows.size()}}, {"budget-contour.csv"});
}

struct TradeoffArgs {
  std::vector<double> deltas;
  std::vector<double> target;
};

void rd_tradeoff_cmd(const Common& c, TradeoffArgs a) {
  const Scenario sc = load_scenario(c.scenario, c.seed);
  const PowerProfile target = scenario_target(sc, a.target);
  const auto dir = prepare_out(c);
  if (a.deltas.empty()) {
    for (int k = 1; k <= 9; ++k) a.deltas.push_back(k / 10.0);
  }
  const auto rows = rd_tradeoff(sc.params, target, a.deltas);
  Csv csv(dir / "rd-tradeoff.csv",
          {"delta", "rd_steps", "rd_budget", "geometric_steps", "geometric_budget"});
  for (const auto& r : rows) {
    csv.row({num(r.delta), num(r.rd_steps), num(r.rd_budget), num(r.geometric_steps),
             num(r.geometric_budget)});
  }
  write_manifest(dir, "rd-tradeoff", c, sc, {{"target", profile_json(target)}, {"deltas", a.deltas}},
                 {{"rows", rows.size()}}, {"rd-tradeoff.csv"});
}

struct BudgetTimeArgs {
  int points = 20;
  double min_budget = 0.0;
  double max_budget = 0.0;
  std::vector<double> target;
};

void budget_time_cmd(const Common& c, const BudgetTimeArgs& a) {
  const Scenario sc = load_scenario(c.scenario, c.seed);
  const PowerProfile target = scenario_target(sc, a.target);
  const auto dir = prepare_out(c);
  const double threshold = mrd_budget_threshold(sc.params, target, c.eps);
  double lo = a.min_budget > 0.0 ? a.min_budget : threshold * 1.01;
  double hi = a.max_budget > 0.0 ? a.max_budget : lo * 100.0;
  if (!(lo > threshold)) throw InfeasibleError("minimum budget is not above the MRD threshold");
  if (hi < lo) throw ValidationError("--max-budget must be at least --min-budget");
  std::vector<double> budgets;
  for (int k = 0; k < a.points; ++k) {
    const double f = a.points == 1 ? 0.0 : static_cast<double>(k) / (a.points - 1);
    budgets.push_back(lo * std::pow(hi / lo, f));
  }
  const auto rows = budget_time(sc.params, target, budgets, c.eps, c.eps);
  Csv csv(dir / "budget-time.csv",
          {"budget", "mrd_time", "geometric_time", "time_bound", "measured_time"});
  for (const auto& r : rows) {
    csv.row({num(r.budget), num(r.mrd_time), num(r.geometric_time),
             r.time_bound < 0 ? std::string("nan") : num(r.time_bound), num(r.measured_time)});
  }
  write_manifest(dir, "budget-time", c, sc,
                 {{"target", profile_json(target)},
                  {"budgets", budgets},
                  {"eps1", c.eps},
                  {"eps2", c.eps}},
                 {{"mrd_threshold", threshold}, {"rows", rows.size()}}, {"budget-time.csv"});
}

struct DesignArgs {
  std::string mode = "sustain";
  double margin = kDefaultMargin;
  std::vector<double> target;
};

void design_cmd(const Common& c, const DesignArgs& a) {
  const Scenario sc = load_scenario(c.scenario, c.seed);
  const PowerProfile target = scenario_target(sc, a.target);
  const auto dir = prepare_out(c);
  const DesignReport rep = run_design(sc.params, target, a.mode, a.margin);
  const std::size_t n = sc.params.size();
  Csv csv(dir / "design.csv", {"user", "target", "max_power", "min_rate", "rate"});
  for (std::size_t i = 0; i < n; ++i) {
    double rate = 0.0;
    if (const auto* ind = std::get_if<IndividualRule>(&rep.rule)) rate = ind->rates[i];
    if (const auto* agg = std::get_if<AggregateRule>(&rep.rule)) rate = agg->rate;
    csv.row({num(static_cast<int>(i + 1)), num(target[i]), num(sc.params.max_power(i)),
             num(rep.min_rates[i]), num(rate)});
  }
  ordered_json results = {{"mode", to_string(rep.mode)},
                          {"min_budget", rep.min_budget},
                          {"required_budget", rep.required_budget},
                          {"capability", sc.params.capability()}};
  if (rep.mode == DesignMode::kStrongSustain) results["budget_upper_bound"] = rep.budget_upper_bound;
  if (rep.mode == DesignMode::kAggregateSustain) results["user_budgets"] = rep.user_budgets;
  write_manifest(dir, "design", c, sc,
                 {{"mode", a.mode}, {"margin", a.margin}, {"target", profile_json(target)}},
                 results, {"design.csv"});
}

struct AdjustArgs {
  std::string rule = "sustain";
  std::string schedule;
  double delta = 0.0;
  double budget = 0.0;
  int steps = 100;
  std::vector<double> initial;
  std::vector<double> target;
  double margin = kDefaultMargin;
};

void adjust_cmd(const Common& c, const AdjustArgs& a) {
  const Scenario sc = load_scenario(c.scenario, c.seed);
  const NetworkParams& params = sc.params;
  const std::size_t n = params.size();
  const PowerProfile initial = a.initial.empty() ? params.max_profile() : PowerProfile(a.initial);
  params.check_profile(initial);
  const auto dir = prepare_out(c);
  ordered_json inputs = {{"initial", profile_json(initial)}, {"max_steps", a.steps}};
  Trajectory traj;
  if (a.schedule.empty()) {
    const PowerProfile target =
        a.rule == "none" ? params.max_profile() : scenario_target(sc, a.target);
    const Rule rule = make_rule(params, target, a.rule, a.margin);
    traj = run_adjustment(params, rule, initial, a.steps);
    inputs["rule"] = a.rule;
    inputs["target"] = profile_json(target);
  } else {
    const PowerProfile target = scenario_target(sc, a.target);
    TargetSequence seq;
    NetworkParams run_params = params;
    if (a.schedule == "fixed-rd") {
      seq = fixed_rd_sequence(params, target, a.delta);
    } else if (a.schedule == "mrd") {
      if (!(a.budget > 0.0)) throw ValidationError("--budget is required for the mrd schedule");
      seq = mrd_sequence(params, target, a.budget, c.eps, c.eps);
      run_params = params.with_capability(a.budget);
    } else if (a.schedule == "geometric") {
      if (!(a.budget > 0.0)) throw ValidationError("--budget is required for the geometric schedule");
      seq = geometric_sequence(target, params.max_profile(),
                               geometric_time(params, target, a.budget, c.eps, c.eps));
      run_params = params.with_capability(a.budget);
    } else {
      throw ValidationError("unknown schedule '" + a.schedule + "'");
    }
    traj = run_adjustment(run_params, seq, initial, a.steps, a.margin);
    inputs["schedule"] = a.schedule;
    inputs["target"] = profile_json(target);
    inputs["delta"] = a.delta;
    inputs["budget"] = a.budget;
    inputs["schedule_length"] = seq.length();
  }
  std::vector<std::string> header = {"step"};
  for (std::size_t i = 0; i < n; ++i) header.push_back(user_col("p", i));
  for (std::size_t i = 0; i < n; ++i) header.push_back(user_col("target", i));
  header.push_back("intervention_power");
  Csv csv(dir / "adjust.csv", header);
  std::vector<std::string> first = {"0"};
  for (std::size_t i = 0; i < n; ++i) first.push_back(num(initial[i]));
  for (std::size_t i = 0; i < n; ++i) first.push_back("nan");
  first.push_back("nan");
  csv.row(first);
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& s = traj.steps[t];
    std::vector<std::string> cells = {num(static_cast<int>(t + 1))};
    for (std::size_t i = 0; i < n; ++i) cells.push_back(num(s.profile[i]));
    for (std::size_t i = 0; i < n; ++i) cells.push_back(num(s.target[i]));
    cells.push_back(num(s.intervention_power));
    csv.row(cells);
  }
  ordered_json results = {{"converged", traj.converged}};
  results["steps_to_converge"] =
      traj.steps_to_converge ? ordered_json(*traj.steps_to_converge) : ordered_json(nullptr);
  write_manifest(dir, "adjust", c, sc, inputs, results, {"adjust.csv"});
}

struct EstimateArgs {
  double temp_fraction = 0.5;
  std::vector<double> temp_target;
};

void estimate_cmd(const Common& c, const EstimateArgs& a) {
  const Scenario sc = load_scenario(c.scenario, c.seed);
  const NetworkParams& truth = sc.params;
  const std::size_t n = truth.size();
  PowerProfile temp = truth.max_profile();
  if (!a.temp_target.empty()) {
    temp = PowerProfile(a.temp_target);
  } else {
    if (!(a.temp_fraction > 0.0 && a.temp_fraction < 1.0)) {
      throw ValidationError("--temp-fraction must lie in (0, 1)");
    }
    for (std::size_t i = 0; i < n; ++i) temp[i] *= a.temp_fraction;
  }
  const auto dir = prepare_out(c);
  const EstimationReport rep = estimate_parameters(truth, temp, c.eps);
  Csv csv(dir / "estimate.csv", {"quantity", "i", "j", "estimate", "truth", "relative_error"});
  auto rel = [](double est, double tru) { return std::abs(est - tru) / std::abs(tru); };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double tru = truth.gain(i, j) / truth.device_to_user(i);
      const double est = rep.normalized_cross_gains(static_cast<Eigen::Index>(i),
                                                    static_cast<Eigen::Index>(j));
      csv.row({"cross_gain", num(static_cast<int>(i + 1)), num(static_cast<int>(j + 1)), num(est),
               num(tru), num(rel(est, tru))});
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double tru = truth.noise(i) / truth.device_to_user(i);
    csv.row({"noise", num(static_cast<int>(i + 1)), "0", num(rep.normalized_noise[i]), num(tru),
             num(rel(rep.normalized_noise[i], tru))});
  }
  for (std::size_t i = 0; i < n; ++i) {
    csv.row({"max_power", num(static_cast<int>(i + 1)), "0", num(rep.max_powers[i]),
             num(truth.max_power(i)), num(rel(rep.max_powers[i], truth.max_power(i)))});
  }
  for (std::size_t k = 0; k < truth.num_locations(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(k);
      const auto col = static_cast<Eigen::Index>(i);
      const double tru = truth.location_gains()(r, col);
      const double est = rep.device_gains(r, col);
      csv.row({"device_gain", num(static_cast<int>(k + 1)), num(static_cast<int>(i + 1)),
               num(est), num(tru), num(rel(est, tru))});
    }
  }
  write_manifest(dir, "estimate", c, sc, {{"temp_target", profile_json(temp)}},
                 {{"total_broadcasts", rep.total_broadcasts},
                  {"condition_number", rep.condition_number},
                  {"tolerance", rep.tolerance}},
                 {"estimate.csv"});
}

struct EquilibriaArgs {
  std::string rule = "none";
  int grid = 101;
  double margin = kDefaultMargin;
  std::vector<double> target;
};

void equilibria_cmd(const Common& c, const EquilibriaArgs& a) {
  const Scenario sc = load_scenario(c.scenario, c.seed);
  const NetworkParams& params = sc.params;
  const PowerProfile target =
      a.rule == "none" ? params.max_profile() : scenario_target(sc, a.target);
  const Rule rule = make_rule(params, target, a.rule, a.margin);
  const auto dir = prepare_out(c);
  const auto eqs = enumerate_equilibria(params, rule, a.grid);
  std::vector<std::string> header;
  for (std::size_t i = 0; i < params.size(); ++i) header.push_back(user_col("p", i));
  header.push_back("max_deviation_gain");
  Csv csv(dir / "equilibria.csv", header);
  for (const auto& e : eqs) {
    std::vector<std::string> cells;
    for (double x : e.values()) cells.push_back(num(x));
    cells.push_back(num(max_deviation_gain(params, rule, e)));
    csv.row(cells);
  }
  write_manifest(dir, "equilibria", c, sc,
                 {{"rule", a.rule}, {"grid_points", a.grid}, {"target", profile_json(target)}},
                 {{"count", eqs.size()}}, {"equilibria.csv"});
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--scenario", c.scenario, "Scenario JSON file")->required();
  sub->add_option("--out", c.out, "Output directory")->required();
  sub->add_option("--seed", c.seed, "Seed for random scenarios (overrides the file)");
  sub->add_option("--eps", c.eps, "Tolerance (estimation precision, MRD eps1 = eps2)")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power control under intervention: design, adjustment, estimation, experiments"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;

  WelfareArgs wa;
  auto* sw = app.add_subcommand("sweep-welfare", "Welfare vs. one user's link distance");
  add_common(sw, common);
  sw->add_option("--user", wa.user, "Moving user (0-based)");
  sw->add_option("--from", wa.from, "First distance");
  sw->add_option("--to", wa.to, "Last distance");
  sw->add_option("--points", wa.points, "Number of distances")->check(CLI::PositiveNumber);
  sw->add_option("--grid", wa.grid, "Grid points per axis for the target search");
  sw->add_option("--refine", wa.refine, "Refinement passes");

  ContourArgs ca;
  auto* bc = app.add_subcommand("budget-contour", "Budget surfaces over a two-user target grid");
  add_common(bc, common);
  bc->add_option("--grid", ca.grid, "Targets per axis")->check(CLI::PositiveNumber);
  bc->add_option("--rate-grid", ca.rate_grid, "Rate grid points per user");

  TradeoffArgs ta;
  auto* rd = app.add_subcommand("rd-tradeoff", "Steps and budget vs. relative distance");
  add_common(rd, common);
  rd->add_option("--deltas", ta.deltas, "Relative distances (default 0.1..0.9)")->delimiter(',');
  rd->add_option("--target", ta.target, "Target powers (default: scenario target)")->delimiter(',');

  BudgetTimeArgs ba;
  auto* bt = app.add_subcommand("budget-time", "Convergence time vs. budget");
  add_common(bt, common);
  bt->add_option("--points", ba.points, "Number of budgets")->check(CLI::PositiveNumber);
  bt->add_option("--min-budget", ba.min_budget, "Smallest budget (default 1.01 x threshold)");
  bt->add_option("--max-budget", ba.max_budget, "Largest budget (default 100 x smallest)");
  bt->add_option("--target", ba.target, "Target powers (default: scenario target)")->delimiter(',');

  DesignArgs da;
  auto* de = app.add_subcommand("design", "Design an intervention rule");
  add_common(de, common);
  de->add_option("--mode", da.mode, "sustain | strong | fast | aggregate");
  de->add_option("--margin", da.margin, "Relative margin over thresholds");
  de->add_option("--target", da.target, "Target powers (default: scenario target)")->delimiter(',');

  AdjustArgs aa;
  auto* ad = app.add_subcommand("adjust", "Run the best-response adjustment process");
  add_common(ad, common);
  ad->add_option("--rule", aa.rule, "none | sustain | strong | fast | aggregate | extreme");
  ad->add_option("--schedule", aa.schedule, "fixed-rd | mrd | geometric (overrides --rule)");
  ad->add_option("--delta", aa.delta, "Relative distance for fixed-rd");
  ad->add_option("--budget", aa.budget, "Budget for mrd and geometric");
  ad->add_option("--steps", aa.steps, "Maximum steps");
  ad->add_option("--initial", aa.initial, "Initial powers (default P)")->delimiter(',');
  ad->add_option("--target", aa.target, "Target powers (default: scenario target)")->delimiter(',');
  ad->add_option("--margin", aa.margin, "Relative margin over thresholds");

  EstimateArgs ea;
  auto* es = app.add_subcommand("estimate", "Blind parameter estimation");
  add_common(es, common);
  es->add_option("--temp-fraction", ea.temp_fraction, "Temporary target as a fraction of P");
  es->add_option("--temp-target", ea.temp_target, "Explicit temporary target")->delimiter(',');

  EquilibriaArgs qa;
  auto* eq = app.add_subcommand("equilibria", "Enumerate equilibria on a grid");
  add_common(eq, common);
  eq->add_option("--rule", qa.rule, "none | sustain | strong | fast | aggregate | extreme");
  eq->add_option("--grid", qa.grid, "Grid points per axis");
  eq->add_option("--target", qa.target, "Target powers (default: scenario target)")->delimiter(',');
  eq->add_option("--margin", qa.margin, "Relative margin over thresholds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sw) sweep_welfare(common, wa);
    if (*bc) budget_contour_cmd(common, ca);
    if (*rd) rd_tradeoff_cmd(common, ta);
    if (*bt) budget_time_cmd(common, ba);
    if (*de) design_cmd(common, da);
    if (*ad) adjust_cmd(common, aa);
    if (*es) estimate_cmd(common, ea);
    if (*eq) equilibria_cmd(common, qa);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
