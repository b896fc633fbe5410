#include "intervene/equilibrium.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "intervene/error.h"

namespace intervene {
namespace {

constexpr double kGoldenIters = 80;

// Device power as a function of the deviating user's own power, with the
// other users held fixed, plus the powers where it changes form.
struct Response {
  std::function<double(double)> device_power;
  std::vector<double> breakpoints;
  bool smooth_pieces_monotone = true;
};

double bisect_increasing(const std::function<double(double)>& g, double lo, double hi,
                         double level) {
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) < level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Response individual_response(const IndividualRule& r, const PowerProfile& profile,
                             std::size_t i) {
  double c = 0.0;
  for (std::size_t j = 0; j < profile.size(); ++j) {
    if (j != i) c += r.rates[j] * std::abs(profile[j] - r.target[j]);
  }
  const double t = r.target[i];
  const double a = r.rates[i];
  const double budget = r.budget;
  Response out;
  out.device_power = [=](double x) { return clip_power(c + a * std::abs(x - t), budget); };
  out.breakpoints.push_back(t);
  if (a > 0.0 && c < budget) {
    const double reach = (budget - c) / a;
    out.breakpoints.push_back(t - reach);
    out.breakpoints.push_back(t + reach);
  }
  return out;
}

Response aggregate_response(const AggregateRule& r, const PowerProfile& profile, std::size_t i) {
  double s = 0.0;
  for (std::size_t j = 0; j < profile.size(); ++j) {
    if (j != i) s += r.weights[j] * profile[j];
  }
  const double w = r.weights[i];
  const double rate = r.rate;
  const double pa = r.target_aggregate;
  const double budget = r.budget;
  Response out;
  out.device_power = [=](double x) { return clip_power(rate * std::abs(s + w * x - pa), budget); };
  const double z = (pa - s) / w;
  out.breakpoints.push_back(z);
  if (rate > 0.0) {
    const double reach = budget / (rate * w);
    out.breakpoints.push_back(z - reach);
    out.breakpoints.push_back(z + reach);
  }
  return out;
}

Response generic_response(const GenericRule& r, const PowerProfile& profile, std::size_t i,
                          double max_power) {
  const Eigen::Index K = r.coeffs.cols();
  const Eigen::Index row = static_cast<Eigen::Index>(i);
  double c = 0.0;
  for (std::size_t j = 0; j < profile.size(); ++j) {
    if (j == i) continue;
    const double dev = std::abs(profile[j] - r.target[j]);
    double power = 1.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      power *= dev;
      c += r.coeffs(static_cast<Eigen::Index>(j), k) * power;
    }
  }
  std::vector<double> coeffs(static_cast<std::size_t>(K));
  bool higher_order = false;
  for (Eigen::Index k = 0; k < K; ++k) {
    coeffs[static_cast<std::size_t>(k)] = r.coeffs(row, k);
    if (k >= 1 && r.coeffs(row, k) > 0.0) higher_order = true;
  }
  const double t = r.target[i];
  const double budget = r.budget;
  auto own = [coeffs](double d) {
    double sum = 0.0;
    double power = 1.0;
    for (double a : coeffs) {
      power *= d;
      sum += a * power;
    }
    return sum;
  };
  Response out;
  out.device_power = [=](double x) { return clip_power(c + own(std::abs(x - t)), budget); };
  out.smooth_pieces_monotone = !higher_order;
  out.breakpoints.push_back(t);
  if (c < budget) {
    auto g = [&](double d) { return c + own(d); };
    const double right = max_power - t;
    if (right > 0.0 && g(right) > budget) {
      out.breakpoints.push_back(t + bisect_increasing(g, 0.0, right, budget));
    }
    if (t > 0.0 && g(t) > budget) {
      out.breakpoints.push_back(t - bisect_increasing(g, 0.0, t, budget));
    }
  }
  return out;
}

bool others_at_target(const PowerProfile& target, const PowerProfile& profile, std::size_t i) {
  for (std::size_t j = 0; j < profile.size(); ++j) {
    if (j == i) continue;
    const double scale = std::max(std::abs(target[j]), 1.0);
    if (std::abs(profile[j] - target[j]) > kExtremeTargetTol * scale) return false;
  }
  return true;
}

bool beats(double u, double best) { return u > best * (1.0 + kTieTol) && u > best; }

BestResponse best_response_unchecked(const NetworkParams& params, const Rule& rule,
                                     const PowerProfile& profile, std::size_t i) {
  const double max_power = params.max_power(i);
  const double direct = params.gain(i, i);
  const double h0 = params.device_to_user(i);
  const double base = params.interference(i, profile) + params.noise(i);
  auto sinr_at = [&](double x, double f) { return direct * x / (h0 * f + base); };

  if (std::holds_alternative<NoIntervention>(rule)) {
    return {max_power, sinr_at(max_power, 0.0)};
  }
  if (const auto* r = std::get_if<ExtremeRule>(&rule)) {
    const double t = r->target[i];
    if (!others_at_target(r->target, profile, i)) {
      return {max_power, sinr_at(max_power, r->budget)};
    }
    const double scale = std::max(std::abs(t), 1.0);
    if (std::abs(max_power - t) <= kExtremeTargetTol * scale) {
      return {max_power, sinr_at(max_power, 0.0)};
    }
    const double u_target = sinr_at(t, 0.0);
    const double u_max = sinr_at(max_power, r->budget);
    if (beats(u_max, u_target)) return {max_power, u_max};
    return {t, u_target};
  }

  Response resp;
  if (const auto* r = std::get_if<IndividualRule>(&rule)) {
    resp = individual_response(*r, profile, i);
  } else if (const auto* r = std::get_if<AggregateRule>(&rule)) {
    resp = aggregate_response(*r, profile, i);
  } else {
    resp = generic_response(std::get<GenericRule>(rule), profile, i, max_power);
  }

  std::vector<double> points = {0.0, max_power};
  for (double b : resp.breakpoints) {
    if (b > 0.0 && b < max_power) points.push_back(b);
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  auto u = [&](double x) { return sinr_at(x, resp.device_power(x)); };
  BestResponse best{points.front(), u(points.front())};
  for (std::size_t k = 1; k < points.size(); ++k) {
    const double v = u(points[k]);
    if (beats(v, best.sinr)) best = {points[k], v};
  }
  if (resp.smooth_pieces_monotone) return best;

  // Higher-order rules: the SINR need not be monotone between breakpoints.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    double a = points[k];
    double b = points[k + 1];
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = u(x1);
    double f2 = u(x2);
    for (int it = 0; it < kGoldenIters; ++it) {
      if (f1 >= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - inv_phi * (b - a);
        f1 = u(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + inv_phi * (b - a);
        f2 = u(x2);
      }
    }
    const double x = 0.5 * (a + b);
    const double v = u(x);
    if (beats(v, best.sinr)) {
      best = {x, v};
    } else if (!beats(best.sinr, v) && x < best.power) {
      best = {x, v};
    }
  }
  return best;
}

double current_sinr(const NetworkParams& params, const Rule& rule, const PowerProfile& profile,
                    std::size_t i) {
  return sinr_unchecked(params, evaluate(rule, profile), profile, i);
}

double deviation_gain_unchecked(const NetworkParams& params, const Rule& rule,
                                const PowerProfile& profile) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double now = current_sinr(params, rule, profile, i);
    const double br = best_response_unchecked(params, rule, profile, i).sinr;
    if (now <= 0.0) {
      if (br > 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    worst = std::max(worst, br / now - 1.0);
  }
  return worst;
}

void check_inputs(const NetworkParams& params, const Rule& rule, const PowerProfile& profile) {
  validate_rule(params, rule);
  params.check_profile(profile);
}

}  // namespace

BestResponse best_response_detail(const NetworkParams& params, const Rule& rule,
                                  const PowerProfile& profile, std::size_t user) {
  params.check_user(user);
  check_inputs(params, rule, profile);
  return best_response_unchecked(params, rule, profile, user);
}

double best_response(const NetworkParams& params, const Rule& rule, const PowerProfile& profile,
                     std::size_t user) {
  return best_response_detail(params, rule, profile, user).power;
}

PowerProfile best_response_step(const NetworkParams& params, const Rule& rule,
                                const PowerProfile& profile) {
  check_inputs(params, rule, profile);
  PowerProfile next = profile;
  for (std::size_t i = 0; i < params.size(); ++i) {
    next[i] = best_response_unchecked(params, rule, profile, i).power;
  }
  return next;
}

double max_deviation_gain(const NetworkParams& params, const Rule& rule,
                          const PowerProfile& profile) {
  check_inputs(params, rule, profile);
  return deviation_gain_unchecked(params, rule, profile);
}

bool is_nash(const NetworkParams& params, const Rule& rule, const PowerProfile& profile,
             double tol) {
  return max_deviation_gain(params, rule, profile) <= tol;
}

std::vector<PowerProfile> equilibria_among(const NetworkParams& params, const Rule& rule,
                                           const std::vector<PowerProfile>& candidates,
                                           double tol) {
  validate_rule(params, rule);
  std::vector<PowerProfile> out;
  for (const auto& p : candidates) {
    params.check_profile(p);
    if (deviation_gain_unchecked(params, rule, p) <= tol) out.push_back(p);
  }
  return out;
}

std::vector<PowerProfile> enumerate_equilibria(const NetworkParams& params, const Rule& rule,
                                               int grid_points, double tol) {
  validate_rule(params, rule);
  if (grid_points < 2) throw ValidationError("need at least 2 grid points per axis");
  const std::size_t n = params.size();
  if (std::pow(static_cast<double>(grid_points), static_cast<double>(n)) > kMaxGridProfiles) {
    throw ValidationError("equilibrium grid too large: " + std::to_string(grid_points) + "^" +
                          std::to_string(n) + " profiles");
  }
  const PowerProfile* target = rule_target(rule);
  std::vector<std::vector<double>> axes(n);
  std::vector<double> steps(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pmax = params.max_power(i);
    steps[i] = pmax / (grid_points - 1);
    for (int k = 0; k < grid_points; ++k) {
      axes[i].push_back(k == grid_points - 1 ? pmax : k * steps[i]);
    }
    if (target != nullptr) axes[i].push_back((*target)[i]);
    std::sort(axes[i].begin(), axes[i].end());
    axes[i].erase(std::unique(axes[i].begin(), axes[i].end()), axes[i].end());
  }

  struct Found {
    PowerProfile profile;
    double gain;
  };
  std::vector<Found> found;
  std::vector<std::size_t> idx(n, 0);
  PowerProfile p(std::vector<double>(n, 0.0));
  while (true) {
    for (std::size_t i = 0; i < n; ++i) p[i] = axes[i][idx[i]];
    const double gain = deviation_gain_unchecked(params, rule, p);
    if (gain <= tol) found.push_back({p, gain});
    std::size_t d = 0;
    while (d < n && ++idx[d] == axes[d].size()) idx[d++] = 0;
    if (d == n) break;
  }

  // Single-linkage clustering on the grid.
  std::vector<int> cluster(found.size(), -1);
  int clusters = 0;
  for (std::size_t a = 0; a < found.size(); ++a) {
    if (cluster[a] >= 0) continue;
    cluster[a] = clusters;
    std::vector<std::size_t> stack = {a};
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < found.size(); ++b) {
        if (cluster[b] >= 0) continue;
        bool near = true;
        for (std::size_t i = 0; i < n && near; ++i) {
          near = std::abs(found[cur].profile[i] - found[b].profile[i]) <= 1.5 * steps[i];
        }
        if (near) {
          cluster[b] = clusters;
          stack.push_back(b);
        }
      }
    }
    ++clusters;
  }
  std::vector<PowerProfile> out;
  for (int c = 0; c < clusters; ++c) {
    const Found* rep = nullptr;
    for (std::size_t a = 0; a < found.size(); ++a) {
      if (cluster[a] == c && (rep == nullptr || found[a].gain < rep->gain)) rep = &found[a];
    }
    out.push_back(rep->profile);
  }
  return out;
}

}  // namespace intervene
