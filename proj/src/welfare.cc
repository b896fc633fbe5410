#include "intervene/welfare.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "intervene/error.h"

namespace intervene {
namespace {

constexpr std::uint64_t kMultiStartSeed = 0x5eed;
constexpr int kGoldenIters = 60;
constexpr int kZoomPoints[] = {33, 33, 13};

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;
};

class Search {
 public:
  Search(const NetworkParams& params, const WelfareObjective& objective)
      : params_(params), objective_(objective) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      box_.lo.push_back(kTargetFloor * params.max_power(i));
      box_.hi.push_back(params.max_power(i));
    }
  }

  double value(const PowerProfile& p) const { return welfare(params_, p, objective_); }
  const Box& box() const { return box_; }

  // Golden-section search on one coordinate inside [lo, hi]; moves only on
  // strict improvement.
  void golden(PowerProfile& p, double& best, std::size_t i, double lo, double hi) const {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    auto eval = [&](double x) {
      PowerProfile q = p;
      q[i] = x;
      return value(q);
    };
    double a = lo;
    double b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = eval(x1);
    double f2 = eval(x2);
    for (int it = 0; it < kGoldenIters; ++it) {
      if (f1 >= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - inv_phi * (b - a);
        f1 = eval(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + inv_phi * (b - a);
        f2 = eval(x2);
      }
    }
    for (double x : {0.5 * (a + b), lo, hi}) {
      const double v = eval(x);
      if (v > best) {
        best = v;
        p[i] = x;
      }
    }
  }

  // Repeated local grids of `points` per axis around p, halving the window
  // (relative to each axis) every level. Robust on the kinks of max-min.
  void zoom(PowerProfile& p, double& best, double width, int levels, int points) const {
    const std::size_t n = p.size();
    std::vector<int> idx(n);
    for (int level = 0; level < levels; ++level) {
      const PowerProfile center = p;
      std::fill(idx.begin(), idx.end(), 0);
      PowerProfile q = center;
      while (true) {
        for (std::size_t i = 0; i < n; ++i) {
          const double span = width * (box_.hi[i] - box_.lo[i]);
          const double x = center[i] + span * (2.0 * idx[i] / (points - 1) - 1.0);
          q[i] = std::clamp(x, box_.lo[i], box_.hi[i]);
        }
        const double v = value(q);
        if (v > best) {
          best = v;
          p = q;
        }
        std::size_t d = 0;
        while (d < n && ++idx[d] == points) idx[d++] = 0;
        if (d == n) break;
      }
      width *= 0.5;
    }
  }

  // Coordinate golden passes plus pairwise pattern moves, with windows
  // shrinking from `width` (relative to each axis).
  void refine(PowerProfile& p, double& best, double width, int iters) const {
    const std::size_t n = p.size();
    for (int it = 0; it < iters; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        const double span = width * (box_.hi[i] - box_.lo[i]);
        golden(p, best, i, std::max(box_.lo[i], p[i] - span), std::min(box_.hi[i], p[i] + span));
      }
      bool moved = true;
      while (moved) {
        moved = false;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) {
            for (int si : {-1, 1}) {
              for (int sj : {-1, 1}) {
                PowerProfile q = p;
                q[i] = std::clamp(p[i] + si * width * (box_.hi[i] - box_.lo[i]), box_.lo[i],
                                  box_.hi[i]);
                q[j] = std::clamp(p[j] + sj * width * (box_.hi[j] - box_.lo[j]), box_.lo[j],
                                  box_.hi[j]);
                const double v = value(q);
                if (v > best) {
                  best = v;
                  p = q;
                  moved = true;
                }
              }
            }
          }
        }
      }
      width *= 0.5;
    }
  }

 private:
  const NetworkParams& params_;
  const WelfareObjective& objective_;
  Box box_;
};

}  // namespace

std::string to_string(WelfareKind kind) {
  return kind == WelfareKind::kSumRate ? "sum_rate" : "max_min";
}

WelfareKind parse_welfare_kind(const std::string& name) {
  if (name == "sum_rate") return WelfareKind::kSumRate;
  if (name == "max_min") return WelfareKind::kMaxMin;
  throw ValidationError("unknown welfare objective '" + name + "' (use sum_rate or max_min)");
}

WelfareObjective objective_for(WelfareSpec spec) {
  if (spec.kind == WelfareKind::kSumRate) {
    return [](std::span<const double> g) {
      double sum = 0.0;
      for (double x : g) sum += std::log1p(x);
      return sum;
    };
  }
  return [](std::span<const double> g) {
    double low = std::log1p(g[0]);
    for (double x : g) low = std::min(low, std::log1p(x));
    return low;
  };
}

double welfare(const NetworkParams& params, const PowerProfile& profile, WelfareSpec spec) {
  return welfare(params, profile, objective_for(spec));
}

double welfare(const NetworkParams& params, const PowerProfile& profile,
               const WelfareObjective& objective) {
  params.check_profile(profile);
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) g[i] = sinr_unchecked(params, 0.0, profile, i);
  return objective(g);
}

TargetSolution solve_target(const NetworkParams& params, WelfareSpec spec, int grid_points,
                            int refine_iters) {
  return solve_target(params, objective_for(spec), grid_points, refine_iters);
}

TargetSolution solve_target(const NetworkParams& params, const WelfareObjective& objective,
                            int grid_points, int refine_iters) {
  if (grid_points < 2) throw ValidationError("need at least 2 grid points per axis");
  if (refine_iters < 0) throw ValidationError("refine_iters must be >= 0");
  const std::size_t n = params.size();
  Search search(params, objective);
  const Box& box = search.box();
  TargetSolution out;
  out.grid_points = grid_points;

  PowerProfile best = params.max_profile();
  double best_value = search.value(best);
  if (n <= 3) {
    out.exhaustive = true;
    std::vector<int> idx(n, 0);
    PowerProfile p = best;
    while (true) {
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = idx[i] == grid_points - 1
                   ? box.hi[i]
                   : box.lo[i] + (box.hi[i] - box.lo[i]) * idx[i] / (grid_points - 1);
      }
      const double v = search.value(p);
      if (v > best_value) {
        best_value = v;
        best = p;
      }
      std::size_t d = 0;
      while (d < n && ++idx[d] == grid_points) idx[d++] = 0;
      if (d == n) break;
    }
    out.seed_value = best_value;
    search.zoom(best, best_value, 2.0 / (grid_points - 1), refine_iters, kZoomPoints[n - 1]);
    search.refine(best, best_value, 1.0 / (grid_points - 1), refine_iters);
  } else {
    std::mt19937_64 rng(kMultiStartSeed);
    std::vector<PowerProfile> starts = {best};
    for (int s = 0; s < grid_points; ++s) {
      PowerProfile p = best;
      for (std::size_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        p[i] = box.lo[i] + u * (box.hi[i] - box.lo[i]);
      }
      starts.push_back(p);
    }
    out.seed_value = best_value;
    for (auto p : starts) {
      double v = search.value(p);
      out.seed_value = std::max(out.seed_value, v);
      search.refine(p, v, 0.5, refine_iters);
      if (v > best_value) {
        best_value = v;
        best = p;
      }
    }
  }
  out.target = best;
  out.value = best_value;
  return out;
}

}  // namespace intervene
