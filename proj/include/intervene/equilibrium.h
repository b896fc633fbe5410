#ifndef INTERVENE_EQUILIBRIUM_H_
#define INTERVENE_EQUILIBRIUM_H_

#include <cstddef>
#include <vector>

#include "intervene/network.h"
#include "intervene/rules.h"

namespace intervene {

inline constexpr double kNashTol = 1e-9;
// SINR values within this relative gap count as ties.
inline constexpr double kTieTol = 1e-12;
inline constexpr double kMaxGridProfiles = 1e7;

struct BestResponse {
  double power = 0.0;
  double sinr = 0.0;
};

// Best response of `user` to the other users' powers in `profile` (the
// user's own entry is ignored). Ties go to the smallest maximizer.
BestResponse best_response_detail(const NetworkParams& params, const Rule& rule,
                                  const PowerProfile& profile, std::size_t user);
double best_response(const NetworkParams& params, const Rule& rule, const PowerProfile& profile,
                     std::size_t user);

// All users best-respond simultaneously to `profile`.
PowerProfile best_response_step(const NetworkParams& params, const Rule& rule,
                                 const PowerProfile& profile);

// Largest relative SINR gain any user can get by deviating unilaterally.
// Infinite when a silent user could transmit.
double max_deviation_gain(const NetworkParams& params, const Rule& rule,
                          const PowerProfile& profile);

bool is_nash(const NetworkParams& params, const Rule& rule, const PowerProfile& profile,
             double tol = kNashTol);

// The members of `candidates` that are equilibria.
std::vector<PowerProfile> equilibria_among(const NetworkParams& params, const Rule& rule,
                                           const std::vector<PowerProfile>& candidates,
                                           double tol = kNashTol);

// Brute-force search over a product grid (linspace(0, P_i, grid_points)
// plus the rule's target coordinate on each axis). Adjacent equilibria are
// merged and represented by their member with the smallest deviation gain.
// Throws ValidationError when grid_points^N exceeds kMaxGridProfiles.
std::vector<PowerProfile> enumerate_equilibria(const NetworkParams& params, const Rule& rule,
                                               int grid_points, double tol = kNashTol);

}  // namespace intervene

#endif  // INTERVENE_EQUILIBRIUM_H_
