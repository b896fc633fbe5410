#ifndef INTERVENE_ESTIMATION_H_
#define INTERVENE_ESTIMATION_H_

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "intervene/network.h"

namespace intervene {

inline constexpr double kMaxConditionNumber = 1e8;

struct EstimationOptions {
  // First rate tried is twice this value.
  double initial_rate = 1.0;
  // Optional per-user rates known to lie below / above the threshold in
  // this round (0 = unknown). estimate_parameters carries them over from the
  // previous round: moving to the next location only raises the thresholds
  // of all users but one, whose threshold drops.
  std::vector<double> known_lower;
  std::vector<double> known_upper;
  // Relative drop of the aggregate reading that counts as a reaction.
  double drop_tol = 1e-9;
  int max_doublings = 200;
  // Cap on simultaneous best-response iterations after each broadcast.
  int max_response_iterations = 100;
  // After a user's rate is found, its rate is raised to this multiple of
  // the bracket's upper end. Others' off-target deviations raise the
  // intervention level and with it the rate the user needs to stay put.
  double lock_factor = 1e6;
};

struct MeasurementRound {
  std::size_t location = 0;
  // m_ni: midpoint of the final bracket for each user.
  std::vector<double> rate_estimates;
  std::vector<double> rate_lower;
  std::vector<double> rate_upper;
  // Aggregate reading before and after the user reacted.
  std::vector<double> high_readings;
  std::vector<double> low_readings;
  int broadcast_count = 0;
};

// Device-side aggregate receive power at every location.
std::vector<double> aggregate_readings(const NetworkParams& truth, const PowerProfile& profile);

// Minimum rate at which `user` prefers the temporary target, given that
// the users measured before it in round `location` sit at the temporary
// target and the rest at P: (I_i + n_i) / (p~_i h_i0).
double rate_threshold(const NetworkParams& truth, const PowerProfile& temp_target,
                      std::size_t location, std::size_t user);

// Simulates one measurement round at `location` against SINR-maximizing
// users. Throws EstimationError when a user never reacts.
MeasurementRound run_measurement_round(const NetworkParams& truth,
                                       const PowerProfile& temp_target, std::size_t location,
                                       double eps, const EstimationOptions& options = {});

struct DeviceGainEstimate {
  // device_gains(n, i) = h_0i^n.
  Eigen::MatrixXd device_gains;
  std::vector<double> max_powers;
  double condition_number = 0.0;
};

// Solves the N linear equations for the location-0 gains, then derives the
// other locations' gains and the maximum powers. `device_noise` is
// subtracted from the readings first.
DeviceGainEstimate recover_device_gains_and_max_powers(const std::vector<MeasurementRound>& rounds,
                                                       const PowerProfile& temp_target,
                                                       std::span<const double> device_noise);

struct NormalizedParams {
  // cross_gains(i, j) = h_ij / h_i0 for j != i; the diagonal is 0.
  Eigen::MatrixXd cross_gains;
  // n_i / h_i0.
  std::vector<double> noise;
};

NormalizedParams recover_normalized_params(const std::vector<MeasurementRound>& rounds,
                                           const PowerProfile& temp_target,
                                           std::span<const double> max_powers);

// Solves sum_j h_0j^n p_j = reading_n - n_0^n.
PowerProfile recover_individual_powers(const Eigen::MatrixXd& device_gains,
                                       std::span<const double> readings,
                                       std::span<const double> device_noise);

struct EstimationReport {
  Eigen::MatrixXd device_gains;
  std::vector<double> max_powers;
  Eigen::MatrixXd normalized_cross_gains;
  std::vector<double> normalized_noise;
  double tolerance = 0.0;
  int total_broadcasts = 0;
  double condition_number = 0.0;
  std::vector<MeasurementRound> rounds;
};

// Full protocol: one round per location, then all recoveries.
EstimationReport estimate_parameters(const NetworkParams& truth, const PowerProfile& temp_target,
                                     double eps, const EstimationOptions& options = {});

// A network equivalent to the estimate for rule design: h_i0 = 1,
// h_ij = recovered normalized gains, n_i = recovered normalized noise.
NetworkParams normalized_network(const EstimationReport& report, double capability);

}  // namespace intervene

#endif  // INTERVENE_ESTIMATION_H_
