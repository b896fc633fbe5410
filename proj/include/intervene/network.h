#ifndef INTERVENE_NETWORK_H_
#define INTERVENE_NETWORK_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace intervene {

// Transmit powers of the N regular users. Users are indexed from 0.
class PowerProfile {
 public:
  PowerProfile() = default;
  explicit PowerProfile(std::vector<double> powers) : powers_(std::move(powers)) {}
  PowerProfile(std::initializer_list<double> powers) : powers_(powers) {}

  std::size_t size() const { return powers_.size(); }
  double operator[](std::size_t i) const { return powers_[i]; }
  double& operator[](std::size_t i) { return powers_[i]; }
  std::span<const double> values() const { return powers_; }
  const std::vector<double>& vector() const { return powers_; }

  // Copy with user `i` playing `power` instead.
  PowerProfile with(std::size_t i, double power) const {
    PowerProfile out = *this;
    out.powers_[i] = power;
    return out;
  }

  bool operator==(const PowerProfile&) const = default;

 private:
  std::vector<double> powers_;
};

// Max-norm distance.
double max_abs_diff(const PowerProfile& a, const PowerProfile& b);

// True when every coordinate agrees within `rel_tol` relative to the larger
// magnitude (with an absolute floor of rel_tol for zero coordinates).
bool approx_equal(const PowerProfile& a, const PowerProfile& b, double rel_tol);

// Raw, unvalidated description of a network. Feed it to NetworkParams.
//
// Index conventions: users are 0..N-1; the intervention device is addressed
// through the dedicated device_* vectors rather than a row/column 0.
struct NetworkSpec {
  // gains(i, j): power gain from user j's transmitter to user i's receiver.
  // The diagonal holds the direct-link gains.
  Eigen::MatrixXd gains;
  // Gain from the device transmitter to user i's receiver (h_i0).
  std::vector<double> device_to_user;
  // Gain from user i's transmitter to the device's monitoring receiver (h_0i).
  std::vector<double> user_to_device;
  std::vector<double> noise;
  std::vector<double> max_powers;
  double capability = 0.0;
  // Optional: location_gains(n, i) = h_0i^n for measurement location n.
  Eigen::MatrixXd location_gains;
  // Noise at the device receiver per measurement location (n_0^n).
  std::vector<double> device_noise;
};

// Validated ground truth of a scenario. Immutable after construction.
class NetworkParams {
 public:
  // Throws ValidationError if any model invariant fails.
  explicit NetworkParams(NetworkSpec spec);

  std::size_t size() const { return max_powers_.size(); }

  double gain(std::size_t i, std::size_t j) const { return gains_(i, j); }
  const Eigen::MatrixXd& gains() const { return gains_; }
  double device_to_user(std::size_t i) const { return device_to_user_[i]; }
  double user_to_device(std::size_t i) const { return user_to_device_[i]; }
  std::span<const double> user_to_device() const { return user_to_device_; }
  double noise(std::size_t i) const { return noise_[i]; }
  double max_power(std::size_t i) const { return max_powers_[i]; }
  PowerProfile max_profile() const { return PowerProfile(max_powers_); }
  double capability() const { return capability_; }

  bool has_locations() const { return location_gains_.rows() > 0; }
  std::size_t num_locations() const { return static_cast<std::size_t>(location_gains_.rows()); }
  const Eigen::MatrixXd& location_gains() const { return location_gains_; }
  std::span<const double> device_noise() const { return device_noise_; }

  // Same network with a different intervention capability.
  NetworkParams with_capability(double capability) const;

  NetworkSpec spec() const;

  // Sum over j != i of h_ij p_j.
  double interference(std::size_t i, const PowerProfile& profile) const;

  // Throws ValidationError unless the profile has N entries in [0, P_i].
  void check_profile(const PowerProfile& profile) const;
  void check_user(std::size_t i) const;

 private:
  Eigen::MatrixXd gains_;
  std::vector<double> device_to_user_;
  std::vector<double> user_to_device_;
  std::vector<double> noise_;
  std::vector<double> max_powers_;
  double capability_;
  Eigen::MatrixXd location_gains_;
  std::vector<double> device_noise_;
};

// SINR of `user` when the device transmits `device_power` and the users
// play `profile`. Validates the inputs.
double sinr(const NetworkParams& params, double device_power, const PowerProfile& profile,
            std::size_t user);

// Same formula without validation, for inner loops whose inputs are already
// known to be valid.
inline double sinr_unchecked(const NetworkParams& params, double device_power,
                             const PowerProfile& profile, std::size_t user) {
  const double denom = params.device_to_user(user) * device_power +
                       params.interference(user, profile) + params.noise(user);
  return params.gain(user, user) * profile[user] / denom;
}

}  // namespace intervene

#endif  // INTERVENE_NETWORK_H_
