#include "intervene/network.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "intervene/error.h"

namespace intervene {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }
bool nonnegative_finite(double x) { return std::isfinite(x) && x >= 0.0; }

}  // namespace

double max_abs_diff(const PowerProfile& a, const PowerProfile& b) {
  if (a.size() != b.size()) throw ValidationError("profile dimension mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

bool approx_equal(const PowerProfile& a, const PowerProfile& b, double rel_tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1.0});
    if (std::abs(a[i] - b[i]) > rel_tol * scale) return false;
  }
  return true;
}

NetworkParams::NetworkParams(NetworkSpec spec)
    : gains_(std::move(spec.gains)),
      device_to_user_(std::move(spec.device_to_user)),
      user_to_device_(std::move(spec.user_to_device)),
      noise_(std::move(spec.noise)),
      max_powers_(std::move(spec.max_powers)),
      capability_(spec.capability),
      location_gains_(std::move(spec.location_gains)),
      device_noise_(std::move(spec.device_noise)) {
  const std::size_t n = max_powers_.size();
  require(n > 0, "network needs at least one user");
  require(static_cast<std::size_t>(gains_.rows()) == n &&
              static_cast<std::size_t>(gains_.cols()) == n,
          "gain matrix must be N x N");
  require(device_to_user_.size() == n, "device_to_user must have N entries");
  require(user_to_device_.size() == n, "user_to_device must have N entries");
  require(noise_.size() == n, "noise must have N entries");
  require(positive_finite(capability_), "capability must be positive and finite");
  for (std::size_t i = 0; i < n; ++i) {
    const std::string tag = " (user " + std::to_string(i) + ")";
    require(positive_finite(max_powers_[i]), "max power must be positive" + tag);
    require(positive_finite(noise_[i]), "noise power must be positive" + tag);
    require(positive_finite(gains_(i, i)), "direct gain must be positive" + tag);
    require(positive_finite(device_to_user_[i]), "device-to-user gain must be positive" + tag);
    require(positive_finite(user_to_device_[i]), "user-to-device gain must be positive" + tag);
    for (std::size_t j = 0; j < n; ++j) {
      require(nonnegative_finite(gains_(i, j)), "gains must be finite and nonnegative" + tag);
    }
  }
  if (location_gains_.size() > 0) {
    require(static_cast<std::size_t>(location_gains_.cols()) == n,
            "location gains must have one column per user");
    for (Eigen::Index r = 0; r < location_gains_.rows(); ++r) {
      for (Eigen::Index c = 0; c < location_gains_.cols(); ++c) {
        require(positive_finite(location_gains_(r, c)), "location gains must be positive");
      }
    }
    if (device_noise_.empty()) device_noise_.assign(location_gains_.rows(), 0.0);
    require(device_noise_.size() == static_cast<std::size_t>(location_gains_.rows()),
            "device noise must have one entry per location");
  }
  for (double v : device_noise_) {
    require(nonnegative_finite(v), "device noise must be finite and nonnegative");
  }
}

NetworkParams NetworkParams::with_capability(double capability) const {
  NetworkSpec s = spec();
  s.capability = capability;
  return NetworkParams(std::move(s));
}

NetworkSpec NetworkParams::spec() const {
  NetworkSpec s;
  s.gains = gains_;
  s.device_to_user = device_to_user_;
  s.user_to_device = user_to_device_;
  s.noise = noise_;
  s.max_powers = max_powers_;
  s.capability = capability_;
  s.location_gains = location_gains_;
  s.device_noise = device_noise_;
  return s;
}

double NetworkParams::interference(std::size_t i, const PowerProfile& profile) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < size(); ++j) {
    if (j != i) sum += gains_(i, j) * profile[j];
  }
  return sum;
}

void NetworkParams::check_user(std::size_t i) const {
  if (i >= size()) {
    throw ValidationError("user index " + std::to_string(i) + " out of range");
  }
}

void NetworkParams::check_profile(const PowerProfile& profile) const {
  if (profile.size() != size()) throw ValidationError("profile dimension mismatch");
  for (std::size_t i = 0; i < size(); ++i) {
    const double p = profile[i];
    // Tolerate rounding at the upper edge of the box.
    if (!std::isfinite(p) || p < 0.0 || p > max_powers_[i] * (1.0 + 1e-12)) {
      throw ValidationError("power of user " + std::to_string(i) + " outside [0, P_i]");
    }
  }
}

double sinr(const NetworkParams& params, double device_power, const PowerProfile& profile,
            std::size_t user) {
  params.check_user(user);
  params.check_profile(profile);
  if (!std::isfinite(device_power) || device_power < 0.0 ||
      device_power > params.capability() * (1.0 + 1e-12)) {
    throw ValidationError("device power outside [0, P_0]");
  }
  return sinr_unchecked(params, device_power, profile, user);
}

}  // namespace intervene
