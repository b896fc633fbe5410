#include "intervene/estimation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "intervene/equilibrium.h"
#include "intervene/error.h"
#include "intervene/rules.h"

namespace intervene {
namespace {

std::size_t position_in_round(std::size_t location, std::size_t user, std::size_t n) {
  return (user + n - location % n) % n;
}

// Simultaneous best responses until nobody moves.
PowerProfile settle(const NetworkParams& truth, const IndividualRule& rule, PowerProfile profile,
                    int max_iterations) {
  const Rule r = rule;
  for (int it = 0; it < max_iterations; ++it) {
    PowerProfile next = best_response_step(truth, r, profile);
    if (next == profile) return next;
    profile = std::move(next);
  }
  throw EstimationError("users did not settle after a broadcast");
}

double reading_at(const NetworkParams& truth, const PowerProfile& profile, std::size_t location) {
  double sum = truth.device_noise()[location];
  for (std::size_t j = 0; j < truth.size(); ++j) {
    sum += truth.location_gains()(static_cast<Eigen::Index>(location),
                                  static_cast<Eigen::Index>(j)) *
           profile[j];
  }
  return sum;
}

void check_temp_target(const NetworkParams& params, const PowerProfile& temp_target) {
  params.check_profile(temp_target);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!(temp_target[i] > 0.0 && temp_target[i] < params.max_power(i))) {
      throw ValidationError("temporary target must lie strictly inside (0, P_i)");
    }
  }
}

std::vector<const MeasurementRound*> by_location(const std::vector<MeasurementRound>& rounds,
                                                       std::size_t n) {
  if (rounds.size() != n) {
    throw ValidationError("need one measurement round per user (" + std::to_string(n) + ")");
  }
  std::vector<const MeasurementRound*> out(n, nullptr);
  for (const auto& r : rounds) {
    if (r.location >= n || out[r.location] != nullptr) {
      throw ValidationError("measurement rounds must cover distinct locations 0..N-1");
    }
    if (r.rate_estimates.size() != n || r.high_readings.size() != n ||
        r.low_readings.size() != n) {
      throw ValidationError("measurement round has the wrong number of users");
    }
    out[r.location] = &r;
  }
  return out;
}

}  // namespace

std::vector<double> aggregate_readings(const NetworkParams& truth, const PowerProfile& profile) {
  if (!truth.has_locations()) throw ValidationError("network has no measurement locations");
  truth.check_profile(profile);
  std::vector<double> out(truth.num_locations());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = reading_at(truth, profile, n);
  return out;
}

double rate_threshold(const NetworkParams& truth, const PowerProfile& temp_target,
                      std::size_t location, std::size_t user) {
  truth.check_user(user);
  const std::size_t n = truth.size();
  const std::size_t pos = position_in_round(location, user, n);
  double sum = truth.noise(user);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == user) continue;
    const bool measured = position_in_round(location, j, n) < pos;
    sum += truth.gain(user, j) * (measured ? temp_target[j] : truth.max_power(j));
  }
  return sum / (temp_target[user] * truth.device_to_user(user));
}

MeasurementRound run_measurement_round(const NetworkParams& truth,
                                       const PowerProfile& temp_target, std::size_t location,
                                       double eps, const EstimationOptions& options) {
  if (!truth.has_locations()) throw ValidationError("network has no measurement locations");
  const std::size_t n = truth.size();
  if (location >= truth.num_locations() || location >= n) {
    throw ValidationError("measurement location out of range");
  }
  if (!(eps > 0.0)) throw ValidationError("error tolerance must be positive");
  if (!(options.initial_rate > 0.0)) throw ValidationError("initial rate must be positive");
  for (const auto* hint : {&options.known_lower, &options.known_upper}) {
    if (!hint->empty() && hint->size() != n) throw ValidationError("need one rate hint per user");
    for (double a : *hint) {
      if (!(a >= 0.0)) throw ValidationError("rate hints must be nonnegative");
    }
  }
  check_temp_target(truth, temp_target);

  MeasurementRound round;
  round.location = location;
  round.rate_estimates.assign(n, 0.0);
  round.rate_lower.assign(n, 0.0);
  round.rate_upper.assign(n, 0.0);
  round.high_readings.assign(n, 0.0);
  round.low_readings.assign(n, 0.0);

  IndividualRule rule{temp_target, std::vector<double>(n, 0.0), truth.capability()};
  PowerProfile profile = settle(truth, rule, truth.max_profile(), options.max_response_iterations);
  round.broadcast_count = 1;

  for (std::size_t index = 0; index < n; ++index) {
    const std::size_t i = (location + index) % n;
    double lower = options.known_lower.empty() ? 0.0 : options.known_lower[i];
    double upper = options.known_upper.empty() ? 0.0 : options.known_upper[i];
    if (upper > 0.0 && upper <= lower) throw ValidationError("rate hints must bracket");
    // Upward search until a reaction: doubling the rate from scratch, or
    // doubling steps above a known lower end.
    const bool hinted = lower > 0.0;
    double step = hinted ? 0.25 * lower : 2.0 * options.initial_rate;
    double alpha = lower;
    const double high = reading_at(truth, profile, location);
    double current = high;
    double low = std::numeric_limits<double>::quiet_NaN();
    int doublings = 0;
    auto dropped = [&](double r) { return r < high - options.drop_tol * high; };
    auto probe = [&](double rate) {
      alpha = rate;
      rule.rates[i] = alpha;
      profile = settle(truth, rule, profile, options.max_response_iterations);
      round.broadcast_count += 2;
      current = reading_at(truth, profile, location);
      if (dropped(current)) low = current;
    };
    while (upper == 0.0) {
      if (++doublings > options.max_doublings) {
        throw EstimationError("user " + std::to_string(i) + " never reacted to the rate");
      }
      probe(lower + step);
      if (dropped(current)) {
        upper = alpha;
      } else {
        lower = alpha;
        step = hinted ? 2.0 * step : alpha;
      }
    }
    while (upper - lower > eps) {
      probe(0.5 * (lower + upper));
      (dropped(current) ? upper : lower) = alpha;
    }
    if (!dropped(current)) {
      // Back to a reacting rate first; locking straight from P lets the
      // simultaneous responses cycle.
      probe(upper);
      if (!dropped(current)) {
        throw EstimationError("user " + std::to_string(i) + " did not react at its upper rate");
      }
    }
    round.rate_lower[i] = lower;
    round.rate_upper[i] = upper;
    round.rate_estimates[i] = 0.5 * (lower + upper);
    round.high_readings[i] = high;
    round.low_readings[i] = low;

    rule.rates[i] = options.lock_factor * upper;
    profile = settle(truth, rule, profile, options.max_response_iterations);
    round.broadcast_count += 2;
    if (std::abs(profile[i] - temp_target[i]) > 0.0) {
      throw EstimationError("user " + std::to_string(i) + " left the temporary target");
    }
  }
  return round;
}

DeviceGainEstimate recover_device_gains_and_max_powers(const std::vector<MeasurementRound>& rounds,
                                                       const PowerProfile& temp_target,
                                                       std::span<const double> device_noise) {
  const std::size_t n = temp_target.size();
  const auto r = by_location(rounds, n);
  if (device_noise.size() != n) throw ValidationError("need one device noise value per location");
  auto gap = [&](std::size_t loc, std::size_t j) {
    return r[loc]->high_readings[j] - r[loc]->low_readings[j];
  };
  for (std::size_t loc = 0; loc < n; ++loc) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!(gap(loc, j) > 0.0)) throw EstimationError("reading gap must be positive");
    }
  }
  const Eigen::Index en = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd a(en, en);
  Eigen::VectorXd rhs(en);
  for (std::size_t loc = 0; loc < n; ++loc) {
    for (std::size_t j = 0; j < n; ++j) {
      a(static_cast<Eigen::Index>(loc), static_cast<Eigen::Index>(j)) =
          gap(loc, j) / gap(0, j) * temp_target[j];
    }
    const std::size_t last = (loc + n - 1) % n;
    rhs(static_cast<Eigen::Index>(loc)) = r[loc]->low_readings[last] - device_noise[loc];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  const double cond = sv(en - 1) > 0.0 ? sv(0) / sv(en - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxConditionNumber)) {
    throw EstimationError("device gain system is ill-conditioned (condition number " +
                          std::to_string(cond) + ")");
  }
  const Eigen::VectorXd base = a.partialPivLu().solve(rhs);

  DeviceGainEstimate out;
  out.condition_number = cond;
  out.device_gains.resize(en, en);
  out.max_powers.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::Index ej = static_cast<Eigen::Index>(j);
    if (!(base(ej) > 0.0)) throw EstimationError("recovered device gain is not positive");
    for (std::size_t loc = 0; loc < n; ++loc) {
      out.device_gains(static_cast<Eigen::Index>(loc), ej) = base(ej) * gap(loc, j) / gap(0, j);
    }
    out.max_powers[j] = temp_target[j] + gap(0, j) / base(ej);
  }
  return out;
}

NormalizedParams recover_normalized_params(const std::vector<MeasurementRound>& rounds,
                                           const PowerProfile& temp_target,
                                           std::span<const double> max_powers) {
  const std::size_t n = temp_target.size();
  const auto r = by_location(rounds, n);
  if (max_powers.size() != n) throw ValidationError("need one max power per user");
  for (std::size_t j = 0; j < n; ++j) {
    if (!(max_powers[j] > temp_target[j])) {
      throw ValidationError("max power must exceed the temporary target");
    }
  }
  const Eigen::Index en = static_cast<Eigen::Index>(n);
  NormalizedParams out;
  out.cross_gains = Eigen::MatrixXd::Zero(en, en);
  // Between rounds k and k+1 only user k switches from the temporary target
  // (measured first) to P (measured last).
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t next = (k + 1) % n;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k) continue;
      const double diff = r[next]->rate_estimates[i] - r[k]->rate_estimates[i];
      out.cross_gains(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          temp_target[i] * diff / (max_powers[k] - temp_target[k]);
    }
  }
  out.noise.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t loc = 0; loc < n; ++loc) {
      double v = temp_target[i] * r[loc]->rate_estimates[i];
      const std::size_t pos = position_in_round(loc, i, n);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double s = position_in_round(loc, j, n) < pos ? temp_target[j] : max_powers[j];
        v -= out.cross_gains(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * s;
      }
      sum += v;
    }
    out.noise[i] = sum / static_cast<double>(n);
  }
  return out;
}

PowerProfile recover_individual_powers(const Eigen::MatrixXd& device_gains,
                                       std::span<const double> readings,
                                       std::span<const double> device_noise) {
  const Eigen::Index rows = device_gains.rows();
  const Eigen::Index cols = device_gains.cols();
  if (rows != cols || rows == 0) throw ValidationError("device gain matrix must be square");
  if (readings.size() != static_cast<std::size_t>(rows) ||
      device_noise.size() != static_cast<std::size_t>(rows)) {
    throw ValidationError("need one reading and one noise value per location");
  }
  Eigen::VectorXd rhs(rows);
  for (Eigen::Index k = 0; k < rows; ++k) {
    rhs(k) = readings[static_cast<std::size_t>(k)] - device_noise[static_cast<std::size_t>(k)];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(device_gains);
  const auto& sv = svd.singularValues();
  if (!(sv(rows - 1) > 0.0) || sv(0) / sv(rows - 1) > kMaxConditionNumber) {
    throw EstimationError("device gain matrix is singular or ill-conditioned");
  }
  const Eigen::VectorXd p = device_gains.partialPivLu().solve(rhs);
  const double scale = std::max(p.cwiseAbs().maxCoeff(), 1.0);
  std::vector<double> out(static_cast<std::size_t>(rows));
  for (Eigen::Index k = 0; k < rows; ++k) {
    if (p(k) < -1e-9 * scale) {
      throw EstimationError("readings imply a negative transmit power for user " +
                            std::to_string(k));
    }
    out[static_cast<std::size_t>(k)] = std::max(p(k), 0.0);
  }
  return PowerProfile(std::move(out));
}

EstimationReport estimate_parameters(const NetworkParams& truth, const PowerProfile& temp_target,
                                     double eps, const EstimationOptions& options) {
  if (!truth.has_locations() || truth.num_locations() != truth.size()) {
    throw ValidationError("estimation needs exactly N measurement locations");
  }
  EstimationReport report;
  report.tolerance = eps;
  EstimationOptions opts = options;
  for (std::size_t loc = 0; loc < truth.size(); ++loc) {
    report.rounds.push_back(run_measurement_round(truth, temp_target, loc, eps, opts));
    const MeasurementRound& last = report.rounds.back();
    opts.known_lower = last.rate_lower;
    opts.known_upper.assign(truth.size(), 0.0);
    opts.known_lower[loc] = 0.0;
    opts.known_upper[loc] = last.rate_upper[loc];
    report.total_broadcasts += report.rounds.back().broadcast_count;
  }
  const auto gains = recover_device_gains_and_max_powers(report.rounds, temp_target,
                                                         truth.device_noise());
  report.device_gains = gains.device_gains;
  report.max_powers = gains.max_powers;
  report.condition_number = gains.condition_number;
  const auto normalized = recover_normalized_params(report.rounds, temp_target, report.max_powers);
  report.normalized_cross_gains = normalized.cross_gains;
  report.normalized_noise = normalized.noise;
  return report;
}

NetworkParams normalized_network(const EstimationReport& report, double capability) {
  const std::size_t n = report.max_powers.size();
  NetworkSpec spec;
  spec.gains = report.normalized_cross_gains;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index ei = static_cast<Eigen::Index>(i);
    spec.gains(ei, ei) = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const Eigen::Index ej = static_cast<Eigen::Index>(j);
      spec.gains(ei, ej) = std::max(spec.gains(ei, ej), 0.0);
    }
  }
  spec.device_to_user.assign(n, 1.0);
  spec.user_to_device.assign(n, 1.0);
  spec.noise = report.normalized_noise;
  spec.max_powers = report.max_powers;
  spec.capability = capability;
  return NetworkParams(std::move(spec));
}

}  // namespace intervene
