#pragma once

// Constant-velocity Kalman smoothing of per-frame camera positions, with
// Mahalanobis gating of outlying measurements.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vloc/error.hpp"
#include "vloc/geometry.hpp"
#include "vloc/random.hpp"

namespace vloc {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

struct TrackState {
  double time = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Matrix6d covariance = Matrix6d::Identity();
  // False when the step was predict-only.
  bool updated = false;
};

struct TrackParams {
  // Acceleration noise spectral density, m^2/s^3.
  double process_noise = 1.0;
  // Per-axis measurement variance, m^2.
  double measurement_variance = 0.25;
  // Mahalanobis distance above which a measurement is ignored.
  double gate = 3.0;
  bool gating = true;
  double frame_interval = 0.1;
  // Initial velocity variance, (m/s)^2.
  double initial_velocity_variance = 100.0;
  // Consecutive gated measurements after which the track restarts at the
  // latest one; 0 never restarts.
  int reinit_after = 3;

  void Validate() const {
    Require(process_noise >= 0.0 && measurement_variance >= 0.0 && gate > 0.0 &&
                frame_interval > 0.0 && initial_velocity_variance > 0.0 && reinit_after >= 0,
            ErrorCode::kInvalidArgument, "track parameters must be positive");
  }
};

struct Measurement {
  double time = 0.0;
  std::optional<Eigen::Vector3d> position;
};

// Measurements at t0 + k * frame_interval.
inline std::vector<Measurement> UniformMeasurements(
    std::span<const std::optional<Eigen::Vector3d>> positions, double frame_interval,
    double t0 = 0.0) {
  std::vector<Measurement> out(positions.size());
  for (std::size_t k = 0; k < positions.size(); ++k) {
    out[k] = {t0 + frame_interval * static_cast<double>(k), positions[k]};
  }
  return out;
}

class KalmanTracker {
 public:
  explicit KalmanTracker(TrackParams params) : params_(params) { params_.Validate(); }

  bool initialized() const { return initialized_; }
  const TrackState& state() const { return state_; }

  void Predict(double time) {
    Require(initialized_, ErrorCode::kInvalidArgument, "tracker not initialized");
    const double dt = time - state_.time;
    Require(dt > 0.0, ErrorCode::kInvalidArgument, "timestamps must increase");
    Matrix6d f = Matrix6d::Identity();
    f.topRightCorner<3, 3>() = dt * Eigen::Matrix3d::Identity();
    // Discrete white-noise acceleration.
    const double q = params_.process_noise;
    Matrix6d qm = Matrix6d::Zero();
    qm.topLeftCorner<3, 3>().diagonal().setConstant(q * dt * dt * dt / 3.0);
    qm.topRightCorner<3, 3>().diagonal().setConstant(q * dt * dt / 2.0);
    qm.bottomLeftCorner<3, 3>().diagonal().setConstant(q * dt * dt / 2.0);
    qm.bottomRightCorner<3, 3>().diagonal().setConstant(q * dt);
    Vector6d x;
    x << state_.position, state_.velocity;
    x = f * x;
    state_.position = x.head<3>();
    state_.velocity = x.tail<3>();
    state_.covariance = f * state_.covariance * f.transpose() + qm;
    Symmetrize();
    state_.time = time;
    state_.updated = false;
  }

  // Squared Mahalanobis distance of a measurement against the current state.
  double Mahalanobis2(const Eigen::Vector3d& z) const {
    const Eigen::Vector3d r = z - state_.position;
    return r.dot(Innovation().ldlt().solve(r));
  }

  // Returns false if the measurement was gated out.
  bool Update(const Eigen::Vector3d& z) {
    Require(initialized_, ErrorCode::kInvalidArgument, "tracker not initialized");
    Require(AllFinite(z), ErrorCode::kInvalidArgument, "non-finite measurement");
    if (params_.gating && Mahalanobis2(z) > params_.gate * params_.gate) return false;
    Eigen::Matrix<double, 3, 6> h = Eigen::Matrix<double, 3, 6>::Zero();
    h.leftCols<3>().setIdentity();
    const Eigen::Matrix3d s = Innovation();
    const Eigen::Matrix<double, 6, 3> gain =
        s.ldlt().solve(h * state_.covariance).transpose();
    Vector6d x;
    x << state_.position, state_.velocity;
    x += gain * (z - state_.position);
    state_.position = x.head<3>();
    state_.velocity = x.tail<3>();
    // Joseph form.
    const Matrix6d a = Matrix6d::Identity() - gain * h;
    state_.covariance = a * state_.covariance * a.transpose() +
                        gain * (params_.measurement_variance * Eigen::Matrix3d::Identity()) *
                            gain.transpose();
    Symmetrize();
    state_.updated = true;
    return true;
  }

  void Initialize(double time, const Eigen::Vector3d& z) {
    state_ = TrackState{};
    state_.time = time;
    state_.position = z;
    state_.covariance.setZero();
    state_.covariance.topLeftCorner<3, 3>().diagonal().setConstant(
        params_.measurement_variance);
    state_.covariance.bottomRightCorner<3, 3>().diagonal().setConstant(
        params_.initial_velocity_variance);
    state_.updated = true;
    initialized_ = true;
  }

 private:
  Eigen::Matrix3d Innovation() const {
    Eigen::Matrix3d s = state_.covariance.topLeftCorner<3, 3>();
    s.diagonal().array() += params_.measurement_variance;
    // Keeps the zero-noise case solvable.
    s.diagonal().array() += 1e-15 * (1.0 + s.trace());
    return s;
  }

  void Symmetrize() {
    state_.covariance = 0.5 * (state_.covariance + state_.covariance.transpose()).eval();
  }

  TrackParams params_;
  TrackState state_;
  bool initialized_ = false;
};

// One output state per input timestamp. The track starts at the first
// available measurement; earlier frames are back-filled with that state.
inline std::vector<TrackState> SmoothTrajectory(std::span<const Measurement> measurements,
                                                const TrackParams& params) {
  Require(!measurements.empty(), ErrorCode::kEmptyInput, "no measurements");
  for (std::size_t k = 1; k < measurements.size(); ++k) {
    Require(measurements[k].time > measurements[k - 1].time, ErrorCode::kInvalidArgument,
            "timestamps must be strictly increasing");
  }
  std::size_t first = 0;
  while (first < measurements.size() && !measurements[first].position) ++first;
  Require(first < measurements.size(), ErrorCode::kEmptyInput,
          "no frame carries a position");

  KalmanTracker tracker(params);
  std::vector<TrackState> out(measurements.size());
  tracker.Initialize(measurements[first].time, *measurements[first].position);
  for (std::size_t k = 0; k <= first; ++k) {
    out[k] = tracker.state();
    out[k].time = measurements[k].time;
    out[k].updated = k == first;
  }
  int rejected = 0;
  for (std::size_t k = first + 1; k < measurements.size(); ++k) {
    tracker.Predict(measurements[k].time);
    if (measurements[k].position) {
      if (tracker.Update(*measurements[k].position)) {
        rejected = 0;
      } else if (++rejected == params.reinit_after) {
        tracker.Initialize(measurements[k].time, *measurements[k].position);
        rejected = 0;
      }
    }
    out[k] = tracker.state();
  }
  return out;
}

// Synthetic walk along a circular arc with Gaussian position noise, sparse
// gross outliers and dropped frames.
struct TrajectorySpec {
  int frames = 200;
  double frame_interval = 0.1;
  double speed = 1.4;
  double turn_radius = 30.0;
  double noise_sigma = 0.5;
  double outlier_fraction = 0.05;
  double outlier_magnitude = 20.0;
  double dropout = 0.0;

  void Validate() const {
    Require(frames >= 1 && frame_interval > 0.0 && speed >= 0.0 && turn_radius > 0.0 &&
                noise_sigma >= 0.0 && outlier_fraction >= 0.0 && outlier_fraction <= 1.0 &&
                outlier_magnitude >= 0.0 && dropout >= 0.0 && dropout < 1.0,
            ErrorCode::kInvalidArgument, "invalid trajectory spec");
  }
};

struct SimulatedTrajectory {
  std::vector<Eigen::Vector3d> truth;
  std::vector<Measurement> measurements;
};

inline SimulatedTrajectory SimulateTrajectory(const TrajectorySpec& spec,
                                              std::uint64_t seed) {
  spec.Validate();
  Rng rng = MakeRng(seed, 71);
  Gaussian g;
  SimulatedTrajectory out;
  const double w = spec.speed / spec.turn_radius;
  for (int k = 0; k < spec.frames; ++k) {
    const double t = k * spec.frame_interval;
    const Eigen::Vector3d p(spec.turn_radius * std::sin(w * t),
                            spec.turn_radius * (1.0 - std::cos(w * t)), 1.5);
    out.truth.push_back(p);
    Measurement m;
    m.time = t;
    const bool drop = Uniform01(rng) < spec.dropout;
    const bool outlier = Uniform01(rng) < spec.outlier_fraction;
    Eigen::Vector3d z = p + spec.noise_sigma * Eigen::Vector3d(g(rng), g(rng), g(rng));
    if (outlier) {
      Eigen::Vector3d dir(g(rng), g(rng), g(rng));
      z += spec.outlier_magnitude * dir.normalized();
    }
    if (!drop) m.position = z;
    out.measurements.push_back(m);
  }
  return out;
}

// Root-mean-square position error; frames without a value are skipped.
inline double Rmse(std::span<const Eigen::Vector3d> truth,
                   std::span<const std::optional<Eigen::Vector3d>> estimate) {
  Require(truth.size() == estimate.size(), ErrorCode::kInvalidArgument, "length mismatch");
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (!estimate[k]) continue;
    ss += (*estimate[k] - truth[k]).squaredNorm();
    ++n;
  }
  return n == 0 ? 0.0 : std::sqrt(ss / n);
}

}  // namespace vloc
