#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bvpc/costs.hpp"
#include "bvpc/dynamics.hpp"
#include "bvpc/ocp.hpp"

namespace bvpc {

/// Ground-truth plant state. Position never reaches the controller.
struct PlantState {
  Vec3 p_w = Vec3::Zero();
  Vec3 v_w = Vec3::Zero();
  UnitQuaternion q_wb;
};

/// Static point feature. The gate face looks along q_wl ⊙ (-e_x); waypoints
/// must lie on that side to produce a reference.
struct Landmark {
  Vec3 p_w_lw{6.0, 0.0, 3.0};
  UnitQuaternion q_wl;

  Vec3 facing() const { return quat_rotate(q_wl, Vec3(-1.0, 0.0, 0.0)); }
};

struct NoiseModel {
  double sigma_v = 0.0;
  double sigma_att = 0.0;
  double sigma_d_rel = 0.0;
  double sigma_px = 0.0;
  std::uint64_t seed = 0;

  bool is_valid() const { return sigma_v >= 0 && sigma_att >= 0 && sigma_d_rel >= 0 && sigma_px >= 0; }
};

/// Normalized-image-plane region the physical sensor can see.
struct SensorBounds {
  Vec2 s_min{-1.0, -1.0};
  Vec2 s_max{1.0, 1.0};
};

using Rng = std::mt19937_64;

/// RK4 of ṗ = v plus the quadrotor model; attitude renormalized.
PlantState plant_step(const PlantState& ps, const ControlInput& u, double dt);

/// Landmark coordinates in the camera frame.
Vec3 landmark_in_camera(const PlantState& ps, const Landmark& lm, const CameraExtrinsics& ext);

/// Measurement (v_w, q_wb, q_cl, d) or std::nullopt when the feature is
/// behind the camera or outside the sensor bounds.
std::optional<QuadVisualState> observe(const PlantState& ps, const Landmark& lm, const CameraExtrinsics& ext,
                                       const NoiseModel& noise, Rng& rng, const SensorBounds& sensor = {});

/// Reference seen from a level camera at `wp` with yaw `heading_ref`,
/// expressed as a rotation-compensated image. Throws ReferenceInfeasible.
ReferencePoint make_reference_from_waypoint(const Vec3& wp, const Vec3& v_ref, double heading_ref, const Landmark& lm,
                                            const CameraExtrinsics& ext);

/// Time-parameterized reference. Returns the target at absolute time t.
using ReferenceFn = std::function<ReferencePoint(double t)>;

enum class RunOutcome { Completed, FeatureLost, Diverged };
const char* to_string(RunOutcome o);

struct LogRow {
  double t = 0.0;
  PlantState plant;
  /// Noise-free image of the feature and distance.
  HomogeneousImagePoint s_c;
  double d = 0.0;
  /// Noise-free rotation-compensated image and the active reference.
  HomogeneousImagePoint s_comp;
  ReferencePoint ref;
  ControlInput input;
  double solve_ms = 0.0;
  double kkt = 0.0;
  int sqp_iters = 0;
  double max_slack = 0.0;
  SolveStatus status = SolveStatus::Converged;
  bool visible = true;
  bool failsafe = false;
};

/// Uniform-step record of one closed-loop run.
struct RunLog {
  double control_dt = 0.05;
  std::vector<LogRow> rows;
  RunOutcome outcome = RunOutcome::Completed;
  double end_time = 0.0;
};

struct ClosedLoopConfig {
  PlantState initial;
  Landmark landmark;
  CameraExtrinsics extrinsics = CameraExtrinsics::forward_looking();
  NoiseModel noise;
  SensorBounds sensor;
  ReferenceFn reference;
  double duration = 5.0;
  double control_dt = 0.05;
  double plant_dt = 0.001;
  double divergence_speed = 30.0;
  /// Record wall-clock solve time; off keeps logs bit-reproducible.
  bool record_timing = false;
};

/// observe → controller_step → clamp → plant_step, with the plant substepped
/// between control ticks.
RunLog run_closed_loop(const ClosedLoopConfig& cfg, VisualPredictiveController& controller);

/// Horizon references sampled at t, t+dt, ..., t+N·dt.
std::vector<ReferencePoint> sample_references(const ReferenceFn& fn, double t, const OcpParams& params);

}  // namespace bvpc
