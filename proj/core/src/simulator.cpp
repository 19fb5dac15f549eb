#include "bvpc/simulator.hpp"

#include <cmath>
#include <limits>

#include "bvpc/errors.hpp"

namespace bvpc {

namespace {

using PlantVec = Eigen::Matrix<double, 10, 1>;

PlantVec plant_rate(const PlantVec& y, const ControlInput& u) {
  PlantVec dy;
  const Vec4 q = y.segment<4>(6);
  dy.segment<3>(0) = y.segment<3>(3);
  dy.segment<3>(3) = kernel::quat_rotate<double>(q, Vec3(0.0, 0.0, u.c)) + Vec3(0.0, 0.0, -kGravity);
  dy.segment<4>(6) = kernel::quat_rate_body<double>(u.omega_b, q);
  return dy;
}

}  // namespace

const char* to_string(RunOutcome o) {
  switch (o) {
    case RunOutcome::Completed:
      return "success";
    case RunOutcome::FeatureLost:
      return "feature_lost";
    case RunOutcome::Diverged:
      return "diverged";
  }
  return "unknown";
}

PlantState plant_step(const PlantState& ps, const ControlInput& u, double dt) {
  PlantVec y;
  y << ps.p_w, ps.v_w, ps.q_wb.coeffs();
  const PlantVec k1 = plant_rate(y, u);
  const PlantVec k2 = plant_rate(y + 0.5 * dt * k1, u);
  const PlantVec k3 = plant_rate(y + 0.5 * dt * k2, u);
  const PlantVec k4 = plant_rate(y + dt * k3, u);
  y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return {y.segment<3>(0), y.segment<3>(3), UnitQuaternion(Vec4(y.segment<4>(6)))};
}

Vec3 landmark_in_camera(const PlantState& ps, const Landmark& lm, const CameraExtrinsics& ext) {
  const Vec3 r_body = quat_rotate(ps.q_wb.inverse(), Vec3(lm.p_w_lw - ps.p_w)) - ext.p_b_cb;
  return quat_rotate(ext.q_bc.inverse(), r_body);
}

std::optional<QuadVisualState> observe(const PlantState& ps, const Landmark& lm, const CameraExtrinsics& ext,
                                       const NoiseModel& noise, Rng& rng, const SensorBounds& sensor) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Fixed draw order keeps runs reproducible from the seed.
  Vec3 dv, datt;
  Vec2 dpx;
  for (int i = 0; i < 3; ++i) dv(i) = gauss(rng);
  for (int i = 0; i < 3; ++i) datt(i) = gauss(rng);
  for (int i = 0; i < 2; ++i) dpx(i) = gauss(rng);
  const double dd = gauss(rng);

  const Vec3 r = landmark_in_camera(ps, lm, ext);
  if (!(r.z() > kProjectionEps)) return std::nullopt;
  const HomogeneousImagePoint s = to_homogeneous(r);
  if (s.u < sensor.s_min.x() || s.u > sensor.s_max.x() || s.v < sensor.s_min.y() || s.v > sensor.s_max.y()) {
    return std::nullopt;
  }

  QuadVisualState m;
  m.v_w = ps.v_w + noise.sigma_v * dv;
  m.q_wb = quat_exp(noise.sigma_att * datt) * ps.q_wb;
  m.q_cl = bearing_from_image({s.u + noise.sigma_px * dpx.x(), s.v + noise.sigma_px * dpx.y()});
  m.d = std::max(r.norm() * (1.0 + noise.sigma_d_rel * dd), kDistanceFloor);
  return m;
}

ReferencePoint make_reference_from_waypoint(const Vec3& wp, const Vec3& v_ref, double heading_ref, const Landmark& lm,
                                            const CameraExtrinsics& ext) {
  if ((wp - lm.p_w_lw).dot(lm.facing()) <= 0.0) {
    throw ReferenceInfeasible("make_reference_from_waypoint: waypoint is behind the landmark plane");
  }
  const PlantState pose{wp, Vec3::Zero(), UnitQuaternion::from_yaw(heading_ref)};
  const Vec3 r = landmark_in_camera(pose, lm, ext);
  if (!(r.z() > kProjectionEps)) {
    throw ReferenceInfeasible("make_reference_from_waypoint: landmark behind the camera at the waypoint pose");
  }
  ReferencePoint ref;
  try {
    const UnitQuaternion q_cl = bearing_from_image(to_homogeneous(r));
    ref.s_star = rotation_compensated_image(pose.q_wb, q_cl, ext.q_bc);
  } catch (const DegenerateProjection&) {
    throw ReferenceInfeasible("make_reference_from_waypoint: compensated image is not projectable");
  }
  ref.d_star = r.norm();
  ref.v_star = v_ref;
  ref.q_star = pose.q_wb;
  return ref;
}

std::vector<ReferencePoint> sample_references(const ReferenceFn& fn, double t, const OcpParams& params) {
  std::vector<ReferencePoint> refs;
  refs.reserve(static_cast<std::size_t>(params.N + 1));
  for (int k = 0; k <= params.N; ++k) refs.push_back(fn(t + k * params.dt));
  return refs;
}

RunLog run_closed_loop(const ClosedLoopConfig& cfg, VisualPredictiveController& controller) {
  RunLog log;
  log.control_dt = cfg.control_dt;
  Rng rng(cfg.noise.seed);
  PlantState ps = cfg.initial;
  const int ticks = static_cast<int>(std::lround(cfg.duration / cfg.control_dt));
  const int substeps = std::max(1, static_cast<int>(std::lround(cfg.control_dt / cfg.plant_dt)));
  const double h = cfg.control_dt / substeps;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (int i = 0; i < ticks; ++i) {
    const double t = i * cfg.control_dt;
    LogRow row;
    row.t = t;
    row.plant = ps;
    row.ref = cfg.reference(t);

    const Vec3 r = landmark_in_camera(ps, cfg.landmark, cfg.extrinsics);
    row.d = r.norm();
    row.s_c = {nan, nan};
    row.s_comp = {nan, nan};
    if (r.z() > kProjectionEps) {
      row.s_c = to_homogeneous(r);
      try {
        row.s_comp = rotation_compensated_image(ps.q_wb, bearing_from_image(row.s_c), cfg.extrinsics.q_bc);
      } catch (const DegenerateProjection&) {
      }
    }

    const auto meas = observe(ps, cfg.landmark, cfg.extrinsics, cfg.noise, rng, cfg.sensor);
    if (!meas) {
      row.visible = false;
      row.input = ControlInput{0.0, Vec3::Zero()};
      log.rows.push_back(row);
      log.outcome = RunOutcome::FeatureLost;
      log.end_time = t;
      return log;
    }

    const ControllerOutput out =
        controller.step(*meas, sample_references(cfg.reference, t, controller.config().params));
    row.input = out.input;
    row.solve_ms = cfg.record_timing ? out.solve_ms : nan;
    row.kkt = out.solution.kkt;
    row.sqp_iters = out.solution.sqp_iters;
    row.max_slack = out.solution.max_slack;
    row.status = out.solution.status;
    row.failsafe = out.failsafe;
    log.rows.push_back(row);

    for (int s = 0; s < substeps; ++s) ps = plant_step(ps, out.input, h);
    if (!ps.p_w.allFinite() || !ps.v_w.allFinite() || ps.v_w.norm() > cfg.divergence_speed) {
      log.outcome = RunOutcome::Diverged;
      log.end_time = t + cfg.control_dt;
      return log;
    }
  }
  log.outcome = RunOutcome::Completed;
  log.end_time = ticks * cfg.control_dt;
  return log;
}

}  // namespace bvpc
