#include "bvpc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <unsupported/Eigen/MatrixFunctions>

#include "bvpc/errors.hpp"

namespace bvpc::harness {

namespace {

constexpr double kDeg = M_PI / 180.0;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

ControllerConfig controller_config(const ScenarioConfig& cfg, bool perception) {
  ControllerConfig cc;
  cc.weights = cfg.weights;
  if (!perception) cc.weights.q_p.setZero();
  cc.bounds = cfg.bounds;
  cc.extrinsics = cfg.extrinsics;
  cc.params = cfg.params;
  return cc;
}

ClosedLoopConfig loop_config(const ScenarioConfig& cfg) {
  ClosedLoopConfig lc;
  lc.landmark = cfg.landmark;
  lc.extrinsics = cfg.extrinsics;
  lc.noise = cfg.noise;
  lc.noise.seed = cfg.seed;
  lc.sensor = cfg.sensor;
  lc.duration = cfg.duration;
  lc.control_dt = cfg.control_dt;
  lc.plant_dt = cfg.plant_dt;
  lc.record_timing = cfg.record_timing;
  return lc;
}

PlantState hover_at(const Vec3& p, double heading) {
  PlantState ps;
  ps.p_w = p;
  ps.q_wb = UnitQuaternion::from_yaw(heading);
  return ps;
}

struct Profile {
  double accel;
  double peak;
  double t_acc;
  double total;
  double length;
};

Profile make_profile(const ArcTrack& track, double c_max) {
  Profile pr;
  pr.accel = track.accel > 0.0 ? track.accel : 0.6 * c_max;
  pr.length = track.radius * std::abs(track.end_deg - track.start_deg) * kDeg;
  pr.peak = std::min(track.max_ref_speed, std::sqrt(pr.accel * pr.length));
  pr.t_acc = pr.peak / pr.accel;
  const double cruise = pr.length - pr.peak * pr.t_acc;
  pr.total = 2.0 * pr.t_acc + cruise / pr.peak;
  return pr;
}

RunRecord track_run(const ScenarioConfig& cfg, const ArcTrack& track, bool perception, std::uint64_t seed,
                    std::string name) {
  const double c_max = cfg.bounds.c_max;
  const TrackSample start = sample_track(track, cfg.landmark, c_max, 0.0);
  ClosedLoopConfig lc = loop_config(cfg);
  lc.initial = hover_at(start.p, start.heading);
  lc.noise.seed = seed;
  lc.duration = track_duration(track, c_max) + track.settle_time;
  const Landmark lm = cfg.landmark;
  const CameraExtrinsics ext = cfg.extrinsics;
  lc.reference = [track, lm, ext, c_max](double t) {
    const TrackSample s = sample_track(track, lm, c_max, t);
    return make_reference_from_waypoint(s.p, s.v, s.heading, lm, ext);
  };
  VisualPredictiveController ctl(controller_config(cfg, perception));
  RunRecord rec;
  rec.name = std::move(name);
  rec.log = run_closed_loop(lc, ctl);
  rec.metrics = compute_metrics(rec.log, cfg.sensor, cfg.bounds);
  return rec;
}

std::string speed_tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::GateReaching:
      return "gate_reaching";
    case ScenarioKind::QuarterCircle:
      return "quarter_circle";
    case ScenarioKind::FullCircle:
      return "full_circle";
    case ScenarioKind::SuccessSweep:
      return "success_sweep";
    case ScenarioKind::PredictCompare:
      return "predict_compare";
    case ScenarioKind::Hover:
      return "hover";
  }
  return "unknown";
}

ScenarioKind parse_kind(const std::string& name) {
  for (ScenarioKind k : {ScenarioKind::GateReaching, ScenarioKind::QuarterCircle, ScenarioKind::FullCircle,
                         ScenarioKind::SuccessSweep, ScenarioKind::PredictCompare, ScenarioKind::Hover}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown scenario kind '" + name + "'");
}

void ScenarioConfig::validate() const {
  if (!weights.is_valid()) throw ConfigError("weights: entries must be finite and non-negative");
  if (!bounds.is_valid()) throw ConfigError("bounds: lower bounds must not exceed upper bounds");
  if (!params.is_valid()) throw ConfigError("ocp: N, dt, max_sqp_iters, qp_tol and slack_weight must be positive");
  if (!noise.is_valid()) throw ConfigError("noise: sigmas must be non-negative");
  if (!(duration > 0.0)) throw ConfigError("duration: must be positive");
  if (!(control_dt > 0.0) || !(plant_dt > 0.0) || plant_dt > control_dt) {
    throw ConfigError("control_dt/plant_dt: need 0 < plant_dt <= control_dt");
  }
  if (!(d_star > 0.0)) throw ConfigError("reference.distance: must be positive");
  if ((sensor.s_max - sensor.s_min).minCoeff() <= 0.0) throw ConfigError("sensor: s_min must be below s_max");
  const bool tracks = kind == ScenarioKind::QuarterCircle || kind == ScenarioKind::FullCircle ||
                      kind == ScenarioKind::SuccessSweep;
  if (tracks) {
    if (!(track.max_ref_speed > 0.0)) throw ConfigError("track.max_ref_speed: must be positive");
    if (!(track.radius > 0.0)) throw ConfigError("track.radius: must be positive");
    if (track.start_deg == track.end_deg) throw ConfigError("track: start_deg equals end_deg");
    if (track.settle_time < 0.0) throw ConfigError("track.settle_time: must be non-negative");
  }
  if (kind == ScenarioKind::SuccessSweep) {
    if (sweep.trials < 1) throw ConfigError("sweep.trials: must be at least 1");
    if (sweep.speeds.empty()) throw ConfigError("sweep.speeds: must not be empty");
    for (double v : sweep.speeds) {
      if (!(v > 0.0)) throw ConfigError("sweep.speeds: speeds must be positive");
    }
  }
  if ((kind == ScenarioKind::GateReaching || kind == ScenarioKind::Hover) && initial_poses.empty()) {
    throw ConfigError("initial_poses: at least one pose is required");
  }
  if (kind == ScenarioKind::PredictCompare) {
    if (!(predict.dt > 0.0) || !(predict.horizon >= predict.dt)) {
      throw ConfigError("predict: need 0 < dt <= horizon");
    }
    if (!(predict.point.z() > kProjectionEps)) throw ConfigError("predict.point: must lie in front of the camera");
  }
}

ScenarioConfig default_config(ScenarioKind kind) {
  ScenarioConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case ScenarioKind::GateReaching:
      cfg.initial_poses = {{{-2.0, 6.0, 3.0}, -30.0},
                           {{-2.0, 3.0, 3.0}, -15.0},
                           {{-2.0, 0.0, 3.0}, 0.0},
                           {{-2.0, -3.0, 3.0}, 15.0},
                           {{-2.0, -6.0, 3.0}, 30.0}};
      cfg.duration = 10.0;
      break;
    case ScenarioKind::Hover:
      cfg.initial_poses = {{{-2.0, 0.0, 3.0}, 0.0}};
      cfg.duration = 5.0;
      break;
    case ScenarioKind::QuarterCircle:
      break;
    case ScenarioKind::SuccessSweep:
      cfg.noise.sigma_v = 0.05;
      cfg.noise.sigma_att = 0.005;
      cfg.noise.sigma_d_rel = 0.01;
      cfg.noise.sigma_px = 0.003;
      break;
    case ScenarioKind::FullCircle:
      cfg.track.center = Vec3(0.0, 0.0, 3.0);
      cfg.track.radius = 4.0;
      cfg.track.start_deg = 180.0;
      cfg.track.end_deg = 540.0;
      cfg.track.max_ref_speed = 2.0;
      cfg.track.face_landmark = false;
      cfg.track.fixed_heading_deg = 0.0;
      cfg.weights.q_s.setZero();
      cfg.weights.q_d = 0.0;
      break;
    case ScenarioKind::PredictCompare:
      cfg.duration = cfg.predict.horizon;
      break;
  }
  return cfg;
}

Vec3 target_position(const Landmark& lm, const CameraExtrinsics& ext, const HomogeneousImagePoint& s_star,
                     double d_star, double heading_deg) {
  const UnitQuaternion q_wb = UnitQuaternion::from_yaw(heading_deg * kDeg);
  const Vec3 n = s_star.homogeneous().normalized();
  const Vec3 p_cam = lm.p_w_lw - quat_rotate(q_wb * ext.q_bc, Vec3(d_star * n));
  return p_cam - quat_rotate(q_wb, ext.p_b_cb);
}

double track_duration(const ArcTrack& track, double c_max) { return make_profile(track, c_max).total; }

TrackSample sample_track(const ArcTrack& track, const Landmark& lm, double c_max, double t) {
  const Profile pr = make_profile(track, c_max);
  double s = 0.0;
  double speed = 0.0;
  if (t <= 0.0) {
    s = 0.0;
  } else if (t < pr.t_acc) {
    speed = pr.accel * t;
    s = 0.5 * pr.accel * t * t;
  } else if (t < pr.total - pr.t_acc) {
    speed = pr.peak;
    s = 0.5 * pr.peak * pr.t_acc + pr.peak * (t - pr.t_acc);
  } else if (t < pr.total) {
    const double rem = pr.total - t;
    speed = pr.accel * rem;
    s = pr.length - 0.5 * pr.accel * rem * rem;
  } else {
    s = pr.length;
  }
  const double dir = track.end_deg > track.start_deg ? 1.0 : -1.0;
  const double theta = track.start_deg * kDeg + dir * s / track.radius;
  TrackSample out;
  out.p = track.center + track.radius * Vec3(std::cos(theta), std::sin(theta), 0.0);
  out.v = dir * speed * Vec3(-std::sin(theta), std::cos(theta), 0.0);
  if (track.face_landmark) {
    const Vec3 r = lm.p_w_lw - out.p;
    out.heading = std::atan2(r.y(), r.x());
  } else {
    out.heading = track.fixed_heading_deg * kDeg;
  }
  return out;
}

bool run_succeeded(const RunLog& log) { return log.outcome == RunOutcome::Completed; }

Metrics compute_metrics(const RunLog& log, const SensorBounds& sensor, const Bounds& bounds,
                        const std::optional<Vec3>& target) {
  Metrics m;
  m.outcome = log.outcome;
  m.duration = log.end_time;
  m.ticks = static_cast<int>(log.rows.size());
  if (log.rows.empty()) return m;

  const double z0 = log.rows.front().plant.p_w.z();
  double sq = 0.0;
  double margin = std::numeric_limits<double>::infinity();
  double ms_sum = 0.0;
  int ms_count = 0;
  m.mean_solve_ms = kNaN;
  m.max_solve_ms = kNaN;
  for (const LogRow& r : log.rows) {
    sq += (r.d - r.ref.d_star) * (r.d - r.ref.d_star);
    m.max_altitude_deviation = std::max(m.max_altitude_deviation, std::abs(r.plant.p_w.z() - z0));
    if (!r.visible) continue;
    margin = std::min({margin, r.s_c.u - sensor.s_min.x(), sensor.s_max.x() - r.s_c.u, r.s_c.v - sensor.s_min.y(),
                       sensor.s_max.y() - r.s_c.v});
    m.max_abs_image = std::max({m.max_abs_image, std::abs(r.s_c.u), std::abs(r.s_c.v)});
    if (r.status == SolveStatus::Converged) {
      ++m.converged_solves;
      if (r.max_slack <= 1e-9) ++m.zero_slack_converged;
    }
    if (r.failsafe) ++m.failsafe_ticks;
    const InputVec u = r.input.to_vector();
    if ((u.array() < bounds.input_lower().array()).any() || (u.array() > bounds.input_upper().array()).any()) {
      ++m.input_violations;
    }
    if (std::isfinite(r.solve_ms)) {
      ms_sum += r.solve_ms;
      ++ms_count;
      m.max_solve_ms = ms_count == 1 ? r.solve_ms : std::max(m.max_solve_ms, r.solve_ms);
    }
  }
  if (ms_count > 0) m.mean_solve_ms = ms_sum / ms_count;
  m.rms_distance_error = std::sqrt(sq / static_cast<double>(log.rows.size()));
  m.min_border_margin = std::isfinite(margin) ? std::max(0.0, margin) : 0.0;
  if (log.outcome != RunOutcome::Completed) m.min_border_margin = 0.0;

  const LogRow& last = log.rows.back();
  m.final_position = last.plant.p_w;
  m.final_distance_error = std::abs(last.d - last.ref.d_star);
  m.final_image_error = std::max(std::abs(last.s_comp.u - last.ref.s_star.u), std::abs(last.s_comp.v - last.ref.s_star.v));
  if (!std::isfinite(m.final_image_error)) m.final_image_error = std::numeric_limits<double>::infinity();

  if (target) {
    const Vec3 e0 = (log.rows.front().plant.p_w - *target).cwiseAbs();
    for (int a = 0; a < 3; ++a) {
      const double thresh = std::max(0.1 * e0(a), 0.02);
      double settle = 0.0;
      for (const LogRow& r : log.rows) {
        if (std::abs(r.plant.p_w(a) - (*target)(a)) > thresh) settle = r.t + log.control_dt;
      }
      m.settle_time(a) = settle;
    }
  }
  return m;
}

std::vector<RunRecord> scenario_gate_reaching(const ScenarioConfig& cfg) {
  std::vector<RunRecord> out;
  ReferencePoint ref;
  ref.s_star = cfg.s_star;
  ref.d_star = cfg.d_star;
  ref.q_star = UnitQuaternion::from_yaw(cfg.heading_ref_deg * kDeg);
  const Vec3 target = target_position(cfg.landmark, cfg.extrinsics, cfg.s_star, cfg.d_star, cfg.heading_ref_deg);
  for (std::size_t i = 0; i < cfg.initial_poses.size(); ++i) {
    const InitialPose& pose = cfg.initial_poses[i];
    ClosedLoopConfig lc = loop_config(cfg);
    lc.initial = hover_at(pose.position, pose.heading_deg * kDeg);
    lc.reference = [ref](double) { return ref; };
    VisualPredictiveController ctl(controller_config(cfg, cfg.perception));
    RunRecord rec;
    rec.name = "gate_" + std::to_string(i + 1);
    rec.log = run_closed_loop(lc, ctl);
    rec.metrics = compute_metrics(rec.log, cfg.sensor, cfg.bounds, target);
    out.push_back(std::move(rec));
  }
  return out;
}

RunRecord scenario_quarter_circle(const ScenarioConfig& cfg, double max_ref_speed, bool perception,
                                  std::uint64_t seed) {
  ArcTrack track = cfg.track;
  track.max_ref_speed = max_ref_speed;
  return track_run(cfg, track, perception, seed, "quarter_circle_" + speed_tag(max_ref_speed));
}

RunRecord scenario_full_circle(const ScenarioConfig& cfg) {
  return track_run(cfg, cfg.track, cfg.perception, cfg.seed, "full_circle");
}

RunRecord scenario_hover(const ScenarioConfig& cfg) {
  const InitialPose& pose = cfg.initial_poses.front();
  ClosedLoopConfig lc = loop_config(cfg);
  lc.initial = hover_at(pose.position, pose.heading_deg * kDeg);
  const ReferencePoint ref =
      make_reference_from_waypoint(pose.position, Vec3::Zero(), pose.heading_deg * kDeg, cfg.landmark, cfg.extrinsics);
  lc.reference = [ref](double) { return ref; };
  VisualPredictiveController ctl(controller_config(cfg, cfg.perception));
  RunRecord rec;
  rec.name = "hover";
  rec.log = run_closed_loop(lc, ctl);
  rec.metrics = compute_metrics(rec.log, cfg.sensor, cfg.bounds, pose.position);
  return rec;
}

std::vector<SweepCell> scenario_success_sweep(const ScenarioConfig& cfg) {
  struct Job {
    std::size_t cell;
    std::uint64_t seed;
  };
  std::vector<SweepCell> cells;
  std::vector<Job> jobs;
  for (double v : cfg.sweep.speeds) {
    for (bool perception : {true, false}) {
      cells.push_back({v, perception, cfg.sweep.trials, 0, 0});
      for (int i = 0; i < cfg.sweep.trials; ++i) jobs.push_back({cells.size() - 1, cfg.seed + static_cast<std::uint64_t>(i)});
    }
  }
  std::vector<char> ok(jobs.size(), 0);
  std::vector<int> violations(jobs.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const SweepCell& c = cells[jobs[j].cell];
      const RunRecord r = scenario_quarter_circle(cfg, c.speed, c.perception, jobs[j].seed);
      ok[j] = run_succeeded(r.log) ? 1 : 0;
      violations[j] = r.metrics.input_violations;
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 64u));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    cells[jobs[j].cell].successes += ok[j];
    cells[jobs[j].cell].input_violations += violations[j];
  }
  return cells;
}

PredictReport predict_compare(const PredictSettings& ps) {
  const CameraTwist twist{ps.v_c, ps.omega_c};
  // Ṗ = −v − ω×P as a 4×4 linear flow; its exponential is the exact motion.
  Eigen::Matrix4d gen = Eigen::Matrix4d::Zero();
  gen.topLeftCorner<3, 3>() = -skew(ps.omega_c);
  gen.topRightCorner<3, 1>() = -ps.v_c;

  const HomogeneousImagePoint s0 = to_homogeneous(ps.point);
  BearingFeature fb{bearing_from_image(s0), ps.point.norm()};
  HomogeneousFeature fh{s0, ps.point.z()};
  PredictReport rep;
  const int steps = static_cast<int>(std::lround(ps.horizon / ps.dt));
  for (int k = 0; k <= steps; ++k) {
    const double t = k * ps.dt;
    if (k > 0) {
      fb = propagate_bearing(fb, twist, ps.dt);
      fh = propagate_homogeneous(fh, twist, ps.dt);
    }
    const Eigen::Matrix4d flow = (gen * t).exp();
    const Vec3 p = flow.topLeftCorner<3, 3>() * ps.point + flow.topRightCorner<3, 1>();
    PredictSample s;
    s.t = t;
    s.truth = to_homogeneous(p);
    s.bearing = to_homogeneous(bearing_n(fb.q_cl));
    s.homogeneous = fh.s;
    s.bearing_error = (s.bearing.vec() - s.truth.vec()).norm();
    s.homogeneous_error = (s.homogeneous.vec() - s.truth.vec()).norm();
    s.discrepancy = (s.bearing.vec() - s.homogeneous.vec()).norm();
    rep.max_bearing_error = std::max(rep.max_bearing_error, s.bearing_error);
    rep.max_homogeneous_error = std::max(rep.max_homogeneous_error, s.homogeneous_error);
    rep.max_discrepancy = std::max(rep.max_discrepancy, s.discrepancy);
    rep.samples.push_back(s);
  }
  return rep;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  ScenarioResult res;
  res.config = cfg;
  switch (cfg.kind) {
    case ScenarioKind::GateReaching:
      res.runs = scenario_gate_reaching(cfg);
      break;
    case ScenarioKind::QuarterCircle:
      res.runs.push_back(scenario_quarter_circle(cfg, cfg.track.max_ref_speed, cfg.perception, cfg.seed));
      break;
    case ScenarioKind::FullCircle:
      res.runs.push_back(scenario_full_circle(cfg));
      break;
    case ScenarioKind::Hover:
      res.runs.push_back(scenario_hover(cfg));
      break;
    case ScenarioKind::SuccessSweep:
      res.sweep = scenario_success_sweep(cfg);
      break;
    case ScenarioKind::PredictCompare:
      res.predict = predict_compare(cfg.predict);
      break;
  }
  return res;
}

}  // namespace bvpc::harness
