#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bvpc/ocp.hpp"
#include "bvpc/simulator.hpp"

namespace bvpc::harness {

enum class ScenarioKind { GateReaching, QuarterCircle, FullCircle, SuccessSweep, PredictCompare, Hover };

const char* to_string(ScenarioKind k);
/// Throws ConfigError on an unknown name.
ScenarioKind parse_kind(const std::string& name);

struct InitialPose {
  Vec3 position{-2.0, 0.0, 3.0};
  double heading_deg = 0.0;
};

/// Horizontal arc p(θ) = center + radius·(cos θ, sin θ, 0), θ from start_deg
/// to end_deg, flown with a trapezoidal speed profile.
struct ArcTrack {
  Vec3 center{6.0, 0.0, 3.0};
  double radius = 8.0;
  double start_deg = 135.0;
  double end_deg = 225.0;
  /// Peak reference speed in m/s.
  double max_ref_speed = 3.0;
  /// Profile acceleration in m/s²; non-positive means 0.6·c_max.
  double accel = 0.0;
  /// Hold time at the final waypoint before the run ends.
  double settle_time = 1.0;
  /// Heading toward the landmark, otherwise fixed at fixed_heading_deg.
  bool face_landmark = true;
  double fixed_heading_deg = 0.0;
};

struct SweepSettings {
  std::vector<double> speeds{3.0, 5.0, 7.0, 9.0};
  int trials = 20;
};

/// Constant camera twist applied to a single point for open-loop prediction.
struct PredictSettings {
  Vec3 v_c{0.5, -0.3, 0.4};
  Vec3 omega_c{0.2, 0.3, -0.1};
  /// Feature in camera coordinates at t = 0.
  Vec3 point{0.4, -0.2, 4.0};
  double horizon = 1.0;
  double dt = 0.01;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::GateReaching;
  std::vector<InitialPose> initial_poses;
  Landmark landmark;
  CameraExtrinsics extrinsics = CameraExtrinsics::forward_looking();
  /// Fixed target for gate_reaching and hover-free references.
  HomogeneousImagePoint s_star{0.0, 0.0};
  double d_star = 2.0;
  double heading_ref_deg = 0.0;
  ArcTrack track;
  SweepSettings sweep;
  PredictSettings predict;
  bool perception = true;
  CostWeights weights;
  Bounds bounds;
  SensorBounds sensor;
  OcpParams params;
  NoiseModel noise;
  double duration = 10.0;
  double control_dt = 0.05;
  double plant_dt = 0.001;
  std::uint64_t seed = 0;
  bool record_timing = false;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Defaults for a scenario kind, including the Table I poses for gate_reaching.
ScenarioConfig default_config(ScenarioKind kind);

/// Parse JSON text; keys not present keep the kind's defaults. Unknown keys
/// are rejected. Throws ConfigError.
ScenarioConfig config_from_json(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ScenarioConfig& cfg);

struct Metrics {
  RunOutcome outcome = RunOutcome::Completed;
  double rms_distance_error = 0.0;
  double max_altitude_deviation = 0.0;
  /// Smallest distance of the true feature to the sensor box over visible ticks.
  double min_border_margin = 0.0;
  /// NaN when timing is not recorded.
  double mean_solve_ms = 0.0;
  double max_solve_ms = 0.0;
  double final_distance_error = 0.0;
  /// Inf-norm of compensated image minus reference at the last tick.
  double final_image_error = 0.0;
  double duration = 0.0;
  Vec3 final_position = Vec3::Zero();
  /// Max |u|, |v| of the true feature over visible ticks.
  double max_abs_image = 0.0;
  int ticks = 0;
  int converged_solves = 0;
  int zero_slack_converged = 0;
  int failsafe_ticks = 0;
  /// Ticks whose applied input left the Bounds box.
  int input_violations = 0;
  /// Time after which |p − p_target| per axis stays under 10% of its
  /// initial value; NaN when there is no fixed target.
  Vec3 settle_time = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
};

/// Pure function of the log; the altitude reference is the initial height.
Metrics compute_metrics(const RunLog& log, const SensorBounds& sensor, const Bounds& bounds,
                        const std::optional<Vec3>& target_position = std::nullopt);

struct RunRecord {
  std::string name;
  RunLog log;
  Metrics metrics;
};

struct SweepCell {
  double speed = 0.0;
  bool perception = true;
  int trials = 0;
  int successes = 0;
  /// Ticks, summed over trials, whose applied input left the Bounds box.
  int input_violations = 0;
  double rate() const { return trials > 0 ? static_cast<double>(successes) / trials : 0.0; }
};

struct PredictSample {
  double t = 0.0;
  HomogeneousImagePoint truth;
  HomogeneousImagePoint bearing;
  HomogeneousImagePoint homogeneous;
  double bearing_error = 0.0;
  double homogeneous_error = 0.0;
  double discrepancy = 0.0;
};

struct PredictReport {
  std::vector<PredictSample> samples;
  double max_bearing_error = 0.0;
  double max_homogeneous_error = 0.0;
  double max_discrepancy = 0.0;
};

struct ScenarioResult {
  ScenarioConfig config;
  std::vector<RunRecord> runs;
  std::vector<SweepCell> sweep;
  std::optional<PredictReport> predict;
};

/// Body position at which a camera with yaw heading_deg sees the landmark
/// at s_star and distance d_star.
Vec3 target_position(const Landmark& lm, const CameraExtrinsics& ext, const HomogeneousImagePoint& s_star,
                     double d_star, double heading_deg);

/// Position, velocity and heading along the arc at time t.
struct TrackSample {
  Vec3 p;
  Vec3 v;
  double heading = 0.0;
};
TrackSample sample_track(const ArcTrack& track, const Landmark& lm, double c_max, double t);
double track_duration(const ArcTrack& track, double c_max);

std::vector<RunRecord> scenario_gate_reaching(const ScenarioConfig& cfg);
RunRecord scenario_quarter_circle(const ScenarioConfig& cfg, double max_ref_speed, bool perception,
                                  std::uint64_t seed);
RunRecord scenario_full_circle(const ScenarioConfig& cfg);
RunRecord scenario_hover(const ScenarioConfig& cfg);
/// Trials run in parallel; trial i of every cell uses seed cfg.seed + i.
std::vector<SweepCell> scenario_success_sweep(const ScenarioConfig& cfg);
PredictReport predict_compare(const PredictSettings& settings);

/// Success predicate: the run completed without FeatureLost or divergence.
bool run_succeeded(const RunLog& log);

ScenarioResult run_scenario(const ScenarioConfig& cfg);

/// CSV per run, summary.json and (for closed-loop runs) xy.svg,
/// altitude.svg and image.svg. Throws std::runtime_error with the path.
std::vector<std::filesystem::path> emit_outputs(const ScenarioResult& result, const std::filesystem::path& outdir);

std::string summary_json(const ScenarioResult& result);
std::string run_csv(const RunLog& log);

inline constexpr int kSummarySchemaVersion = 1;

}  // namespace bvpc::harness
