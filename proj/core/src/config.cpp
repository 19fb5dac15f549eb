#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "bvpc/errors.hpp"
#include "bvpc/harness.hpp"

namespace bvpc::harness {

namespace {

using json = nlohmann::ordered_json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

double num(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

template <int Dim>
Eigen::Matrix<double, Dim, 1> vec(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(Dim)) {
    throw ConfigError(where + ": expected an array of " + std::to_string(Dim) + " numbers");
  }
  Eigen::Matrix<double, Dim, 1> v;
  for (int i = 0; i < Dim; ++i) v(i) = num(j[static_cast<std::size_t>(i)], where);
  return v;
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const json& j = obj.at(key);
  const std::string path = where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!j.is_boolean()) throw ConfigError(path + ": expected a boolean");
    out = j.get<bool>();
  } else if constexpr (std::is_same_v<T, int>) {
    if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
    out = j.get<int>();
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
      throw ConfigError(path + ": expected a non-negative integer");
    }
    out = j.get<std::uint64_t>();
  } else if constexpr (std::is_same_v<T, double>) {
    out = num(j, path);
  } else {
    out = vec<T::RowsAtCompileTime>(j, path);
  }
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

ScenarioConfig config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(root, "config",
             {"schema_version", "scenario", "seed", "duration", "control_dt", "plant_dt", "record_timing",
              "perception", "initial_poses", "landmark", "camera", "reference", "track", "sweep", "predict",
              "weights", "bounds", "sensor", "ocp", "noise"});
  if (!root.contains("scenario") || !root["scenario"].is_string()) {
    throw ConfigError("config.scenario: required string");
  }
  if (root.contains("schema_version") && root["schema_version"] != kSummarySchemaVersion) {
    throw ConfigError("config.schema_version: unsupported version");
  }
  ScenarioConfig cfg = default_config(parse_kind(root["scenario"].get<std::string>()));
  const std::string c = "config";
  read(root, "seed", cfg.seed, c);
  read(root, "duration", cfg.duration, c);
  read(root, "control_dt", cfg.control_dt, c);
  read(root, "plant_dt", cfg.plant_dt, c);
  read(root, "record_timing", cfg.record_timing, c);
  read(root, "perception", cfg.perception, c);

  if (root.contains("initial_poses")) {
    const json& poses = root["initial_poses"];
    if (!poses.is_array()) throw ConfigError("config.initial_poses: expected an array");
    cfg.initial_poses.clear();
    for (std::size_t i = 0; i < poses.size(); ++i) {
      const std::string w = "config.initial_poses[" + std::to_string(i) + "]";
      check_keys(poses[i], w, {"position", "heading_deg"});
      InitialPose p;
      read(poses[i], "position", p.position, w);
      read(poses[i], "heading_deg", p.heading_deg, w);
      cfg.initial_poses.push_back(p);
    }
  }
  if (root.contains("landmark")) {
    const json& j = root["landmark"];
    check_keys(j, "config.landmark", {"position", "yaw_deg"});
    read(j, "position", cfg.landmark.p_w_lw, "config.landmark");
    if (j.contains("yaw_deg")) {
      cfg.landmark.q_wl = UnitQuaternion::from_yaw(num(j["yaw_deg"], "config.landmark.yaw_deg") * M_PI / 180.0);
    }
  }
  if (root.contains("camera")) {
    const json& j = root["camera"];
    check_keys(j, "config.camera", {"position", "rotation_wxyz"});
    read(j, "position", cfg.extrinsics.p_b_cb, "config.camera");
    if (j.contains("rotation_wxyz")) {
      try {
        cfg.extrinsics.q_bc = UnitQuaternion(vec<4>(j["rotation_wxyz"], "config.camera.rotation_wxyz"));
      } catch (const std::invalid_argument&) {
        throw ConfigError("config.camera.rotation_wxyz: must be a non-zero quaternion");
      }
    }
  }
  if (root.contains("reference")) {
    const json& j = root["reference"];
    check_keys(j, "config.reference", {"image", "distance", "heading_deg"});
    if (j.contains("image")) {
      const Vec2 s = vec<2>(j["image"], "config.reference.image");
      cfg.s_star = {s.x(), s.y()};
    }
    read(j, "distance", cfg.d_star, "config.reference");
    read(j, "heading_deg", cfg.heading_ref_deg, "config.reference");
  }
  if (root.contains("track")) {
    const json& j = root["track"];
    const std::string w = "config.track";
    check_keys(j, w,
               {"center", "radius", "start_deg", "end_deg", "max_ref_speed", "accel", "settle_time", "face_landmark",
                "fixed_heading_deg"});
    read(j, "center", cfg.track.center, w);
    read(j, "radius", cfg.track.radius, w);
    read(j, "start_deg", cfg.track.start_deg, w);
    read(j, "end_deg", cfg.track.end_deg, w);
    read(j, "max_ref_speed", cfg.track.max_ref_speed, w);
    read(j, "accel", cfg.track.accel, w);
    read(j, "settle_time", cfg.track.settle_time, w);
    read(j, "face_landmark", cfg.track.face_landmark, w);
    read(j, "fixed_heading_deg", cfg.track.fixed_heading_deg, w);
  }
  if (root.contains("sweep")) {
    const json& j = root["sweep"];
    check_keys(j, "config.sweep", {"speeds", "trials"});
    if (j.contains("speeds")) {
      if (!j["speeds"].is_array()) throw ConfigError("config.sweep.speeds: expected an array");
      cfg.sweep.speeds.clear();
      for (const json& v : j["speeds"]) cfg.sweep.speeds.push_back(num(v, "config.sweep.speeds"));
    }
    read(j, "trials", cfg.sweep.trials, "config.sweep");
  }
  if (root.contains("predict")) {
    const json& j = root["predict"];
    const std::string w = "config.predict";
    check_keys(j, w, {"v_c", "omega_c", "point", "horizon", "dt"});
    read(j, "v_c", cfg.predict.v_c, w);
    read(j, "omega_c", cfg.predict.omega_c, w);
    read(j, "point", cfg.predict.point, w);
    read(j, "horizon", cfg.predict.horizon, w);
    read(j, "dt", cfg.predict.dt, w);
  }
  if (root.contains("weights")) {
    const json& j = root["weights"];
    const std::string w = "config.weights";
    check_keys(j, w, {"q_s", "q_d", "q_p", "q_v", "q_q"});
    read(j, "q_s", cfg.weights.q_s, w);
    read(j, "q_d", cfg.weights.q_d, w);
    read(j, "q_p", cfg.weights.q_p, w);
    read(j, "q_v", cfg.weights.q_v, w);
    read(j, "q_q", cfg.weights.q_q, w);
  }
  if (root.contains("bounds")) {
    const json& j = root["bounds"];
    const std::string w = "config.bounds";
    check_keys(j, w, {"s_min", "s_max", "c_min", "c_max", "omega_min", "omega_max"});
    read(j, "s_min", cfg.bounds.s_min, w);
    read(j, "s_max", cfg.bounds.s_max, w);
    read(j, "c_min", cfg.bounds.c_min, w);
    read(j, "c_max", cfg.bounds.c_max, w);
    read(j, "omega_min", cfg.bounds.omega_min, w);
    read(j, "omega_max", cfg.bounds.omega_max, w);
  }
  if (root.contains("sensor")) {
    const json& j = root["sensor"];
    check_keys(j, "config.sensor", {"s_min", "s_max"});
    read(j, "s_min", cfg.sensor.s_min, "config.sensor");
    read(j, "s_max", cfg.sensor.s_max, "config.sensor");
  }
  if (root.contains("ocp")) {
    const json& j = root["ocp"];
    const std::string w = "config.ocp";
    check_keys(j, w, {"N", "dt", "max_sqp_iters", "qp_tol", "slack_weight"});
    read(j, "N", cfg.params.N, w);
    read(j, "dt", cfg.params.dt, w);
    read(j, "max_sqp_iters", cfg.params.max_sqp_iters, w);
    read(j, "qp_tol", cfg.params.qp_tol, w);
    read(j, "slack_weight", cfg.params.slack_weight, w);
  }
  if (root.contains("noise")) {
    const json& j = root["noise"];
    const std::string w = "config.noise";
    check_keys(j, w, {"sigma_v", "sigma_att", "sigma_d_rel", "sigma_px"});
    read(j, "sigma_v", cfg.noise.sigma_v, w);
    read(j, "sigma_att", cfg.noise.sigma_att, w);
    read(j, "sigma_d_rel", cfg.noise.sigma_d_rel, w);
    read(j, "sigma_px", cfg.noise.sigma_px, w);
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return config_from_json(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_to_json(const ScenarioConfig& cfg) {
  json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["scenario"] = to_string(cfg.kind);
  j["seed"] = cfg.seed;
  j["duration"] = cfg.duration;
  j["control_dt"] = cfg.control_dt;
  j["plant_dt"] = cfg.plant_dt;
  j["record_timing"] = cfg.record_timing;
  j["perception"] = cfg.perception;
  json poses = json::array();
  for (const InitialPose& p : cfg.initial_poses) {
    poses.push_back({{"position", to_json(p.position)}, {"heading_deg", p.heading_deg}});
  }
  j["initial_poses"] = poses;
  j["landmark"] = {{"position", to_json(cfg.landmark.p_w_lw)}, {"yaw_deg", cfg.landmark.q_wl.yaw() * 180.0 / M_PI}};
  j["camera"] = {{"position", to_json(cfg.extrinsics.p_b_cb)}, {"rotation_wxyz", to_json(cfg.extrinsics.q_bc.coeffs())}};
  j["reference"] = {{"image", to_json(cfg.s_star.vec())}, {"distance", cfg.d_star}, {"heading_deg", cfg.heading_ref_deg}};
  j["track"] = {{"center", to_json(cfg.track.center)},
                {"radius", cfg.track.radius},
                {"start_deg", cfg.track.start_deg},
                {"end_deg", cfg.track.end_deg},
                {"max_ref_speed", cfg.track.max_ref_speed},
                {"accel", cfg.track.accel},
                {"settle_time", cfg.track.settle_time},
                {"face_landmark", cfg.track.face_landmark},
                {"fixed_heading_deg", cfg.track.fixed_heading_deg}};
  j["sweep"] = {{"speeds", cfg.sweep.speeds}, {"trials", cfg.sweep.trials}};
  j["predict"] = {{"v_c", to_json(cfg.predict.v_c)},
                  {"omega_c", to_json(cfg.predict.omega_c)},
                  {"point", to_json(cfg.predict.point)},
                  {"horizon", cfg.predict.horizon},
                  {"dt", cfg.predict.dt}};
  j["weights"] = {{"q_s", to_json(cfg.weights.q_s)},
                  {"q_d", cfg.weights.q_d},
                  {"q_p", to_json(cfg.weights.q_p)},
                  {"q_v", to_json(cfg.weights.q_v)},
                  {"q_q", to_json(cfg.weights.q_q)}};
  j["bounds"] = {{"s_min", to_json(cfg.bounds.s_min)},         {"s_max", to_json(cfg.bounds.s_max)},
                 {"c_min", cfg.bounds.c_min},                  {"c_max", cfg.bounds.c_max},
                 {"omega_min", to_json(cfg.bounds.omega_min)}, {"omega_max", to_json(cfg.bounds.omega_max)}};
  j["sensor"] = {{"s_min", to_json(cfg.sensor.s_min)}, {"s_max", to_json(cfg.sensor.s_max)}};
  j["ocp"] = {{"N", cfg.params.N},
              {"dt", cfg.params.dt},
              {"max_sqp_iters", cfg.params.max_sqp_iters},
              {"qp_tol", cfg.params.qp_tol},
              {"slack_weight", cfg.params.slack_weight}};
  j["noise"] = {{"sigma_v", cfg.noise.sigma_v},
                {"sigma_att", cfg.noise.sigma_att},
                {"sigma_d_rel", cfg.noise.sigma_d_rel},
                {"sigma_px", cfg.noise.sigma_px}};
  return j.dump(2) + "\n";
}

}  // namespace bvpc::harness
