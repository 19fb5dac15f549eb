#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "bvpc/harness.hpp"

namespace bvpc::harness {

namespace {

using json = nlohmann::ordered_json;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string g9(double v) { return std::isfinite(v) ? fmt("%.9g", v) : "nan"; }

json maybe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json metrics_json(const Metrics& m) {
  json j;
  j["outcome"] = to_string(m.outcome);
  j["rms_distance_error"] = m.rms_distance_error;
  j["max_altitude_deviation"] = m.max_altitude_deviation;
  j["min_border_margin"] = m.min_border_margin;
  j["mean_solve_ms"] = maybe(m.mean_solve_ms);
  j["max_solve_ms"] = maybe(m.max_solve_ms);
  j["final_distance_error"] = maybe(m.final_distance_error);
  j["final_image_error"] = maybe(m.final_image_error);
  j["duration"] = m.duration;
  j["final_position"] = {m.final_position.x(), m.final_position.y(), m.final_position.z()};
  j["max_abs_image"] = m.max_abs_image;
  j["ticks"] = m.ticks;
  j["converged_solves"] = m.converged_solves;
  j["zero_slack_converged"] = m.zero_slack_converged;
  j["failsafe_ticks"] = m.failsafe_ticks;
  j["input_violations"] = m.input_violations;
  j["settle_time"] = {maybe(m.settle_time.x()), maybe(m.settle_time.y()), maybe(m.settle_time.z())};
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// Minimal SVG line/scatter plot with linear axes.
struct Series {
  std::string name;
  std::vector<Vec2> pts;
  std::vector<double> color_values;
};

struct PlotSpec {
  PlotSpec(std::string t, std::string x, std::string y)
      : title(std::move(t)), xlabel(std::move(x)), ylabel(std::move(y)) {}
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool scatter = false;
  bool flip_y = false;
  bool equal_aspect = false;
  std::optional<Eigen::Vector4d> fixed_box;  // xmin, xmax, ymin, ymax
  std::string color_label;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(68 + t * (253 - 68)));
  const int g = static_cast<int>(std::lround(1 + t * (231 - 1)));
  const int b = static_cast<int>(std::lround(84 + t * (37 - 84)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string svg_plot(const PlotSpec& spec, const std::vector<Series>& series) {
  constexpr double W = 640, H = 480, L = 70, R = 130, T = 40, B = 55;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  double c0 = INFINITY, c1 = -INFINITY;
  for (const Series& s : series) {
    for (const Vec2& p : s.pts) {
      if (!p.allFinite()) continue;
      x0 = std::min(x0, p.x()), x1 = std::max(x1, p.x());
      y0 = std::min(y0, p.y()), y1 = std::max(y1, p.y());
    }
    for (double c : s.color_values) c0 = std::min(c0, c), c1 = std::max(c1, c);
  }
  if (spec.fixed_box) {
    x0 = (*spec.fixed_box)(0), x1 = (*spec.fixed_box)(1), y0 = (*spec.fixed_box)(2), y1 = (*spec.fixed_box)(3);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-9) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
  if (!spec.fixed_box) {
    const double px = 0.05 * (x1 - x0), py = 0.05 * (y1 - y0);
    x0 -= px, x1 += px, y0 -= py, y1 += py;
  }
  const double pw = W - L - R, ph = H - T - B;
  if (spec.equal_aspect) {
    const double scale = std::max((x1 - x0) / pw, (y1 - y0) / ph);
    const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
    x0 = cx - 0.5 * scale * pw, x1 = cx + 0.5 * scale * pw;
    y0 = cy - 0.5 * scale * ph, y1 = cy + 0.5 * scale * ph;
  }
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) {
    const double f = (y - y0) / (y1 - y0);
    return spec.flip_y ? T + f * ph : T + (1.0 - f) * ph;
  };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\" "
       "font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  o += "<text x=\"" + fmt("%.1f", L + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + spec.title +
       "</text>\n";
  o += "<rect x=\"" + fmt("%.1f", L) + "\" y=\"" + fmt("%.1f", T) + "\" width=\"" + fmt("%.1f", pw) + "\" height=\"" +
       fmt("%.1f", ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + i * (x1 - x0) / 5, yv = y0 + i * (y1 - y0) / 5;
    o += "<line x1=\"" + fmt("%.1f", sx(xv)) + "\" y1=\"" + fmt("%.1f", T + ph) + "\" x2=\"" + fmt("%.1f", sx(xv)) +
         "\" y2=\"" + fmt("%.1f", T + ph + 5) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + fmt("%.1f", sx(xv)) + "\" y=\"" + fmt("%.1f", T + ph + 18) + "\" text-anchor=\"middle\">" +
         fmt("%.3g", xv) + "</text>\n";
    o += "<line x1=\"" + fmt("%.1f", L - 5) + "\" y1=\"" + fmt("%.1f", sy(yv)) + "\" x2=\"" + fmt("%.1f", L) +
         "\" y2=\"" + fmt("%.1f", sy(yv)) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + fmt("%.1f", L - 8) + "\" y=\"" + fmt("%.1f", sy(yv) + 4) + "\" text-anchor=\"end\">" +
         fmt("%.3g", yv) + "</text>\n";
  }
  o += "<text x=\"" + fmt("%.1f", L + pw / 2) + "\" y=\"" + fmt("%.1f", H - 12) + "\" text-anchor=\"middle\">" +
       spec.xlabel + "</text>\n";
  o += "<text transform=\"translate(18," + fmt("%.1f", T + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       spec.ylabel + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const std::string col = kPalette[k % (sizeof kPalette / sizeof kPalette[0])];
    if (spec.scatter) {
      for (std::size_t i = 0; i < s.pts.size(); ++i) {
        if (!s.pts[i].allFinite()) continue;
        const double cv = i < s.color_values.size() && c1 > c0 ? (s.color_values[i] - c0) / (c1 - c0) : 0.0;
        o += "<circle cx=\"" + fmt("%.2f", sx(s.pts[i].x())) + "\" cy=\"" + fmt("%.2f", sy(s.pts[i].y())) +
             "\" r=\"2.5\" fill=\"" + ramp(cv) + "\"/>\n";
      }
    } else {
      o += "<polyline fill=\"none\" stroke=\"" + col + "\" stroke-width=\"1.5\" points=\"";
      for (const Vec2& p : s.pts) {
        if (!p.allFinite()) continue;
        o += fmt("%.2f", sx(p.x())) + "," + fmt("%.2f", sy(p.y())) + " ";
      }
      o += "\"/>\n";
      o += "<line x1=\"" + fmt("%.1f", W - R + 10) + "\" y1=\"" + fmt("%.1f", T + 10 + 18.0 * k) + "\" x2=\"" +
           fmt("%.1f", W - R + 30) + "\" y2=\"" + fmt("%.1f", T + 10 + 18.0 * k) + "\" stroke=\"" + col +
           "\" stroke-width=\"2\"/>\n";
      o += "<text x=\"" + fmt("%.1f", W - R + 35) + "\" y=\"" + fmt("%.1f", T + 14 + 18.0 * k) + "\">" + s.name +
           "</text>\n";
    }
  }
  if (spec.scatter && std::isfinite(c0)) {
    for (int i = 0; i < 10; ++i) {
      o += "<rect x=\"" + fmt("%.1f", W - R + 20) + "\" y=\"" + fmt("%.1f", T + 20 + 20.0 * (9 - i)) +
           "\" width=\"20\" height=\"20\" fill=\"" + ramp(i / 9.0) + "\"/>\n";
    }
    o += "<text x=\"" + fmt("%.1f", W - R + 45) + "\" y=\"" + fmt("%.1f", T + 34) + "\">" + fmt("%.3g", c1) + "</text>\n";
    o += "<text x=\"" + fmt("%.1f", W - R + 45) + "\" y=\"" + fmt("%.1f", T + 214) + "\">" + fmt("%.3g", c0) +
         "</text>\n";
    o += "<text x=\"" + fmt("%.1f", W - R + 20) + "\" y=\"" + fmt("%.1f", T + 240) + "\">" + spec.color_label +
         "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

std::string predict_csv(const PredictReport& rep) {
  std::string o = "t,truth_u,truth_v,bearing_u,bearing_v,homogeneous_u,homogeneous_v,bearing_error,homogeneous_error,"
                  "discrepancy\n";
  for (const PredictSample& s : rep.samples) {
    o += g9(s.t) + "," + g9(s.truth.u) + "," + g9(s.truth.v) + "," + g9(s.bearing.u) + "," + g9(s.bearing.v) + "," +
         g9(s.homogeneous.u) + "," + g9(s.homogeneous.v) + "," + g9(s.bearing_error) + "," + g9(s.homogeneous_error) +
         "," + g9(s.discrepancy) + "\n";
  }
  return o;
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
  std::string o = "speed,perception,trials,successes,rate,input_violations\n";
  for (const SweepCell& c : cells) {
    o += g9(c.speed) + "," + (c.perception ? "1" : "0") + "," + std::to_string(c.trials) + "," +
         std::to_string(c.successes) + "," + g9(c.rate()) + "," + std::to_string(c.input_violations) + "\n";
  }
  return o;
}

}  // namespace

std::string run_csv(const RunLog& log) {
  std::string o =
      "t,p_x,p_y,p_z,v_x,v_y,v_z,q_w,q_x,q_y,q_z,s_u,s_v,d,d_ref,s_comp_u,s_comp_v,c,omega_x,omega_y,omega_z,"
      "solve_ms,kkt,sqp_iters,max_slack,status,failsafe,visible\n";
  for (const LogRow& r : log.rows) {
    const Vec4 q = r.plant.q_wb.coeffs();
    o += g9(r.t);
    for (int i = 0; i < 3; ++i) o += "," + g9(r.plant.p_w(i));
    for (int i = 0; i < 3; ++i) o += "," + g9(r.plant.v_w(i));
    for (int i = 0; i < 4; ++i) o += "," + g9(q(i));
    o += "," + g9(r.s_c.u) + "," + g9(r.s_c.v) + "," + g9(r.d) + "," + g9(r.ref.d_star);
    o += "," + g9(r.s_comp.u) + "," + g9(r.s_comp.v);
    o += "," + g9(r.input.c);
    for (int i = 0; i < 3; ++i) o += "," + g9(r.input.omega_b(i));
    o += "," + g9(r.solve_ms) + "," + g9(r.kkt) + "," + std::to_string(r.sqp_iters) + "," + g9(r.max_slack);
    o += std::string(",") + to_string(r.status) + "," + (r.failsafe ? "1" : "0") + "," + (r.visible ? "1" : "0") + "\n";
  }
  return o;
}

std::string summary_json(const ScenarioResult& res) {
  json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["scenario"] = to_string(res.config.kind);
  j["seed"] = res.config.seed;
  j["config"] = json::parse(config_to_json(res.config));
  json runs = json::array();
  for (const RunRecord& r : res.runs) {
    runs.push_back({{"name", r.name}, {"csv", r.name + ".csv"}, {"metrics", metrics_json(r.metrics)}});
  }
  j["runs"] = runs;
  json sweep = json::array();
  for (const SweepCell& c : res.sweep) {
    sweep.push_back({{"speed", c.speed},
                     {"perception", c.perception},
                     {"trials", c.trials},
                     {"successes", c.successes},
                     {"rate", c.rate()},
                     {"input_violations", c.input_violations}});
  }
  j["sweep"] = sweep;
  if (res.predict) {
    j["predict"] = {{"samples", res.predict->samples.size()},
                    {"max_bearing_error", res.predict->max_bearing_error},
                    {"max_homogeneous_error", res.predict->max_homogeneous_error},
                    {"max_discrepancy", res.predict->max_discrepancy}};
  } else {
    j["predict"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::vector<std::filesystem::path> emit_outputs(const ScenarioResult& res, const std::filesystem::path& outdir) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + outdir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    const std::filesystem::path p = outdir / name;
    write_file(p, text);
    written.push_back(p);
  };

  for (const RunRecord& r : res.runs) emit(r.name + ".csv", run_csv(r.log));
  if (!res.sweep.empty()) emit("sweep.csv", sweep_csv(res.sweep));
  if (res.predict) {
    emit("predict.csv", predict_csv(*res.predict));
    Series b{"bearing", {}, {}}, h{"homogeneous", {}, {}};
    for (const PredictSample& s : res.predict->samples) {
      b.pts.emplace_back(s.t, s.bearing_error);
      h.pts.emplace_back(s.t, s.homogeneous_error);
    }
    emit("prediction_error.svg", svg_plot(PlotSpec("Prediction error vs exact geometry", "t [s]", "error [normalized]"), {b, h}));
  }
  emit("summary.json", summary_json(res));

  if (!res.runs.empty()) {
    std::vector<Series> xy, alt;
    Series img{"feature", {}, {}};
    for (const RunRecord& r : res.runs) {
      Series a{r.name, {}, {}}, z{r.name, {}, {}};
      for (const LogRow& row : r.log.rows) {
        a.pts.emplace_back(row.plant.p_w.x(), row.plant.p_w.y());
        z.pts.emplace_back(row.t, row.plant.p_w.z());
        if (row.visible) {
          img.pts.emplace_back(row.s_c.u, row.s_c.v);
          img.color_values.push_back(row.d);
        }
      }
      xy.push_back(std::move(a));
      alt.push_back(std::move(z));
    }
    PlotSpec xs("Horizontal path", "x [m]", "y [m]");
    xs.equal_aspect = true;
    emit("xy.svg", svg_plot(xs, xy));
    emit("altitude.svg", svg_plot(PlotSpec("Altitude", "t [s]", "z [m]"), alt));
    PlotSpec is("Feature in the image plane", "u [normalized]", "v [normalized]");
    is.scatter = true;
    is.flip_y = true;
    is.fixed_box = Eigen::Vector4d(res.config.sensor.s_min.x(), res.config.sensor.s_max.x(), res.config.sensor.s_min.y(),
                                   res.config.sensor.s_max.y());
    is.color_label = "distance [m]";
    emit("image.svg", svg_plot(is, {img}));
  }
  return written;
}

}  // namespace bvpc::harness
