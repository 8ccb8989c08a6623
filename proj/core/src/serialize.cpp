#include "gplasc/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gplasc {

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (int r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  const auto rows = static_cast<int>(j.size());
  if (rows == 0) return Matrix(0, 0);
  const auto cols = static_cast<int>(j.at(0).size());
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const Json& j) {
  Vector v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

Json to_json(const EtfFrame& frame) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["dim"] = frame.dim;
  j["vertex_count"] = frame.count();
  j["vertices"] = matrix_to_json(frame.vertices);
  return j;
}

EtfFrame etf_frame_from_json(const Json& j) {
  EtfFrame frame;
  frame.dim = j.at("dim").get<int>();
  frame.vertices = matrix_from_json(j.at("vertices"));
  return frame;
}

Json to_json(const SimplexReport& report, double tol) {
  Json j;
  j["centroid_norm"] = report.centroid_norm;
  j["radius"] = report.radius;
  j["radius_spread"] = report.radius_spread;
  j["inner_product_spread"] = report.inner_product_spread;
  j["common_inner_product"] = report.common_inner_product;
  j["tol"] = tol;
  j["pass"] = report.passes(tol);
  return j;
}

Json to_json(const RegionPlan& plan) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["task_count_max"] = plan.task_count_max;
  j["classes_per_task"] = plan.classes_per_task;
  j["dim"] = plan.dim;
  j["margin"] = plan.margin;
  j["theta_etf"] = plan.theta_etf;
  j["k_min"] = plan.k_min;
  j["k"] = plan.k;
  j["k_clipped"] = plan.k_clipped;
  j["rho"] = plan.rho;
  j["center_mode"] = plan.center_mode == CenterMode::scaled ? "scaled" : "unscaled";
  j["etf_vertices"] = matrix_to_json(plan.etf.vertices);
  j["centers_fixed"] = matrix_to_json(plan.centers_fixed);
  return j;
}

RegionPlan region_plan_from_json(const Json& j) {
  RegionPlan plan;
  plan.task_count_max = j.at("task_count_max").get<int>();
  plan.classes_per_task = j.at("classes_per_task").get<int>();
  plan.dim = j.at("dim").get<int>();
  plan.margin = j.at("margin").get<double>();
  plan.theta_etf = j.at("theta_etf").get<double>();
  plan.k_min = j.at("k_min").get<double>();
  plan.k = j.at("k").get<double>();
  plan.k_clipped = j.at("k_clipped").get<bool>();
  plan.rho = j.at("rho").get<double>();
  plan.center_mode =
      j.at("center_mode").get<std::string>() == "scaled" ? CenterMode::scaled : CenterMode::unscaled;
  plan.etf.vertices = matrix_from_json(j.at("etf_vertices"));
  plan.etf.dim = plan.dim;
  plan.centers_fixed = matrix_from_json(j.at("centers_fixed"));
  return plan;
}

Json to_json(const LossBreakdown& breakdown) {
  Json j;
  j["supcon"] = breakdown.supcon;
  j["range"] = breakdown.range;
  j["position"] = breakdown.position;
  j["distill"] = breakdown.distill;
  j["total"] = breakdown.total;
  return j;
}

Json to_json(const EqualityReport& report) {
  Json j;
  j["collapse_dev"] = report.collapse_dev;
  j["cross_inner_dev"] = report.cross_inner_dev;
  j["center"] = vector_to_json(report.center);
  j["radius_dev"] = report.radius_dev;
  j["tol"] = report.tol;
  j["pass"] = report.pass;
  return j;
}

Json to_json(const EncoderParams& params) {
  auto flat = [](const Matrix& m) {
    Json out = Json::array();
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    return out;
  };
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["input_dim"] = params.input_dim();
  j["hidden_dim"] = params.hidden_dim();
  j["output_dim"] = params.output_dim();
  j["w1"] = flat(params.w1);
  j["b1"] = vector_to_json(params.b1);
  j["w2"] = flat(params.w2);
  j["b2"] = vector_to_json(params.b2);
  return j;
}

EncoderParams encoder_params_from_json(const Json& j) {
  const int d_in = j.at("input_dim").get<int>();
  const int hidden = j.at("hidden_dim").get<int>();
  const int d_out = j.at("output_dim").get<int>();
  auto unflatten = [](const Json& arr, int rows, int cols) {
    Matrix m(rows, cols);
    int i = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = arr.at(i++).get<double>();
    return m;
  };
  EncoderParams params;
  params.w1 = unflatten(j.at("w1"), d_in, hidden);
  params.b1 = vector_from_json(j.at("b1"));
  params.w2 = unflatten(j.at("w2"), hidden, d_out);
  params.b2 = vector_from_json(j.at("b2"));
  return params;
}

Json to_json(const RunReport& report) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["method"] = report.method;
  j["seed"] = report.seed;
  j["acc_cil"] = report.acc_cil;
  j["acc_til"] = report.acc_til;
  j["forgetting"] = report.forgetting_cil;
  Json per_task = Json::array();
  for (const TaskReport& tr : report.per_task) {
    Json entry;
    entry["prototype_error"] = tr.prototype_error;
    entry["overlap_row"] = tr.overlap_row;
    per_task.push_back(std::move(entry));
  }
  j["per_task"] = std::move(per_task);
  return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string loss_curve_csv(const std::vector<LossBreakdown>& losses) {
  std::string out = "step,supcon,range,position,distill,total\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const LossBreakdown& bd = losses[i];
    out += std::to_string(i) + "," + format_double(bd.supcon) + "," + format_double(bd.range) +
           "," + format_double(bd.position) + "," + format_double(bd.distill) + "," +
           format_double(bd.total) + "\n";
  }
  return out;
}

std::string snapshots_csv(const Trajectory& traj) {
  std::string out = "step,supcon,range,position,distill,total,coords\n";
  for (const auto& [step, points] : traj.snapshots) {
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(step),
                                                traj.losses.size() - 1);
    const LossBreakdown& bd = traj.losses[i];
    out += std::to_string(step) + "," + format_double(bd.supcon) + "," +
           format_double(bd.range) + "," + format_double(bd.position) + "," +
           format_double(bd.distill) + "," + format_double(bd.total);
    for (int r = 0; r < points.rows(); ++r)
      for (int c = 0; c < points.cols(); ++c) out += "," + format_double(points(r, c));
    out += "\n";
  }
  return out;
}

std::string point_cloud_csv(const FeatureSet& fs) {
  std::string out;
  for (int c = 0; c < fs.dim(); ++c) out += "x" + std::to_string(c) + ",";
  out += "label,task_id\n";
  for (int r = 0; r < fs.size(); ++r) {
    for (int c = 0; c < fs.dim(); ++c) out += format_double(fs.features(r, c)) + ",";
    out += std::to_string(fs.labels[static_cast<std::size_t>(r)]) + "," +
           std::to_string(fs.task_ids[static_cast<std::size_t>(r)]) + "\n";
  }
  return out;
}

std::string overlap_matrix_csv(const Matrix& overlap) {
  std::string out = "task";
  for (int c = 0; c < overlap.cols(); ++c) out += ",t" + std::to_string(c);
  out += "\n";
  for (int r = 0; r < overlap.rows(); ++r) {
    out += "t" + std::to_string(r);
    for (int c = 0; c < overlap.cols(); ++c) out += "," + format_double(overlap(r, c));
    out += "\n";
  }
  return out;
}

}  // namespace gplasc
