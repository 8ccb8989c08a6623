#include "gplasc/cli.hpp"

#include "gplasc/bounds.hpp"
#include "gplasc/continual.hpp"
#include "gplasc/geometry.hpp"
#include "gplasc/losses.hpp"
#include "gplasc/metrics.hpp"
#include "gplasc/sphere_optimizer.hpp"

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gplasc {

// ---------------------------------------------------------------------------
// ConfigMap
// ---------------------------------------------------------------------------

ConfigMap ConfigMap::parse_string(const std::string& text) {
  ConfigMap cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    auto trim = [](std::string s) {
      const auto begin = s.find_first_not_of(" \t\r");
      if (begin == std::string::npos) return std::string();
      const auto end = s.find_last_not_of(" \t\r");
      return s.substr(begin, end - begin + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected 'key = value', got '" + line + "'", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line_no);
    if (cfg.values_.count(key)) throw ConfigError("duplicate key '" + key + "'", line_no);
    cfg.values_[key] = value;
    cfg.lines_[key] = line_no;
  }
  return cfg;
}

ConfigMap ConfigMap::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  values_[key] = value;
  lines_[key] = 0;
}

bool ConfigMap::has(const std::string& key) const { return values_.count(key) > 0; }

int ConfigMap::line_of(const std::string& key) const {
  const auto it = lines_.find(key);
  return it == lines_.end() ? 0 : it->second;
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  const std::string v = it == values_.end() ? fallback : it->second;
  resolved_[key] = v;
  return v;
}

int ConfigMap::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    resolved_[key] = std::to_string(fallback);
    return fallback;
  }
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    resolved_[key] = it->second;
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected integer, got '" + it->second + "'",
                      line_of(key));
  }
}

std::uint64_t ConfigMap::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    resolved_[key] = std::to_string(fallback);
    return fallback;
  }
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    resolved_[key] = it->second;
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected unsigned integer, got '" + it->second + "'",
                      line_of(key));
  }
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    resolved_[key] = format_double(fallback);
    return fallback;
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    resolved_[key] = it->second;
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected number, got '" + it->second + "'",
                      line_of(key));
  }
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    resolved_[key] = fallback ? "true" : "false";
    return fallback;
  }
  if (it->second == "true" || it->second == "1") {
    resolved_[key] = it->second;
    return true;
  }
  if (it->second == "false" || it->second == "0") {
    resolved_[key] = it->second;
    return false;
  }
  throw ConfigError("key '" + key + "': expected true/false, got '" + it->second + "'",
                    line_of(key));
}

std::vector<std::string> ConfigMap::get_string_list(const std::string& key,
                                                    const std::string& fallback) const {
  const std::string raw = get_string(key, fallback);
  std::vector<std::string> out;
  std::istringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto begin = item.find_first_not_of(" \t");
    if (begin == std::string::npos) continue;
    const auto end = item.find_last_not_of(" \t");
    out.push_back(item.substr(begin, end - begin + 1));
  }
  if (out.empty()) throw ConfigError("key '" + key + "': empty list", line_of(key));
  return out;
}

std::vector<double> ConfigMap::get_double_list(const std::string& key,
                                               const std::string& fallback) const {
  std::vector<double> out;
  for (const std::string& item : get_string_list(key, fallback)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': expected number list, got '" + item + "'",
                        line_of(key));
    }
  }
  return out;
}

void ConfigMap::restrict_keys(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (!known.count(key))
      throw ConfigError("unknown key '" + key + "'", line_of(key));
  }
}

Json ConfigMap::echo() const {
  Json j = Json::object();
  for (const auto& [key, value] : resolved_) j[key] = value;
  return j;
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

namespace {

struct Check {
  std::string name;
  bool pass = false;
  double slack = 0.0;
};

Json checks_to_json(const std::vector<Check>& checks) {
  Json arr = Json::array();
  for (const Check& c : checks) {
    Json j;
    j["name"] = c.name;
    j["pass"] = c.pass;
    j["slack"] = c.slack;
    arr.push_back(std::move(j));
  }
  return arr;
}

CenterMode center_mode_from(const std::string& name) {
  if (name == "scaled") return CenterMode::scaled;
  if (name == "unscaled") return CenterMode::unscaled;
  throw ConfigError("center_mode must be scaled or unscaled, got '" + name + "'");
}

// Cross-pair similarity statistics split into same-task and cross-task pairs.
struct PairStats {
  double intra_cross_mean = 0.0;  // same task, different class
  double intra_cross_min = 1.0;
  double intra_cross_max = -1.0;
  double inter_task_max = -1.0;
  bool has_inter = false;
};

PairStats pair_stats(const FeatureSet& fs) {
  PairStats stats;
  double sum = 0.0;
  long count = 0;
  for (int i = 0; i < fs.size(); ++i) {
    for (int j = i + 1; j < fs.size(); ++j) {
      const double s = fs.features.row(i).dot(fs.features.row(j));
      if (fs.task_ids[static_cast<std::size_t>(i)] != fs.task_ids[static_cast<std::size_t>(j)]) {
        stats.inter_task_max = std::max(stats.inter_task_max, s);
        stats.has_inter = true;
      } else if (fs.labels[static_cast<std::size_t>(i)] != fs.labels[static_cast<std::size_t>(j)]) {
        sum += s;
        ++count;
        stats.intra_cross_min = std::min(stats.intra_cross_min, s);
        stats.intra_cross_max = std::max(stats.intra_cross_max, s);
      }
    }
  }
  if (count > 0) stats.intra_cross_mean = sum / static_cast<double>(count);
  return stats;
}

FeatureSet subset_by_task(const FeatureSet& fs, int task) {
  FeatureSet out;
  std::vector<int> rows;
  for (int i = 0; i < fs.size(); ++i)
    if (fs.task_ids[static_cast<std::size_t>(i)] == task) rows.push_back(i);
  out.features.resize(static_cast<int>(rows.size()), fs.dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<int>(r)) = fs.features.row(rows[r]);
    out.labels.push_back(fs.labels[static_cast<std::size_t>(rows[r])]);
    out.task_ids.push_back(task);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// etf
// ---------------------------------------------------------------------------

int cmd_etf(int h, int count, std::uint64_t seed, const std::filesystem::path& out) {
  const EtfFrame frame = make_simplex_etf(h, count, seed);  // DimensionError -> exit 2
  const SimplexReport report = check_simplex(frame.vertices);
  constexpr double kTol = 1e-8;

  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "etf";
  Json cfg = Json::object();
  cfg["dim"] = std::to_string(h);
  cfg["count"] = std::to_string(count);
  cfg["seed"] = std::to_string(seed);
  j["config"] = std::move(cfg);
  j["frame"] = to_json(frame);
  j["simplex_report"] = to_json(report, kTol);
  write_text_file(out / "etf_frame.json", j.dump(2) + "\n");
  return report.passes(kTol) ? 0 : 1;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int cmd_verify(const ConfigMap& cfg, const std::filesystem::path& out) {
  cfg.restrict_keys({"tasks", "classes", "dim", "margin", "trials", "seed", "k", "rho_z"});
  const int tasks = cfg.get_int("tasks", 5);
  const int classes = cfg.get_int("classes", 3);
  const int dim = cfg.get_int("dim", 8);
  const double margin = cfg.get_double("margin", 0.15);
  const int trials = cfg.get_int("trials", 200);
  const std::uint64_t seed = cfg.get_u64("seed", 7);
  const double rho_z = cfg.get_double("rho_z", 1.0);
  if (cfg.has("k")) {
    const double k = cfg.get_double("k", 0.0);
    if (k < -1.0 || k > 1.0) throw ConfigError("key 'k': threshold out of [-1, 1]");
  }
  if (trials < 0) throw ConfigError("key 'trials': must be >= 0");

  Rng rng(seed);
  std::vector<Check> checks;

  {  // closed-form Gram eigenvalues vs numerical eigendecomposition
    double max_err = 0.0;
    for (int n = 2; n <= 16; ++n) {
      for (int i = 0; i < 50; ++i) {
        const double k = -1.0 + 2.0 * i / 49.0;
        const GramFeasibility gf = gram_feasibility(n, k, n);
        Matrix gram = Matrix::Constant(n, n, k);
        gram.diagonal().setOnes();
        Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
        std::vector<double> expected(static_cast<std::size_t>(n), gf.lambda2);
        if (gf.lambda1 <= gf.lambda2)
          expected.front() = gf.lambda1;
        else
          expected.back() = gf.lambda1;
        for (int e = 0; e < n; ++e)
          max_err = std::max(max_err,
                             std::abs(solver.eigenvalues()[e] - expected[static_cast<std::size_t>(e)]));
      }
    }
    checks.push_back({"gram_closed_form_vs_numeric", max_err <= 1e-9, 1e-9 - max_err});
  }

  {  // feasibility boundary at k = -1/(n-1)
    bool ok = true;
    double worst = 0.0;
    for (int n = 2; n <= 16; ++n) {
      const double boundary = -1.0 / (n - 1);
      const GramFeasibility at = gram_feasibility(n, boundary, n);
      const GramFeasibility below = gram_feasibility(n, boundary - 1e-6, n);
      ok = ok && at.feasible && !below.feasible;
      worst = std::max(worst, std::abs(at.lambda1));
    }
    checks.push_back({"gram_feasibility_boundary", ok, 1e-12 - worst});
  }

  {  // threshold formula + tangency on the reference (T, C) grid
    const std::vector<std::pair<int, int>> grid = {{2, 2}, {5, 2}, {5, 3}, {10, 5}};
    double max_err = 0.0;
    for (const auto& [t, c] : grid) {
      const int h = std::max(t - 1, c - 1);
      const RegionPlan plan = make_region_plan(t, c, h, 0.0, seed);
      // Half-angle identity: k_min = 1 - C*T / (2(C-1)(T-1)).
      const double expected =
          1.0 - static_cast<double>(c) * t / (2.0 * (c - 1) * (t - 1));
      max_err = std::max(max_err, std::abs(plan.k_min - expected));
      max_err = std::max(max_err, std::abs(std::asin(plan.rho) - 0.5 * plan.theta_etf));
    }
    checks.push_back({"threshold_formula_tangency", max_err <= 1e-12, 1e-12 - max_err});
  }

  {  // requested plan: regions fit inside their cones
    const RegionPlan plan = make_region_plan(tasks, classes, dim, margin, seed);
    const double slack = 0.5 * plan.theta_etf - std::asin(plan.rho);
    checks.push_back({"plan_region_fits_cone", slack >= -1e-12, slack});
  }

  double min_bound_slack = std::numeric_limits<double>::infinity();
  if (trials > 0) {  // random constrained configurations respect the bound
    const double k_values[4] = {-0.5, 0.0, 0.3, 0.7};
    Rng trial_rng = rng.child(5);
    LossParams params;
    params.tau = 1.0;
    for (int trial = 0; trial < trials; ++trial) {
      const double k = k_values[trial % 4];
      int c = 0;
      do {
        c = trial_rng.uniform_int(2, 4);
      } while (k < -1.0 / (c - 1));
      const int h = trial_rng.uniform_int(c, 6);
      const int n_per_class = trial_rng.uniform_int(2, 4);
      const Matrix vertices = sample_constrained_vertices(c, h, k, trial_rng);
      const CollapsedConfig config = make_collapsed_config(vertices, n_per_class);
      const BatchPlan plan = build_batch_plan(config.fs.labels, config.batches);
      const double loss = supcon_total(config.fs, config.batches, params);
      min_bound_slack = std::min(min_bound_slack, loss - theorem_bound(plan, k, rho_z));
    }
    checks.push_back({"bound_holds_on_constrained_trials", min_bound_slack >= -1e-9,
                      min_bound_slack});
  } else {
    min_bound_slack = 0.0;
  }

  if (trials > 0) {  // equality configurations attain the bound
    Rng trial_rng = rng.child(6);
    LossParams params;
    params.tau = 1.0;
    double max_dev = 0.0;
    const double k_values[4] = {-0.5, 0.0, 0.3, 0.7};
    for (int trial = 0; trial < trials; ++trial) {
      const double k = k_values[trial % 4];
      int c = 0;
      do {
        c = trial_rng.uniform_int(2, 4);
      } while (k < -1.0 / (c - 1));
      const int h = trial_rng.uniform_int(c, 6);
      const int n_per_class = trial_rng.uniform_int(2, 4);
      const Vector direction = trial_rng.unit_vector(h);
      const Matrix vertices = make_inscribed_simplex(direction, c, k, trial_rng.next_u64());
      const CollapsedConfig config = make_collapsed_config(vertices, n_per_class);
      const BatchPlan plan = build_batch_plan(config.fs.labels, config.batches);
      const double loss = supcon_total(config.fs, config.batches, params);
      max_dev = std::max(max_dev, std::abs(loss - theorem_bound(plan, k, rho_z)));
    }
    checks.push_back({"equality_configs_attain_bound", max_dev <= 1e-9, 1e-9 - max_dev});
  }

  {  // bound strictly increasing in k when some l < b
    std::vector<int> labels = {0, 0, 1, 1};
    std::vector<Batch> batches = {{0, 1, 2, 3}};
    const BatchPlan plan = build_batch_plan(labels, batches);
    double min_diff = std::numeric_limits<double>::infinity();
    double prev = theorem_bound(plan, -1.0, rho_z);
    for (int i = 1; i <= 40; ++i) {
      const double k = -1.0 + 2.0 * i / 40.0;
      const double cur = theorem_bound(plan, k, rho_z);
      min_diff = std::min(min_diff, cur - prev);
      prev = cur;
    }
    checks.push_back({"bound_monotone_in_k", min_diff > 0.0, min_diff});
  }

  {  // below-floor thresholds: infimum over feasible Gram values sits at the floor
    const int c = 3;
    const int h = 4;
    const int n_per_class = 2;
    const double floor_k = -1.0 / (c - 1);
    Rng a5_rng = rng.child(7);
    const Vector direction = a5_rng.unit_vector(h);
    LossParams params;
    params.tau = 1.0;
    double min_loss = std::numeric_limits<double>::infinity();
    int argmin = -1;
    const int grid_n = 51;
    double floor_bound = 0.0;
    for (int i = 0; i < grid_n; ++i) {
      const double g = floor_k + (1.0 - floor_k) * i / (grid_n - 1);
      const Matrix vertices = make_inscribed_simplex(direction, c, g, a5_rng.seed());
      const CollapsedConfig config = make_collapsed_config(vertices, n_per_class);
      const BatchPlan plan = build_batch_plan(config.fs.labels, config.batches);
      const double loss = supcon_total(config.fs, config.batches, params);
      if (i == 0) floor_bound = theorem_bound(plan, floor_k, rho_z);
      if (loss < min_loss) {
        min_loss = loss;
        argmin = i;
      }
    }
    const bool pass = (min_loss >= floor_bound - 1e-9) && argmin == 0;
    checks.push_back({"below_floor_infimum_at_feasible_edge", pass, min_loss - floor_bound});
  }

  bool all_pass = true;
  for (const Check& c : checks) all_pass = all_pass && c.pass;

  // Worked example: an exact equality configuration at the plan's threshold,
  // its equality report, and the bound it attains.
  Json example;
  {
    const RegionPlan plan = make_region_plan(tasks, classes, dim, margin, seed);
    Rng ex_rng = rng.child(9);
    const Vector direction = ex_rng.unit_vector(dim);
    const Matrix vertices = make_inscribed_simplex(direction, classes, plan.k, ex_rng.seed());
    const CollapsedConfig config = make_collapsed_config(vertices, 2);
    const BatchPlan batch_plan = build_batch_plan(config.fs.labels, config.batches);
    LossParams params;
    params.tau = 1.0;
    example["k"] = plan.k;
    example["bound"] = theorem_bound(batch_plan, plan.k, rho_z);
    example["loss"] = supcon_total(config.fs, config.batches, params);
    example["equality"] = to_json(equality_check(config.fs, plan.k, 1e-9));
  }

  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "verify";
  j["config"] = cfg.echo();
  j["checks"] = checks_to_json(checks);
  j["min_bound_slack"] = min_bound_slack;
  j["equality_example"] = std::move(example);
  j["pass"] = all_pass;
  write_text_file(out / "verify_report.json", j.dump(2) + "\n");
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// toy
// ---------------------------------------------------------------------------

namespace {

LossMode loss_mode_from(const std::string& name) {
  if (name == "supcon") return LossMode::supcon;
  if (name == "range_only") return LossMode::range_only;
  if (name == "r2scl") return LossMode::r2scl;
  if (name == "gplasc") return LossMode::gplasc;
  throw ConfigError("mode must be one of supcon|range_only|r2scl|gplasc, got '" + name + "'");
}

}  // namespace

int cmd_toy(const ConfigMap& cfg, const std::filesystem::path& out) {
  cfg.restrict_keys({"mode", "classes", "points_per_class", "dim", "steps", "lr", "tau",
                     "lambda_range", "lambda_position", "seed", "snapshot_every", "continual",
                     "freeze_past", "task_index", "plan_tasks", "plan_margin", "plan_threshold",
                     "plan_seed", "center_mode", "margin"});
  ToyConfig toy;
  toy.loss_mode = loss_mode_from(cfg.get_string("mode", "supcon"));
  toy.classes = cfg.get_int("classes", 3);
  toy.n_per_class = cfg.get_int("points_per_class", 10);
  toy.dim = cfg.get_int("dim", 3);
  toy.steps = cfg.get_int("steps", 5000);
  toy.lr = cfg.get_double("lr", 0.05);
  toy.loss.tau = cfg.get_double("tau", 1.0);
  toy.loss.lambda_range = cfg.get_double("lambda_range", 1.0);
  toy.loss.lambda_position = cfg.get_double("lambda_position", 1.0);
  toy.seed = cfg.get_u64("seed", 1);
  toy.snapshot_every = cfg.get_int("snapshot_every", 0);
  toy.task_index = cfg.get_int("task_index", 0);
  const bool continual = cfg.get_bool("continual", false);
  const bool freeze_past = cfg.get_bool("freeze_past", true);

  const bool needs_plan = continual || toy.loss_mode != LossMode::supcon;
  if (needs_plan) {
    const int plan_tasks = cfg.get_int("plan_tasks", continual ? 3 : 2);
    const std::uint64_t plan_seed = cfg.get_u64("plan_seed", 7);
    const CenterMode mode = center_mode_from(cfg.get_string("center_mode", "scaled"));
    double margin = 0.0;
    if (cfg.has("plan_threshold")) {
      if (cfg.has("plan_margin"))
        throw ConfigError("plan_margin and plan_threshold are mutually exclusive");
      const double k = cfg.get_double("plan_threshold", 0.0);
      const RegionPlan probe =
          make_region_plan(plan_tasks, toy.classes, toy.dim, 0.0, plan_seed, mode);
      margin = margin_for_threshold(k, probe.k_min);
      if (margin < 0.0 || margin > 1.0)
        throw ConfigError("plan_threshold " + format_double(k) +
                          " is outside the reachable range for this plan");
    } else if (cfg.has("plan_margin")) {
      margin = cfg.get_double("plan_margin", 0.0);
    } else {
      margin = cfg.get_double("margin", 0.0);  // --margin flag alias
    }
    toy.plan = make_region_plan(plan_tasks, toy.classes, toy.dim, margin, plan_seed, mode);
  }

  Json result;
  if (!continual) {
    const Trajectory traj = run_toy(toy);
    const FeatureSet& fs = traj.final_features;
    const double k_ref = toy.plan ? toy.plan->k : -1.0 / (toy.classes - 1);
    const PairStats stats = pair_stats(fs);
    result["final_loss"] = to_json(traj.losses.back());
    Json cross;
    cross["mean"] = stats.intra_cross_mean;
    cross["min"] = stats.intra_cross_min;
    cross["max"] = stats.intra_cross_max;
    result["cross_class_inner"] = std::move(cross);
    result["k_reference"] = k_ref;
    result["equality"] = to_json(equality_check(fs, k_ref, 5e-2));
    write_text_file(out / "loss_curve.csv", loss_curve_csv(traj.losses));
    if (!traj.snapshots.empty())
      write_text_file(out / "snapshots.csv", snapshots_csv(traj));
    write_text_file(out / "points.csv", point_cloud_csv(fs));
    result["files"] = Json::array({"loss_curve.csv", "points.csv"});
  } else {
    const ContinualToyResult run = run_continual_toy(*toy.plan, toy, freeze_past);
    const FeatureSet& global = run.global;
    const PairStats stats = pair_stats(global);
    Json per_task = Json::array();
    std::vector<Matrix> clouds;
    for (int t = 0; t < toy.plan->task_count_max; ++t) {
      const FeatureSet sub = subset_by_task(global, t);
      clouds.push_back(sub.features);
      Json entry;
      const Vector prototype = sub.features.colwise().mean().transpose();
      entry["prototype_error"] = (prototype - toy.plan->center(t)).norm();
      entry["equality"] = to_json(equality_check(sub, toy.plan->k, 5e-2));
      per_task.push_back(std::move(entry));
      write_text_file(out / ("loss_curve_task" + std::to_string(t) + ".csv"),
                      loss_curve_csv(run.per_task[static_cast<std::size_t>(t)].losses));
    }
    OverlapConfig ocfg;
    const Matrix om = overlap_matrix(clouds, ocfg);
    double mean_overlap = 0.0;
    int pairs = 0;
    for (int i = 0; i < om.rows(); ++i)
      for (int jj = i + 1; jj < om.cols(); ++jj) {
        mean_overlap += om(i, jj);
        ++pairs;
      }
    if (pairs > 0) mean_overlap /= pairs;
    result["per_task"] = std::move(per_task);
    result["cross_task_max_inner"] = stats.inter_task_max;
    result["mean_pairwise_overlap"] = mean_overlap;
    write_text_file(out / "overlap_matrix.csv", overlap_matrix_csv(om));
    write_text_file(out / "points.csv", point_cloud_csv(global));
    result["files"] = Json::array({"points.csv", "overlap_matrix.csv"});
  }

  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "toy";
  j["config"] = cfg.echo();
  if (toy.plan) j["plan"] = to_json(*toy.plan);
  j["result"] = std::move(result);
  write_text_file(out / "toy_report.json", j.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// continual
// ---------------------------------------------------------------------------

namespace {

const std::set<std::string> kContinualKeys = {
    "methods", "tasks", "classes_per_task", "input_dim", "feature_dim", "hidden",
    "n_train_per_class", "n_test_per_class", "sigma", "margin", "center_mode", "buffer",
    "epochs", "batch_size", "lr", "weight_decay", "momentum", "tau", "lambda_range",
    "lambda_position", "lambda_distill", "ird_tau_star", "seed"};

struct ContinualSetup {
  std::vector<Method> methods;
  TaskStream stream;
  RegionPlan plan;
  HarnessConfig harness;  // method filled in per run
};

ContinualSetup continual_setup(const ConfigMap& cfg) {
  ContinualSetup setup;
  for (const std::string& name : cfg.get_string_list("methods", "supcon,gplasc"))
    setup.methods.push_back(method_from_name(name));
  const int tasks = cfg.get_int("tasks", 5);
  const int classes = cfg.get_int("classes_per_task", 2);
  const int input_dim = cfg.get_int("input_dim", 8);
  const int feature_dim = cfg.get_int("feature_dim", 6);
  const double sigma = cfg.get_double("sigma", 0.3);
  const int n_train = cfg.get_int("n_train_per_class", 40);
  const int n_test = cfg.get_int("n_test_per_class", 20);
  const double margin = cfg.get_double("margin", 0.5);
  const CenterMode mode = center_mode_from(cfg.get_string("center_mode", "scaled"));
  const std::uint64_t seed = cfg.get_u64("seed", 1);

  Rng root(seed);
  setup.stream = make_stream(tasks, classes, input_dim, n_train, n_test, sigma,
                             root.child(1).seed());
  setup.plan = make_region_plan(tasks, classes, feature_dim, margin, root.child(2).seed(), mode);

  HarnessConfig& h = setup.harness;
  h.plan = setup.plan;
  h.hidden = cfg.get_int("hidden", 32);
  h.loss.tau = cfg.get_double("tau", 0.1);
  h.loss.lambda_range = cfg.get_double("lambda_range", 1.0);
  h.loss.lambda_position = cfg.get_double("lambda_position", 1.0);
  h.loss.lambda_distill = cfg.get_double("lambda_distill", 1.0);
  h.ird_tau_star = cfg.get_double("ird_tau_star", 0.1);
  h.buffer_capacity = cfg.get_int("buffer", 20);
  h.epochs = cfg.get_int("epochs", 20);
  h.batch_size = cfg.get_int("batch_size", 16);
  h.lr = cfg.get_double("lr", 0.05);
  h.weight_decay = cfg.get_double("weight_decay", 0.0);
  h.momentum = cfg.get_double("momentum", 0.9);
  h.seed = root.child(3).seed();
  return setup;
}

double final_row_mean(const std::vector<std::vector<double>>& acc) {
  if (acc.empty()) return 0.0;
  const auto& row = acc.back();
  double sum = 0.0;
  for (double v : row) sum += v;
  return sum / static_cast<double>(row.size());
}

}  // namespace

int cmd_continual(const ConfigMap& cfg, const std::filesystem::path& out) {
  cfg.restrict_keys(kContinualKeys);
  ContinualSetup setup = continual_setup(cfg);

  Json methods_json = Json::object();
  std::map<std::string, double> final_cil;
  for (Method method : setup.methods) {
    HarnessConfig hc = setup.harness;
    hc.method = method;
    const RunReport report = run_continual(setup.stream, hc);
    const std::string name = method_name(method);

    Json run_json = to_json(report);
    run_json["config"] = cfg.echo();
    Json curve_files = Json::array();
    for (std::size_t t = 0; t < report.loss_curves.size(); ++t) {
      const std::string file = "loss_curve_" + name + "_task" + std::to_string(t) + ".csv";
      write_text_file(out / file, loss_curve_csv(report.loss_curves[t]));
      curve_files.push_back(file);
    }
    run_json["loss_curves"] = std::move(curve_files);
    write_text_file(out / ("run_" + name + ".json"), run_json.dump(2) + "\n");

    Matrix om(setup.stream.task_count, setup.stream.task_count);
    for (int t = 0; t < setup.stream.task_count; ++t)
      for (int c = 0; c < setup.stream.task_count; ++c)
        om(t, c) = report.per_task[static_cast<std::size_t>(t)].overlap_row[static_cast<std::size_t>(c)];
    write_text_file(out / ("overlap_" + name + ".csv"), overlap_matrix_csv(om));

    Json summary;
    summary["final_cil_mean"] = final_row_mean(report.acc_cil);
    summary["final_til_mean"] = final_row_mean(report.acc_til);
    summary["forgetting"] = report.forgetting_cil;
    summary["report_file"] = "run_" + name + ".json";
    methods_json[name] = std::move(summary);
    final_cil[name] = final_row_mean(report.acc_cil);
  }

  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "continual";
  j["config"] = cfg.echo();
  j["plan"] = to_json(setup.plan);
  j["methods"] = std::move(methods_json);
  if (final_cil.count("gplasc") && final_cil.count("supcon"))
    j["gplasc_cil_minus_supcon_cil"] = final_cil["gplasc"] - final_cil["supcon"];
  write_text_file(out / "continual_report.json", j.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

int cmd_sweep(const ConfigMap& cfg, const std::filesystem::path& out) {
  std::set<std::string> keys = kContinualKeys;
  keys.insert("sweep");
  keys.insert("sweep_values");
  cfg.restrict_keys(keys);
  const std::string axis = cfg.get_string("sweep", "margin");
  if (axis != "margin" && axis != "seed")
    throw ConfigError("sweep must be 'margin' or 'seed', got '" + axis + "'");
  const std::string default_values =
      axis == "margin" ? "0,0.05,0.1,0.15,0.2,0.3,0.5" : "1,2,3,4,5";
  const std::vector<double> values = cfg.get_double_list("sweep_values", default_values);

  Json rows = Json::array();
  std::string csv = "value,method,final_cil_mean,final_til_mean,forgetting\n";
  for (double value : values) {
    ConfigMap point = cfg;
    if (axis == "margin")
      point.set("margin", format_double(value));
    else
      point.set("seed", std::to_string(static_cast<std::uint64_t>(value)));
    ContinualSetup setup = continual_setup(point);
    Json row;
    row["value"] = value;
    Json per_method = Json::object();
    for (Method method : setup.methods) {
      HarnessConfig hc = setup.harness;
      hc.method = method;
      const RunReport report = run_continual(setup.stream, hc);
      Json m;
      const double cil = final_row_mean(report.acc_cil);
      const double til = final_row_mean(report.acc_til);
      m["final_cil_mean"] = cil;
      m["final_til_mean"] = til;
      m["forgetting"] = report.forgetting_cil;
      per_method[method_name(method)] = std::move(m);
      csv += format_double(value) + "," + method_name(method) + "," + format_double(cil) +
             "," + format_double(til) + "," + format_double(report.forgetting_cil) + "\n";
    }
    row["methods"] = std::move(per_method);
    rows.push_back(std::move(row));
  }

  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "sweep";
  j["config"] = cfg.echo();
  j["rows"] = std::move(rows);
  write_text_file(out / "sweep_report.json", j.dump(2) + "\n");
  write_text_file(out / "sweep.csv", csv);
  return 0;
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"geometry-constrained contrastive learning toolkit"};
  app.require_subcommand(1);

  int etf_dim = 3, etf_count = 3;
  std::uint64_t etf_seed = 7;
  std::string etf_out = "out";
  CLI::App* etf = app.add_subcommand("etf", "construct and validate a simplex ETF");
  etf->add_option("--dim", etf_dim, "ambient dimension");
  etf->add_option("--count", etf_count, "vertex count");
  etf->add_option("--seed", etf_seed, "construction seed");
  etf->add_option("--out", etf_out, "output directory");

  struct SubArgs {
    std::string config;
    std::string out = "out";
    std::string method;
    std::uint64_t seed = 0;
    double margin = 0.0;
    int tasks = 0, classes = 0, dim = 0, buffer = 0, trials = 0;
    CLI::App* sub = nullptr;
    CLI::Option *o_seed, *o_margin, *o_tasks, *o_classes, *o_dim, *o_buffer, *o_method,
        *o_trials;
  };
  auto add_common = [&](const std::string& name, const std::string& desc) {
    SubArgs args;
    args.sub = app.add_subcommand(name, desc);
    args.sub->add_option("--config", args.config, "flat key=value config file");
    args.sub->add_option("--out", args.out, "output directory");
    args.o_seed = args.sub->add_option("--seed", args.seed, "override seed");
    args.o_margin = args.sub->add_option("--margin", args.margin, "override margin");
    args.o_tasks = args.sub->add_option("--tasks", args.tasks, "override task count");
    args.o_classes = args.sub->add_option("--classes", args.classes, "override class count");
    args.o_dim = args.sub->add_option("--dim", args.dim, "override feature dimension");
    args.o_buffer = args.sub->add_option("--buffer", args.buffer, "override buffer capacity");
    args.o_method = args.sub->add_option("--method", args.method, "override method list");
    args.o_trials = args.sub->add_option("--trials", args.trials, "override trial count");
    return args;
  };
  SubArgs verify = add_common("verify", "run the bound/equality/feasibility suite");
  SubArgs toy = add_common("toy", "optimize a raw point configuration on the sphere");
  SubArgs continual = add_common("continual", "run the continual-learning harness");
  SubArgs sweep = add_common("sweep", "sweep margins or seeds through the harness");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  auto load_config = [](const SubArgs& args, const char* tasks_key, const char* classes_key,
                        const char* dim_key) {
    ConfigMap cfg = args.config.empty() ? ConfigMap() : ConfigMap::parse_file(args.config);
    if (args.o_seed->count()) cfg.set("seed", std::to_string(args.seed));
    if (args.o_margin->count()) cfg.set("margin", format_double(args.margin));
    if (args.o_tasks->count()) cfg.set(tasks_key, std::to_string(args.tasks));
    if (args.o_classes->count()) cfg.set(classes_key, std::to_string(args.classes));
    if (args.o_dim->count()) cfg.set(dim_key, std::to_string(args.dim));
    if (args.o_buffer->count()) cfg.set("buffer", std::to_string(args.buffer));
    if (args.o_method->count()) cfg.set("methods", args.method);
    if (args.o_trials->count()) cfg.set("trials", std::to_string(args.trials));
    return cfg;
  };

  try {
    if (etf->parsed()) return cmd_etf(etf_dim, etf_count, etf_seed, etf_out);
    if (verify.sub->parsed())
      return cmd_verify(load_config(verify, "tasks", "classes", "dim"), verify.out);
    if (toy.sub->parsed())
      return cmd_toy(load_config(toy, "plan_tasks", "classes", "dim"), toy.out);
    if (continual.sub->parsed())
      return cmd_continual(load_config(continual, "tasks", "classes_per_task", "feature_dim"),
                           continual.out);
    if (sweep.sub->parsed())
      return cmd_sweep(load_config(sweep, "tasks", "classes_per_task", "feature_dim"),
                       sweep.out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace gplasc
