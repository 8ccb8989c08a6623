#include "gplasc/cli.hpp"

#include "gplasc/encoder_net.hpp"
#include "gplasc/geometry.hpp"
#include "gplasc/serialize.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <vector>

using namespace gplasc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gplasc_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(std::vector<std::string> args) {
  std::vector<const char*> argv = {"gplasc"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

void write_config(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("cmd_etf: emits a frame whose Gram off-diagonals recompute to -1/2") {
  const fs::path dir = fresh_dir("etf_ok");
  CHECK(run({"etf", "--dim", "3", "--count", "3", "--seed", "7",
             "--out", dir.string()}) == 0);
  const Json j = Json::parse(read_text_file(dir / "etf_frame.json"));
  const Matrix v = matrix_from_json(j.at("frame").at("vertices"));
  for (int i = 0; i < 3; ++i)
    for (int jj = i + 1; jj < 3; ++jj)
      CHECK(v.row(i).dot(v.row(jj)) == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(j.at("simplex_report").at("pass").get<bool>());
}

TEST_CASE("cmd_etf: infeasible dimensions exit 2") {
  const fs::path dir = fresh_dir("etf_bad");
  CHECK(run({"etf", "--dim", "2", "--count", "5", "--seed", "7",
             "--out", dir.string()}) == 2);
}

TEST_CASE("cmd_etf: identical arguments produce byte-identical files") {
  const fs::path a = fresh_dir("etf_rep_a");
  const fs::path b = fresh_dir("etf_rep_b");
  REQUIRE(run({"etf", "--dim", "5", "--count", "4", "--seed", "3", "--out", a.string()}) == 0);
  REQUIRE(run({"etf", "--dim", "5", "--count", "4", "--seed", "3", "--out", b.string()}) == 0);
  CHECK(read_text_file(a / "etf_frame.json") == read_text_file(b / "etf_frame.json"));
}

TEST_CASE("cmd_verify: default suite passes and records nonnegative bound slack") {
  const fs::path dir = fresh_dir("verify_ok");
  CHECK(run({"verify", "--trials", "40", "--out", dir.string()}) == 0);
  const Json j = Json::parse(read_text_file(dir / "verify_report.json"));
  CHECK(j.at("pass").get<bool>());
  CHECK(j.at("min_bound_slack").get<double>() >= -1e-9);
  for (const auto& check : j.at("checks")) CHECK(check.at("pass").get<bool>());
}

TEST_CASE("cmd_verify: zero trials runs only the closed-form checks") {
  const fs::path dir = fresh_dir("verify_zero");
  CHECK(run({"verify", "--trials", "0", "--out", dir.string()}) == 0);
  const Json j = Json::parse(read_text_file(dir / "verify_report.json"));
  for (const auto& check : j.at("checks")) {
    CHECK(check.at("name").get<std::string>().find("trials") == std::string::npos);
  }
}

TEST_CASE("cmd_verify: out-of-range threshold is a usage error") {
  const fs::path dir = fresh_dir("verify_bad_k");
  const fs::path cfg = dir / "verify.cfg";
  write_config(cfg, "k = 1.5\n");
  CHECK(run({"verify", "--config", cfg.string(), "--out", dir.string()}) == 2);
}

TEST_CASE("cmd_toy: short run emits report and sidecars") {
  const fs::path dir = fresh_dir("toy_ok");
  const fs::path cfg = dir / "toy.cfg";
  write_config(cfg,
               "mode = r2scl\n"
               "classes = 3\n"
               "points_per_class = 4\n"
               "dim = 3\n"
               "steps = 50\n"
               "lr = 0.01\n"
               "plan_tasks = 2\n"
               "plan_threshold = 0.7\n"
               "seed = 1\n");
  CHECK(run({"toy", "--config", cfg.string(), "--out", dir.string()}) == 0);
  CHECK(fs::exists(dir / "toy_report.json"));
  CHECK(fs::exists(dir / "loss_curve.csv"));
  CHECK(fs::exists(dir / "points.csv"));
  const Json j = Json::parse(read_text_file(dir / "toy_report.json"));
  CHECK(j.at("plan").at("k").get<double>() == doctest::Approx(0.7));
  CHECK(j.at("config").at("steps").get<std::string>() == "50");
}

TEST_CASE("cmd_toy: malformed configs exit 2 with a line-numbered message") {
  const fs::path dir = fresh_dir("toy_bad");
  const fs::path cfg = dir / "toy.cfg";
  write_config(cfg, "mode = supcon\nsteps equals ten\n");
  CHECK(run({"toy", "--config", cfg.string(), "--out", dir.string()}) == 2);

  write_config(cfg, "mode = supcon\nsteps = banana\n");
  CHECK(run({"toy", "--config", cfg.string(), "--out", dir.string()}) == 2);

  write_config(cfg, "mode = supcon\nnot_a_key = 3\n");
  CHECK(run({"toy", "--config", cfg.string(), "--out", dir.string()}) == 2);

  try {
    ConfigMap::parse_string("mode = supcon\nsteps equals ten\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line == 2);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("cmd_continual: reports are reproducible from their embedded config") {
  const fs::path dir = fresh_dir("continual_ok");
  const fs::path cfg = dir / "continual.cfg";
  write_config(cfg,
               "methods = supcon\n"
               "tasks = 2\n"
               "classes_per_task = 2\n"
               "input_dim = 6\n"
               "feature_dim = 4\n"
               "hidden = 12\n"
               "n_train_per_class = 10\n"
               "n_test_per_class = 5\n"
               "sigma = 0.25\n"
               "margin = 0.5\n"
               "buffer = 8\n"
               "epochs = 6\n"
               "batch_size = 8\n"
               "lr = 0.1\n"
               "seed = 4\n");
  REQUIRE(run({"continual", "--config", cfg.string(), "--out", dir.string()}) == 0);
  CHECK(fs::exists(dir / "continual_report.json"));
  CHECK(fs::exists(dir / "run_supcon.json"));
  CHECK(fs::exists(dir / "overlap_supcon.csv"));
  const std::string first = read_text_file(dir / "continual_report.json");

  // Regenerate a config file from the embedded echo and re-run.
  const Json j = Json::parse(first);
  std::string regenerated;
  for (const auto& [key, value] : j.at("config").items())
    regenerated += key + " = " + value.get<std::string>() + "\n";
  const fs::path dir2 = fresh_dir("continual_rerun");
  const fs::path cfg2 = dir2 / "continual.cfg";
  write_config(cfg2, regenerated);
  REQUIRE(run({"continual", "--config", cfg2.string(), "--out", dir2.string()}) == 0);
  CHECK(read_text_file(dir2 / "continual_report.json") == first);
  CHECK(read_text_file(dir2 / "run_supcon.json") ==
        read_text_file(dir / "run_supcon.json"));
}

TEST_CASE("cmd_continual: flag overrides land in the resolved config") {
  const fs::path dir = fresh_dir("continual_override");
  const fs::path cfg = dir / "continual.cfg";
  write_config(cfg,
               "methods = supcon\n"
               "tasks = 2\n"
               "classes_per_task = 2\n"
               "input_dim = 6\n"
               "feature_dim = 4\n"
               "hidden = 12\n"
               "n_train_per_class = 8\n"
               "n_test_per_class = 4\n"
               "sigma = 0.25\n"
               "margin = 0.5\n"
               "buffer = 8\n"
               "epochs = 4\n"
               "batch_size = 8\n"
               "lr = 0.1\n"
               "seed = 4\n");
  REQUIRE(run({"continual", "--config", cfg.string(), "--out", dir.string(),
               "--seed", "9", "--buffer", "6"}) == 0);
  const Json j = Json::parse(read_text_file(dir / "continual_report.json"));
  CHECK(j.at("config").at("seed").get<std::string>() == "9");
  CHECK(j.at("config").at("buffer").get<std::string>() == "6");
}

TEST_CASE("cmd_sweep: margin sweep emits one row per value") {
  const fs::path dir = fresh_dir("sweep_ok");
  const fs::path cfg = dir / "sweep.cfg";
  write_config(cfg,
               "methods = supcon,gplasc\n"
               "tasks = 2\n"
               "classes_per_task = 2\n"
               "input_dim = 6\n"
               "feature_dim = 4\n"
               "hidden = 12\n"
               "n_train_per_class = 8\n"
               "n_test_per_class = 4\n"
               "sigma = 0.25\n"
               "buffer = 8\n"
               "epochs = 4\n"
               "batch_size = 8\n"
               "lr = 0.1\n"
               "seed = 4\n"
               "sweep = margin\n"
               "sweep_values = 0.1, 0.5\n");
  REQUIRE(run({"sweep", "--config", cfg.string(), "--out", dir.string()}) == 0);
  const Json j = Json::parse(read_text_file(dir / "sweep_report.json"));
  REQUIRE(j.at("rows").size() == 2);
  CHECK(j.at("rows").at(0).at("value").get<double>() == doctest::Approx(0.1));
  CHECK(j.at("rows").at(1).at("methods").contains("gplasc"));
  const std::string csv = read_text_file(dir / "sweep.csv");
  // Header plus 2 values x 2 methods.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("cli: missing subcommand or unknown flags exit 2") {
  CHECK(run({}) == 2);
  CHECK(run({"etf", "--bogus", "1"}) == 2);
  CHECK(run({"toy", "--config", "/nonexistent/path.cfg"}) == 2);
}

TEST_CASE("cmd_toy: divergence exits 1") {
  const fs::path dir = fresh_dir("toy_diverge");
  const fs::path cfg = dir / "toy.cfg";
  write_config(cfg,
               "mode = supcon\n"
               "classes = 2\n"
               "points_per_class = 3\n"
               "dim = 3\n"
               "steps = 3\n"
               "lr = 0.01\n"
               "tau = 1e-300\n"
               "seed = 1\n");
  CHECK(run({"toy", "--config", cfg.string(), "--out", dir.string()}) == 1);
}

TEST_CASE("cmd_toy: snapshot rows carry the flattened point coordinates") {
  const fs::path dir = fresh_dir("toy_snapshots");
  const fs::path cfg = dir / "toy.cfg";
  write_config(cfg,
               "mode = supcon\n"
               "classes = 2\n"
               "points_per_class = 3\n"
               "dim = 3\n"
               "steps = 10\n"
               "lr = 0.01\n"
               "snapshot_every = 5\n"
               "seed = 1\n");
  REQUIRE(run({"toy", "--config", cfg.string(), "--out", dir.string()}) == 0);
  const std::string csv = read_text_file(dir / "snapshots.csv");
  // Header plus snapshots at steps 0, 5 and the final state; each row has
  // step, five loss fields, and 6 points x 3 coordinates.
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 4);
  const auto first_row = csv.substr(csv.find('\n') + 1);
  CHECK(std::count(first_row.begin(), first_row.begin() + static_cast<long>(first_row.find('\n')),
                   ',') == 5 + 18);
}

TEST_CASE("cmd_verify: equality example attains the bound in the report") {
  const fs::path dir = fresh_dir("verify_example");
  REQUIRE(run({"verify", "--trials", "4", "--out", dir.string()}) == 0);
  const Json j = Json::parse(read_text_file(dir / "verify_report.json"));
  const auto& example = j.at("equality_example");
  CHECK(std::abs(example.at("loss").get<double>() - example.at("bound").get<double>()) < 1e-9);
  CHECK(example.at("equality").at("pass").get<bool>());
}

TEST_CASE("serialization: frames, plans, and encoder parameters round-trip") {
  const EtfFrame frame = make_simplex_etf(5, 4, 77);
  const EtfFrame frame2 = etf_frame_from_json(to_json(frame));
  CHECK(frame2.dim == frame.dim);
  CHECK((frame2.vertices - frame.vertices).cwiseAbs().maxCoeff() == 0.0);

  const RegionPlan plan = make_region_plan(4, 3, 6, 0.3, 5);
  const RegionPlan plan2 = region_plan_from_json(to_json(plan));
  CHECK(plan2.k == plan.k);
  CHECK(plan2.rho == plan.rho);
  CHECK(plan2.k_min == plan.k_min);
  CHECK(plan2.theta_etf == plan.theta_etf);
  CHECK(plan2.center_mode == plan.center_mode);
  CHECK((plan2.centers_fixed - plan.centers_fixed).cwiseAbs().maxCoeff() == 0.0);
  CHECK((plan2.etf.vertices - plan.etf.vertices).cwiseAbs().maxCoeff() == 0.0);

  const EncoderParams params = init_encoder(6, 9, 4, 13);
  const EncoderParams params2 = encoder_params_from_json(to_json(params));
  CHECK((params2.w1 - params.w1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((params2.b1 - params.b1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((params2.w2 - params.w2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((params2.b2 - params.b2).cwiseAbs().maxCoeff() == 0.0);
}
