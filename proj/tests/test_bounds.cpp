#include "gplasc/bounds.hpp"

#include "gplasc/geometry.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace gplasc;

TEST_CASE("build_batch_plan: enumerated counts on the reference batch") {
  const std::vector<int> labels = {0, 0, 1, 1};
  const std::vector<Batch> batches = {{0, 1, 2, 3}};
  const BatchPlan plan = build_batch_plan(labels, batches);
  CHECK(plan.b == 4);
  CHECK(plan.counts.at(0)[2] == 1);
  CHECK(plan.counts.at(1)[2] == 1);
  CHECK(plan.m[2] == 2);
  CHECK(plan.m[3] == 0);
  CHECK(plan.m[4] == 0);
}

TEST_CASE("build_batch_plan: two-sample same-class batch and doubling") {
  const std::vector<int> labels = {0, 0};
  const BatchPlan single = build_batch_plan(labels, {{0, 1}});
  CHECK(single.m[2] == 1);
  const BatchPlan doubled = build_batch_plan(labels, {{0, 1}, {0, 1}});
  CHECK(doubled.m[2] == 2);
  CHECK(doubled.counts.at(0)[2] == 2);
}

TEST_CASE("build_batch_plan: matches the enumeration oracle on random batches") {
  Rng rng(404);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 12;
    const int b = 2 + rng.uniform_int(0, 3);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(rng.uniform_int(0, 3));
    std::vector<Batch> batches;
    for (int bb = 0; bb < 4; ++bb) {
      Batch batch;
      for (int i = 0; i < b; ++i) batch.push_back(rng.uniform_int(0, n - 1));
      batches.push_back(batch);
    }
    const BatchPlan plan = build_batch_plan(labels, batches);
    const auto expected = oracle::enum_counts(labels, batches);
    for (const auto& [cls, per_l] : expected) {
      for (const auto& [l, count] : per_l) {
        CHECK(plan.counts.at(cls)[static_cast<std::size_t>(l)] == count);
      }
    }
    // Occurrence bookkeeping: sum_l l * |B_{y,l}| equals total occurrences.
    std::map<int, long> occurrences;
    for (const Batch& batch : batches)
      for (int idx : batch) ++occurrences[labels[static_cast<std::size_t>(idx)]];
    for (const auto& [cls, per_l] : plan.counts) {
      long total = 0;
      for (int l = 1; l <= plan.b; ++l)
        total += static_cast<long>(l) * per_l[static_cast<std::size_t>(l)];
      CHECK(total == occurrences[cls]);
    }
  }
}

TEST_CASE("build_batch_plan: ragged batches are rejected") {
  const std::vector<int> labels = {0, 0, 1};
  CHECK_THROWS_AS(build_batch_plan(labels, {{0, 1}, {0, 1, 2}}), std::invalid_argument);
}

TEST_CASE("theorem_bound: degenerate l = b batches") {
  const std::vector<int> labels = {0, 0, 0, 1, 1, 1};
  const BatchPlan plan = build_batch_plan(labels, {{0, 1, 2}, {3, 4, 5}});
  // Both batches are single-class with l = b = 3: the exponential factor is
  // multiplied by zero, so the bound is b * M_b * log(b-1) for any k.
  const double expected = 3.0 * 2.0 * std::log(2.0);
  CHECK(theorem_bound(plan, -0.5) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(theorem_bound(plan, 0.9) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("theorem_bound: reduces to the unconstrained corollary at the simplex floor") {
  const std::vector<int> labels = {0, 0, 1, 1, 2, 2};
  const BatchPlan plan = build_batch_plan(labels, {{0, 1, 2, 3, 4, 5}});
  const int classes = 3;
  const double k_floor = -1.0 / (classes - 1);
  // Corollary form: exponent -|Y| rho^2 / (|Y|-1).
  const double corollary =
      2.0 * 3.0 *
      std::log(1.0 + 4.0 * std::exp(-static_cast<double>(classes) / (classes - 1)));
  CHECK(theorem_bound(plan, k_floor, 1.0) == doctest::Approx(corollary).epsilon(1e-12));
}

TEST_CASE("theorem_bound: antipodal plan value matches the collapsed batch loss") {
  const std::vector<int> labels = {0, 0, 1, 1};
  const BatchPlan plan = build_batch_plan(labels, {{0, 1, 2, 3}});
  const double expected = 4.0 * std::log(1.0 + 2.0 * std::exp(-2.0));
  CHECK(theorem_bound(plan, -1.0, 1.0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("theorem_bound: monotone increasing in k whenever some l < b") {
  const std::vector<int> labels = {0, 0, 1, 1};
  const BatchPlan plan = build_batch_plan(labels, {{0, 1, 2, 3}});
  double prev = theorem_bound(plan, -1.0);
  for (int i = 1; i <= 50; ++i) {
    const double k = -1.0 + 2.0 * i / 50.0;
    const double cur = theorem_bound(plan, k);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("equality_check: constructed equality configurations pass at 1e-9") {
  Rng rng(71);
  for (double k : {-0.5, 0.0, 0.3, 0.7}) {
    CAPTURE(k);
    const Vector direction = rng.unit_vector(5);
    const Matrix vertices = make_inscribed_simplex(direction, 3, k, 21);
    const CollapsedConfig config = make_collapsed_config(vertices, 3);
    const EqualityReport report = equality_check(config.fs, k, 1e-9);
    CHECK(report.pass);
    CHECK(report.collapse_dev < 1e-9);
    CHECK(report.cross_inner_dev < 1e-9);
    CHECK(report.radius_dev < 1e-9);
  }
}

TEST_CASE("equality_check: plain unit ETF passes at the simplex floor") {
  const EtfFrame frame = make_simplex_etf(4, 4, 9);
  const CollapsedConfig config = make_collapsed_config(frame.vertices, 2);
  const EqualityReport report = equality_check(config.fs, -1.0 / 3.0, 1e-9);
  CHECK(report.pass);
  CHECK(report.center.norm() < 1e-9);
}

TEST_CASE("equality_check: generic features fail, single class errors") {
  Rng rng(5);
  FeatureSet fs;
  fs.features = rng.normal_matrix(8, 4);
  normalize_rows(fs.features);
  for (int i = 0; i < 8; ++i) {
    fs.labels.push_back(i % 2);
    fs.task_ids.push_back(0);
  }
  const EqualityReport report = equality_check(fs, 0.0, 1e-6);
  CHECK(report.collapse_dev > 1e-6);
  CHECK_FALSE(report.pass);

  FeatureSet mono = fs;
  mono.labels.assign(8, 0);
  CHECK_THROWS_AS(equality_check(mono, 0.0, 1e-6), std::invalid_argument);
}

TEST_CASE("bound property: 200 constrained collapsed configurations respect the bound") {
  Rng rng(2024);
  LossParams params;
  params.tau = 1.0;
  const double k_values[4] = {-0.5, 0.0, 0.3, 0.7};
  double min_slack = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 200; ++trial) {
    const double k = k_values[trial % 4];
    int classes = 0;
    do {
      classes = rng.uniform_int(2, 4);
    } while (k < -1.0 / (classes - 1));
    const int h = rng.uniform_int(classes, 6);
    const int n_per_class = rng.uniform_int(2, 4);
    const Matrix vertices = sample_constrained_vertices(classes, h, k, rng);
    const CollapsedConfig config = make_collapsed_config(vertices, n_per_class);
    const BatchPlan plan = build_batch_plan(config.fs.labels, config.batches);
    const double loss = supcon_total(config.fs, config.batches, params);
    min_slack = std::min(min_slack, loss - theorem_bound(plan, k));
  }
  CHECK(min_slack >= -1e-9);
}

TEST_CASE("bound property: equality configurations attain the bound within 1e-9") {
  Rng rng(909);
  LossParams params;
  params.tau = 1.0;
  const double k_values[4] = {-0.5, 0.0, 0.3, 0.7};
  for (int trial = 0; trial < 40; ++trial) {
    const double k = k_values[trial % 4];
    int classes = 0;
    do {
      classes = rng.uniform_int(2, 4);
    } while (k < -1.0 / (classes - 1));
    const int h = rng.uniform_int(classes, 6);
    const int n_per_class = rng.uniform_int(2, 4);
    const Vector direction = rng.unit_vector(h);
    const Matrix vertices = make_inscribed_simplex(direction, classes, k, rng.next_u64());
    const CollapsedConfig config = make_collapsed_config(vertices, n_per_class);
    const BatchPlan plan = build_batch_plan(config.fs.labels, config.batches);
    const double loss = supcon_total(config.fs, config.batches, params);
    CHECK(std::abs(loss - theorem_bound(plan, k)) < 1e-9);
  }
}

TEST_CASE("below-floor regime: infimum over feasible Gram values at the feasible edge") {
  const int classes = 3;
  const int h = 4;
  const double floor_k = -1.0 / (classes - 1);
  Rng rng(31);
  const Vector direction = rng.unit_vector(h);
  LossParams params;
  params.tau = 1.0;
  double min_loss = std::numeric_limits<double>::infinity();
  int argmin = -1;
  double floor_bound = 0.0;
  for (int i = 0; i <= 50; ++i) {
    const double g = floor_k + (1.0 - floor_k) * i / 50.0;
    const Matrix vertices = make_inscribed_simplex(direction, classes, g, 77);
    const CollapsedConfig config = make_collapsed_config(vertices, 2);
    const BatchPlan plan = build_batch_plan(config.fs.labels, config.batches);
    const double loss = supcon_total(config.fs, config.batches, params);
    if (i == 0) floor_bound = theorem_bound(plan, floor_k);
    if (loss < min_loss) {
      min_loss = loss;
      argmin = i;
    }
  }
  CHECK(argmin == 0);
  CHECK(min_loss >= floor_bound - 1e-9);
}

TEST_CASE("sample_constrained_vertices: floor holds even in the high-threshold fallback") {
  Rng rng(11);
  for (double k : {0.0, 0.7, 0.9}) {
    CAPTURE(k);
    const Matrix v = sample_constrained_vertices(4, 5, k, rng, 200);
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(v.row(i).norm() - 1.0) < 1e-9);
      for (int j = i + 1; j < 4; ++j) CHECK(v.row(i).dot(v.row(j)) >= k - 1e-9);
    }
  }
}
