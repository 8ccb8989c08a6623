#include "gplasc/continual.hpp"

#include "gplasc/geometry.hpp"
#include "gplasc/serialize.hpp"

#include <doctest.h>

using namespace gplasc;

namespace {

HarnessConfig small_harness(std::uint64_t seed) {
  HarnessConfig hc;
  hc.plan = make_region_plan(3, 2, 4, 0.5, 11);
  hc.hidden = 16;
  hc.loss.tau = 0.1;
  hc.loss.lambda_range = 1.0;
  hc.loss.lambda_position = 5.0;
  hc.loss.lambda_distill = 1.0;
  hc.buffer_capacity = 12;
  hc.epochs = 12;
  hc.batch_size = 8;
  hc.lr = 0.1;
  hc.momentum = 0.9;
  hc.seed = seed;
  return hc;
}

TaskStream small_stream(std::uint64_t seed) {
  return make_stream(3, 2, 6, 12, 8, 0.25, seed);
}

}  // namespace

TEST_CASE("make_stream: determinism, balance, disjoint classes") {
  const TaskStream a = small_stream(4);
  const TaskStream b = small_stream(4);
  REQUIRE(a.tasks.size() == 3);
  for (int t = 0; t < 3; ++t) {
    CHECK((a.tasks[static_cast<std::size_t>(t)].train_x -
           b.tasks[static_cast<std::size_t>(t)].train_x).cwiseAbs().maxCoeff() == 0.0);
    // Per-task labels balanced and drawn from the task's disjoint class set.
    std::map<int, int> counts;
    for (int y : a.tasks[static_cast<std::size_t>(t)].train_y) {
      CHECK(y / 2 == t);
      ++counts[y];
    }
    REQUIRE(counts.size() == 2);
    CHECK(counts.begin()->second == counts.rbegin()->second);
  }
}

TEST_CASE("make_stream: noiseless limit collapses each class onto its mean") {
  const TaskStream stream = make_stream(2, 2, 5, 4, 2, 0.0, 9);
  for (int t = 0; t < 2; ++t) {
    const TaskData& task = stream.tasks[static_cast<std::size_t>(t)];
    for (int i = 0; i < task.train_x.rows(); ++i) {
      const int cls = task.train_y[static_cast<std::size_t>(i)];
      CHECK((task.train_x.row(i) - stream.class_means.row(cls)).norm() == 0.0);
    }
  }
}

TEST_CASE("make_stream: single task never consults a buffer") {
  const TaskStream stream = make_stream(1, 3, 5, 6, 3, 0.2, 2);
  CHECK(stream.task_count == 1);
  CHECK(stream.tasks.size() == 1);
}

TEST_CASE("MemoryBuffer: class-balanced quotas") {
  Rng rng(5);
  MemoryBuffer buf(20);
  Matrix xs = rng.normal_matrix(30, 4);
  std::vector<int> ys;
  for (int i = 0; i < 30; ++i) ys.push_back(i % 2);
  buf.update(xs, ys, 0);
  auto counts = buf.per_class_counts();
  CHECK(counts[0] == 10);
  CHECK(counts[1] == 10);

  Matrix xs2 = rng.normal_matrix(30, 4);
  std::vector<int> ys2;
  for (int i = 0; i < 30; ++i) ys2.push_back(2 + i % 2);
  buf.update(xs2, ys2, 1);
  counts = buf.per_class_counts();
  for (int c = 0; c < 4; ++c) CHECK(counts[c] == 5);
  CHECK(buf.size() == 20);
}

TEST_CASE("MemoryBuffer: ring eviction drops the oldest item of the class") {
  MemoryBuffer buf(3);
  Matrix one(1, 2);
  // Trace: insert items 1, 2, 3 of one class into 3 slots, then item 4
  // evicts item 1, leaving 2, 3, 4.
  for (int v = 1; v <= 4; ++v) {
    one << static_cast<double>(v), 0.0;
    buf.update(one, {0}, 0);
  }
  const auto items = buf.items();
  REQUIRE(items.size() == 3);
  CHECK(items[0].x[0] == 2.0);
  CHECK(items[1].x[0] == 3.0);
  CHECK(items[2].x[0] == 4.0);
}

TEST_CASE("MemoryBuffer: balance invariant after every update") {
  Rng rng(17);
  MemoryBuffer buf(10);
  for (int t = 0; t < 4; ++t) {
    const int n = 7;
    Matrix xs = rng.normal_matrix(n, 3);
    std::vector<int> ys;
    for (int i = 0; i < n; ++i) ys.push_back(t * 2 + i % 2);
    buf.update(xs, ys, t);
    const auto counts = buf.per_class_counts();
    int lo = 1 << 30, hi = 0;
    for (const auto& [cls, c] : counts) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    CHECK(hi - lo <= 1);
    CHECK(buf.size() <= 10);
  }
}

TEST_CASE("run_continual: report structure and invariants") {
  const TaskStream stream = small_stream(6);
  HarnessConfig hc = small_harness(21);
  hc.method = Method::gplasc;
  const RunReport report = run_continual(stream, hc);

  REQUIRE(report.acc_cil.size() == 3);
  REQUIRE(report.acc_til.size() == 3);
  for (int t = 0; t < 3; ++t) {
    // Lower-triangular population: row t has exactly t+1 entries.
    REQUIRE(report.acc_cil[static_cast<std::size_t>(t)].size() ==
            static_cast<std::size_t>(t) + 1);
    for (std::size_t i = 0; i <= static_cast<std::size_t>(t); ++i) {
      CHECK(report.acc_til[static_cast<std::size_t>(t)][i] >=
            report.acc_cil[static_cast<std::size_t>(t)][i]);
      CHECK(report.acc_cil[static_cast<std::size_t>(t)][i] >= 0.0);
      CHECK(report.acc_til[static_cast<std::size_t>(t)][i] <= 1.0);
    }
  }
  REQUIRE(report.per_task.size() == 3);
  for (const TaskReport& tr : report.per_task) {
    REQUIRE(tr.overlap_row.size() == 3);
    CHECK(tr.prototype_error >= 0.0);
  }
  REQUIRE(report.loss_curves.size() == 3);
  CHECK_FALSE(report.loss_curves[0].empty());
  // Distillation activates only from the second task on.
  for (const LossBreakdown& bd : report.loss_curves[0]) CHECK(bd.distill == 0.0);
}

TEST_CASE("run_continual: deterministic per seed down to the serialized bytes") {
  const TaskStream stream = small_stream(6);
  HarnessConfig hc = small_harness(33);
  hc.method = Method::gplasc;
  const RunReport a = run_continual(stream, hc);
  const RunReport b = run_continual(stream, hc);
  CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("run_continual: instance-relation distillation path") {
  const TaskStream stream = small_stream(6);
  HarnessConfig hc = small_harness(21);
  hc.method = Method::supcon_ird;
  const RunReport report = run_continual(stream, hc);
  // No teacher during the first task, nonzero relation loss afterwards.
  for (const LossBreakdown& bd : report.loss_curves[0]) CHECK(bd.distill == 0.0);
  double later = 0.0;
  for (const LossBreakdown& bd : report.loss_curves[1]) later += bd.distill;
  CHECK(later > 0.0);
}

TEST_CASE("run_continual: validation errors") {
  const TaskStream stream = small_stream(6);
  HarnessConfig hc = small_harness(21);
  hc.plan = make_region_plan(2, 2, 4, 0.5, 11);  // fewer tasks than the stream
  CHECK_THROWS_AS(run_continual(stream, hc), std::invalid_argument);

  HarnessConfig bad_batch = small_harness(21);
  bad_batch.batch_size = 1;
  CHECK_THROWS_AS(run_continual(stream, bad_batch), std::invalid_argument);
}

TEST_CASE("method names round-trip") {
  for (Method m : {Method::supcon, Method::supcon_ird, Method::gplasc})
    CHECK(method_from_name(method_name(m)) == m);
  CHECK_THROWS_AS(method_from_name("nope"), std::invalid_argument);
}
