#include "gplasc/sphere_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace gplasc {

namespace {

constexpr double kDivergenceCap = 1e12;

struct StepEval {
  LossBreakdown loss;
  Matrix grad;
};

// Loss + gradient of the configured mode over one batch of the feature set.
StepEval evaluate(const FeatureSet& fs, const Batch& batch, LossMode mode,
                  const LossParams& params, const RegionPlan* plan) {
  StepEval eval;
  eval.loss.supcon = supcon_batch(fs, batch, params);
  eval.grad = supcon_batch_grad(fs, batch, params);
  if (mode != LossMode::supcon) {
    if (plan == nullptr)
      throw std::invalid_argument("sphere_optimizer: loss mode requires a region plan");
    eval.loss.range = range_penalty(fs, batch, params.k);
    eval.grad += params.lambda_range * range_penalty_grad(fs, batch, params.k);
  }
  if (mode == LossMode::r2scl || mode == LossMode::gplasc) {
    std::set<int> tasks;
    for (int idx : batch) tasks.insert(fs.task_ids[static_cast<std::size_t>(idx)]);
    for (int task : tasks) {
      eval.loss.position += position_loss(fs, batch, task, plan->center(task));
      eval.grad += params.lambda_position * position_loss_grad(fs, batch, task, plan->center(task));
    }
  }
  eval.loss.total = eval.loss.supcon + params.lambda_range * eval.loss.range +
                    params.lambda_position * eval.loss.position;
  return eval;
}

// Descend on the rows listed in `active`; other rows stay fixed.
Trajectory descend(FeatureSet fs, const Batch& batch, const std::vector<int>& active,
                   LossMode mode, const LossParams& params, const RegionPlan* plan,
                   int steps, double lr, int snapshot_every) {
  Trajectory traj;
  traj.losses.reserve(static_cast<std::size_t>(steps) + 1);
  for (int step = 0; step < steps; ++step) {
    StepEval eval = evaluate(fs, batch, mode, params, plan);
    if (!std::isfinite(eval.loss.total) || std::abs(eval.loss.total) > kDivergenceCap)
      throw DivergenceError("sphere_optimizer: loss diverged at step " + std::to_string(step));
    traj.losses.push_back(eval.loss);
    if (snapshot_every > 0 && step % snapshot_every == 0)
      traj.snapshots.emplace_back(step, fs.features);
    for (int row : active) {
      fs.features.row(row) -= lr * eval.grad.row(row);
      const double norm = fs.features.row(row).norm();
      if (norm == 0.0) {
        fs.features.row(row).setZero();
        fs.features(row, 0) = 1.0;
      } else {
        fs.features.row(row) /= norm;
      }
    }
  }
  StepEval final_eval = evaluate(fs, batch, mode, params, plan);
  if (!std::isfinite(final_eval.loss.total))
    throw DivergenceError("sphere_optimizer: final loss non-finite");
  traj.losses.push_back(final_eval.loss);
  if (snapshot_every > 0) traj.snapshots.emplace_back(steps, fs.features);
  traj.final_features = std::move(fs);
  return traj;
}

}  // namespace

FeatureSet init_points(int n, int h, std::uint64_t seed) {
  if (n < 1 || h < 1) throw std::invalid_argument("init_points: n and h must be >= 1");
  Rng rng(seed);
  FeatureSet fs;
  fs.features = rng.normal_matrix(n, h);
  normalize_rows(fs.features);
  fs.labels.assign(static_cast<std::size_t>(n), 0);
  fs.task_ids.assign(static_cast<std::size_t>(n), 0);
  return fs;
}

Trajectory run_toy(const ToyConfig& cfg) {
  if (cfg.steps < 0 || cfg.lr <= 0.0)
    throw std::invalid_argument("run_toy: need steps >= 0 and lr > 0");
  const int n = cfg.n_per_class * cfg.classes;
  FeatureSet fs = init_points(n, cfg.dim, cfg.seed);
  for (int c = 0; c < cfg.classes; ++c) {
    for (int i = 0; i < cfg.n_per_class; ++i) {
      fs.labels[static_cast<std::size_t>(c * cfg.n_per_class + i)] = c;
      fs.task_ids[static_cast<std::size_t>(c * cfg.n_per_class + i)] = cfg.task_index;
    }
  }
  LossParams params = cfg.loss;
  const RegionPlan* plan = cfg.plan ? &*cfg.plan : nullptr;
  if (plan != nullptr) params.k = plan->k;

  Batch batch(static_cast<std::size_t>(n));
  std::iota(batch.begin(), batch.end(), 0);
  return descend(std::move(fs), batch, batch, cfg.loss_mode, params, plan, cfg.steps,
                 cfg.lr, cfg.snapshot_every);
}

ContinualToyResult run_continual_toy(const RegionPlan& plan, const ToyConfig& per_task,
                                     bool freeze_past) {
  const int tasks = plan.task_count_max;
  const int per_task_n = per_task.n_per_class * per_task.classes;
  ContinualToyResult result;
  result.global.features.resize(0, per_task.dim);

  LossParams params = per_task.loss;
  params.k = plan.k;
  Rng rng(per_task.seed);

  for (int t = 0; t < tasks; ++t) {
    FeatureSet fresh = init_points(per_task_n, per_task.dim, rng.child(t).seed());
    const int base = result.global.size();
    result.global.features.conservativeResize(base + per_task_n, per_task.dim);
    result.global.features.bottomRows(per_task_n) = fresh.features;
    for (int c = 0; c < per_task.classes; ++c) {
      for (int i = 0; i < per_task.n_per_class; ++i) {
        result.global.labels.push_back(t * per_task.classes + c);
        result.global.task_ids.push_back(t);
      }
    }

    Batch batch;
    std::vector<int> active;
    for (int row = base; row < base + per_task_n; ++row) {
      batch.push_back(row);
      active.push_back(row);
    }
    if (!freeze_past) {
      for (int row = 0; row < base; ++row) {
        batch.push_back(row);
        active.push_back(row);
      }
      std::sort(batch.begin(), batch.end());
      std::sort(active.begin(), active.end());
    }

    ToyConfig cfg = per_task;
    Trajectory traj = descend(result.global, batch, active, cfg.loss_mode, params, &plan,
                              cfg.steps, cfg.lr, cfg.snapshot_every);
    result.global.features = traj.final_features.features;
    result.per_task.push_back(std::move(traj));
  }
  return result;
}

}  // namespace gplasc
