// ============================================================================
// sphere_optimizer.hpp - gradient descent on raw unit-sphere configurations
//
// Full-batch descent with row renormalization after every Euclidean step.
// Reproduces the threshold geometry directly on optimized point sets, with
// no encoder in the loop.
// ============================================================================
#pragma once

#include "gplasc/geometry.hpp"
#include "gplasc/losses.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace gplasc {

enum class LossMode { supcon, range_only, r2scl, gplasc };

struct ToyConfig {
  int n_per_class = 10;
  int classes = 3;
  int dim = 3;
  int steps = 5000;
  double lr = 0.05;
  LossMode loss_mode = LossMode::supcon;
  std::optional<RegionPlan> plan;  // required for modes other than supcon
  int task_index = 0;              // which plan center a single run targets
  LossParams loss{1.0, 1.0, 1.0, 0.0, -1.0};  // tau=1 for bound comparison
  std::uint64_t seed = 1;
  int snapshot_every = 0;  // <= 0 disables snapshots
};

struct Trajectory {
  std::vector<LossBreakdown> losses;             // per step, plus the final state
  std::vector<std::pair<int, Matrix>> snapshots; // (step, full point matrix)
  FeatureSet final_features;
};

struct ContinualToyResult {
  std::vector<Trajectory> per_task;
  FeatureSet global;  // all tasks' points, globally distinct labels
};

// n rows from an isotropic normal, renormalized; deterministic per seed.
FeatureSet init_points(int n, int h, std::uint64_t seed);

// Single-task descent under the configured loss mode.
Trajectory run_toy(const ToyConfig& cfg);

// Sequential per-task descent under a shared plan. With freeze_past, earlier
// tasks' points are held fixed and each task trains on its own points only;
// otherwise earlier points join the batch and keep receiving gradients.
ContinualToyResult run_continual_toy(const RegionPlan& plan, const ToyConfig& per_task,
                                     bool freeze_past = true);

}  // namespace gplasc
