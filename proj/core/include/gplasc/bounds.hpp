// ============================================================================
// bounds.hpp - contrastive lower bound, its combinatorics, and equality checks
// ============================================================================
#pragma once

#include "gplasc/common.hpp"
#include "gplasc/losses.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace gplasc {

// Batch membership bookkeeping: counts[y][l] = number of batches in which
// class y appears exactly l times, m[l] = sum over classes. All batches
// share one size b.
struct BatchPlan {
  std::vector<Batch> batches;
  int b = 0;
  std::map<int, std::vector<std::int64_t>> counts;  // class -> counts indexed by l (0..b)
  std::vector<std::int64_t> m;                      // M_l, indexed by l (0..b)
};

BatchPlan build_batch_plan(const std::vector<int>& labels, const std::vector<Batch>& batches);

// sum_{l=2..b} l * M_l * log(l-1 + (b-l) * exp(-(1-k) rho_z^2)).
double theorem_bound(const BatchPlan& plan, double k, double rho_z = 1.0);

// Measured deviations from the equality conditions of the constrained bound:
// intra-class collapse, cross-class inner products pinned at k, and class
// vertices on a sphere of radius sqrt((1-1/C)(1-k)) about the feature mean.
struct EqualityReport {
  double collapse_dev = 0.0;     // max intra-class pairwise distance
  double cross_inner_dev = 0.0;  // max |<z_i,z_j> - k| over cross-class pairs
  Vector center;                 // feature mean
  double radius_dev = 0.0;       // max | ||class_mean - center|| - rho |
  bool pass = false;
  double tol = 0.0;
};

EqualityReport equality_check(const FeatureSet& fs, double k, double tol);

// C unit vectors with pairwise inner products >= k: rejection sampling with
// a bounded attempt budget, then interpolation toward the exact equality
// configuration.
Matrix sample_constrained_vertices(int classes, int h, double k, Rng& rng,
                                   int max_attempts = 100000);

// Collapsed configuration on those vertices: n points per class, plus a
// single full batch over all points.
struct CollapsedConfig {
  FeatureSet fs;
  std::vector<Batch> batches;
};

CollapsedConfig make_collapsed_config(const Matrix& vertices, int n_per_class);

}  // namespace gplasc
