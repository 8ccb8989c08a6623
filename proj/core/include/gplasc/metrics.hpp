// ============================================================================
// metrics.hpp - overlap integral, average forgetting, nearest-class-mean
// ============================================================================
#pragma once

#include "gplasc/bounds.hpp"
#include "gplasc/common.hpp"

#include <map>
#include <optional>
#include <set>
#include <vector>

namespace gplasc {

struct OverlapConfig {
  int projection_dim = 3;        // PCA target before KDE
  int grid_resolution = 64;      // per axis, used when projected dim <= 3
  int mc_samples = 20000;        // used when projected dim > 3
  double bandwidth_floor = 1e-3; // Scott's rule floor for degenerate spreads
  double padding_bandwidths = 4.0;
  std::uint64_t mc_seed = 0;
};

// E_O = integral of min(P_A, P_B) for Gaussian KDEs fitted to both point
// sets after a joint PCA; symmetric in its arguments, clipped to [0, 1].
double overlap_eo(const Matrix& a, const Matrix& b, const OverlapConfig& cfg = {});

// Pairwise overlap of per-task feature clouds (symmetric, unit diagonal).
Matrix overlap_matrix(const std::vector<Matrix>& task_features,
                      const OverlapConfig& cfg = {});

// Average forgetting over a lower-triangular accuracy matrix: row t holds
// Acc_{t,i} for i <= t (0-based). Requires at least two tasks.
double forgetting(const std::vector<std::vector<double>>& acc_matrix);

// Fraction of test rows whose nearest class mean (Euclidean) matches the
// label; candidates optionally restricted; ties go to the lowest class index.
double ncm_accuracy(const Matrix& test_features, const std::vector<int>& test_labels,
                    const std::map<int, Vector>& class_means,
                    const std::optional<std::set<int>>& candidates = std::nullopt);

// Simplex-fit diagnostics, re-exported from the bound's equality conditions.
EqualityReport simplex_fit(const FeatureSet& fs, double k, double tol);

}  // namespace gplasc
