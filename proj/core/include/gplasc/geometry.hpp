// ============================================================================
// geometry.hpp - simplex ETF construction, feasibility, and region planning
//
// A simplex ETF is K unit vectors with zero centroid and all pairwise inner
// products equal to -1/(K-1). Region plans pre-allocate one such vertex per
// task as a fixed region center, with a shared similarity threshold k that
// keeps each task's feature region inside its own spherical cap.
// ============================================================================
#pragma once

#include "gplasc/common.hpp"

#include <cstdint>

namespace gplasc {

struct EtfFrame {
  int dim = 0;      // ambient dimension h
  Matrix vertices;  // K x h, rows are unit vertices

  int count() const { return static_cast<int>(vertices.rows()); }
};

// Measured deviations from the three simplex conditions: zero centroid,
// common radius (about the centroid), and equiangular inner products.
struct SimplexReport {
  double centroid_norm = 0.0;
  double radius = 0.0;        // mean distance to the centroid
  double radius_spread = 0.0;
  double inner_product_spread = 0.0;
  double common_inner_product = 0.0;

  bool passes(double tol) const {
    return centroid_norm <= tol && radius_spread <= tol && inner_product_spread <= tol;
  }
};

struct GramFeasibility {
  bool feasible = false;
  double lambda1 = 0.0;  // 1 + k(n-1)
  double lambda2 = 0.0;  // 1 - k, multiplicity n-1
};

enum class CenterMode {
  scaled,    // P_fix^t = sqrt(1-rho^2) * vertex_t (attainable prototype norm)
  unscaled,  // P_fix^t = vertex_t
};

struct RegionPlan {
  int task_count_max = 1;    // T
  int classes_per_task = 2;  // C
  int dim = 0;               // h
  double margin = 0.0;
  double theta_etf = 0.0;    // arccos(-1/(T-1)); 0 when T == 1
  double k_min = 0.0;        // tangency threshold
  double k = 0.0;            // effective threshold after margin + clipping
  bool k_clipped = false;
  double rho = 0.0;          // intra-task inscribed radius
  CenterMode center_mode = CenterMode::scaled;
  EtfFrame etf;              // K = T vertices (single basis vertex when T == 1)
  Matrix centers_fixed;      // T x h, rows are P_fix^t

  Vector center(int task) const { return centers_fixed.row(task); }
};

// Deterministic simplex ETF of K unit vertices in R^h (h >= K-1). The
// orthonormal basis comes from a seeded Gaussian matrix via QR; for the
// tight case h = K-1 the frame is built in R^K and carried isometrically
// into the complement of the basis-mean direction.
EtfFrame make_simplex_etf(int h, int K, std::uint64_t seed);

// Pure measurement of the simplex conditions for >= 2 points (rows).
SimplexReport check_simplex(const Matrix& points);

// Closed-form eigenvalues of the n x n Gram matrix (1-k)I + k11^T and the
// PSD + embedding-dimension feasibility verdict.
GramFeasibility gram_feasibility(int n, double k, int h);

// rho = sqrt((1 - 1/C)(1 - k)); requires -1/(C-1) <= k <= 1.
double simplex_radius(int classes, double k);

// Global pre-allocation for a task sequence: inter-task ETF, tangency
// threshold k_min, margin-interpolated k, intra-task radius, fixed centers.
RegionPlan make_region_plan(int tasks, int classes, int h, double margin,
                            std::uint64_t seed, CenterMode mode = CenterMode::scaled);

// Margin that produces threshold k under k = (1-k_min)*margin + k_min.
double margin_for_threshold(double k, double k_min);

// C unit vectors with pairwise inner products exactly k whose mean is
// sqrt(1-rho^2) * direction: the equality configuration of the constrained
// contrastive bound. Requires h >= C (h >= C-1 when k = -1/(C-1)).
Matrix make_inscribed_simplex(const Vector& direction, int classes, double k,
                              std::uint64_t seed);

// Orthonormal basis of the hyperplane orthogonal to u, as h x (h-1) columns.
Matrix orthonormal_complement(const Vector& u);

}  // namespace gplasc
