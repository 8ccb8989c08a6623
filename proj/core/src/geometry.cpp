#include "gplasc/geometry.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gplasc {

namespace {

// Orthonormal columns from a seeded Gaussian matrix, sign-fixed so the R
// diagonal is nonnegative.
Matrix seeded_orthonormal(int rows, int cols, Rng& rng) {
  Matrix g = rng.normal_matrix(rows, cols);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  const Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (int c = 0; c < cols; ++c) {
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  }
  return q;
}

// E = sqrt(K/(K-1)) * U * (I_K - (1/K) 1 1^T); columns are the K vertices.
Matrix etf_from_basis(const Matrix& u) {
  const int k = static_cast<int>(u.cols());
  const double scale = std::sqrt(static_cast<double>(k) / (k - 1));
  Matrix centering = Matrix::Identity(k, k) - Matrix::Constant(k, k, 1.0 / k);
  return scale * u * centering;
}

}  // namespace

Matrix orthonormal_complement(const Vector& u) {
  const int h = static_cast<int>(u.size());
  Vector w = u.normalized();
  // Householder vector mapping e_axis -> w, with the axis picked for stability.
  int axis = 0;
  w.cwiseAbs().maxCoeff(&axis);
  Vector v = w;
  v[axis] += (w[axis] >= 0.0 ? 1.0 : -1.0);
  v /= v.norm();
  Matrix reflect = Matrix::Identity(h, h) - 2.0 * v * v.transpose();
  // Columns of the reflection other than `axis` are orthonormal and span w^T.
  Matrix basis(h, h - 1);
  int out = 0;
  for (int c = 0; c < h; ++c) {
    if (c == axis) continue;
    basis.col(out++) = reflect.col(c);
  }
  return basis;
}

EtfFrame make_simplex_etf(int h, int K, std::uint64_t seed) {
  if (K < 2) throw std::invalid_argument("make_simplex_etf: need K >= 2");
  if (h < K - 1)
    throw DimensionError("make_simplex_etf: dimension " + std::to_string(h) +
                         " too small for " + std::to_string(K) + " vertices (need h >= K-1)");
  Rng rng(seed);
  EtfFrame frame;
  frame.dim = h;
  if (h >= K) {
    const Matrix u = seeded_orthonormal(h, K, rng);
    frame.vertices = etf_from_basis(u).transpose();
  } else {
    // h = K-1: build in R^K, then drop the normal direction U*1/sqrt(K),
    // which every vertex is orthogonal to.
    const Matrix u = seeded_orthonormal(K, K, rng);
    const Matrix e = etf_from_basis(u);
    const Vector normal = u * Vector::Ones(K) / std::sqrt(static_cast<double>(K));
    const Matrix basis = orthonormal_complement(normal);  // K x (K-1)
    frame.vertices = (basis.transpose() * e).transpose();
  }
  return frame;
}

SimplexReport check_simplex(const Matrix& points) {
  const int n = static_cast<int>(points.rows());
  if (n < 2) throw std::invalid_argument("check_simplex: need at least 2 points");
  SimplexReport report;
  const Vector centroid = points.colwise().mean();
  report.centroid_norm = centroid.norm();

  double r_min = std::numeric_limits<double>::infinity();
  double r_max = 0.0;
  double r_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = (points.row(i).transpose() - centroid).norm();
    r_min = std::min(r_min, r);
    r_max = std::max(r_max, r);
    r_sum += r;
  }
  report.radius = r_sum / n;
  report.radius_spread = r_max - r_min;

  double g_min = std::numeric_limits<double>::infinity();
  double g_max = -std::numeric_limits<double>::infinity();
  double g_sum = 0.0;
  int pairs = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double g = points.row(i).dot(points.row(j));
      g_min = std::min(g_min, g);
      g_max = std::max(g_max, g);
      g_sum += g;
      ++pairs;
    }
  }
  report.inner_product_spread = g_max - g_min;
  report.common_inner_product = g_sum / pairs;
  return report;
}

GramFeasibility gram_feasibility(int n, double k, int h) {
  if (n < 2) throw std::invalid_argument("gram_feasibility: need n >= 2");
  GramFeasibility out;
  out.lambda1 = 1.0 + k * (n - 1);
  out.lambda2 = 1.0 - k;
  constexpr double kPsdTol = 1e-12;
  out.feasible = out.lambda1 >= -kPsdTol && out.lambda2 >= -kPsdTol && h >= n - 1;
  return out;
}

double simplex_radius(int classes, double k) {
  if (classes < 2) throw std::invalid_argument("simplex_radius: need C >= 2");
  const double k_floor = -1.0 / (classes - 1);
  constexpr double kTol = 1e-12;
  if (k < k_floor - kTol || k > 1.0 + kTol)
    throw std::invalid_argument("simplex_radius: threshold k out of [" +
                                std::to_string(k_floor) + ", 1]");
  const double sq = (1.0 - 1.0 / classes) * (1.0 - k);
  return std::sqrt(std::max(0.0, sq));
}

double margin_for_threshold(double k, double k_min) {
  if (k_min >= 1.0) throw std::invalid_argument("margin_for_threshold: k_min must be < 1");
  return (k - k_min) / (1.0 - k_min);
}

RegionPlan make_region_plan(int tasks, int classes, int h, double margin,
                            std::uint64_t seed, CenterMode mode) {
  if (tasks < 1) throw std::invalid_argument("make_region_plan: need T >= 1");
  if (classes < 2) throw std::invalid_argument("make_region_plan: need C >= 2");
  if (margin < 0.0 || margin > 1.0)
    throw std::invalid_argument("make_region_plan: margin out of [0, 1]");
  const int h_needed = std::max(tasks - 1, classes - 1);
  if (h < h_needed)
    throw DimensionError("make_region_plan: dimension " + std::to_string(h) +
                         " infeasible (need h >= " + std::to_string(h_needed) + ")");

  RegionPlan plan;
  plan.task_count_max = tasks;
  plan.classes_per_task = classes;
  plan.dim = h;
  plan.margin = margin;
  plan.center_mode = mode;

  const double k_floor = -1.0 / (classes - 1);
  if (tasks == 1) {
    // Degenerate plan: plain contrastive geometry, whole sphere, origin center.
    plan.theta_etf = 0.0;
    plan.k_min = k_floor;
    plan.k = k_floor;
    plan.rho = simplex_radius(classes, plan.k);  // = 1
    plan.etf.dim = h;
    plan.etf.vertices = Matrix::Zero(1, h);
    plan.etf.vertices(0, 0) = 1.0;
    plan.centers_fixed = Matrix::Zero(1, h);
    return plan;
  }

  plan.theta_etf = std::acos(-1.0 / (tasks - 1));
  const double s = std::sin(0.5 * plan.theta_etf);
  plan.k_min = 1.0 - (static_cast<double>(classes) / (classes - 1)) * s * s;
  double k = (1.0 - plan.k_min) * margin + plan.k_min;
  if (k < k_floor) {
    plan.k_clipped = k < k_floor - 1e-15;
    k = k_floor;
  }
  plan.k = std::min(k, 1.0);
  plan.rho = simplex_radius(classes, plan.k);

  plan.etf = make_simplex_etf(h, tasks, seed);
  const double center_norm =
      mode == CenterMode::scaled ? std::sqrt(std::max(0.0, 1.0 - plan.rho * plan.rho)) : 1.0;
  plan.centers_fixed = center_norm * plan.etf.vertices;
  return plan;
}

Matrix make_inscribed_simplex(const Vector& direction, int classes, double k,
                              std::uint64_t seed) {
  const int h = static_cast<int>(direction.size());
  const double rho = simplex_radius(classes, k);  // validates k range
  const double center_norm = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  if (center_norm < 1e-12) {
    // k at the Gram floor: the simplex fills the whole sphere, center at 0.
    return make_simplex_etf(h, classes, seed).vertices;
  }
  if (h < classes)
    throw DimensionError("make_inscribed_simplex: need h >= C for k above -1/(C-1)");
  const Vector u = direction.normalized();
  const Matrix basis = orthonormal_complement(u);  // h x (h-1)
  const EtfFrame sub = make_simplex_etf(h - 1, classes, seed);
  Matrix vertices(classes, h);
  for (int c = 0; c < classes; ++c) {
    vertices.row(c) = center_norm * u.transpose() +
                      rho * (basis * sub.vertices.row(c).transpose()).transpose();
  }
  return vertices;
}

}  // namespace gplasc
