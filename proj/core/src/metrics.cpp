#include "gplasc/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gplasc {

namespace {

struct Kde {
  Matrix points;      // n x d (projected)
  Vector bandwidths;  // d, per-axis

  double density(const Vector& x) const {
    const int n = static_cast<int>(points.rows());
    const int d = static_cast<int>(points.cols());
    double norm_const = 1.0;
    for (int a = 0; a < d; ++a) norm_const *= bandwidths[a] * std::sqrt(2.0 * M_PI);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      double q = 0.0;
      for (int a = 0; a < d; ++a) {
        const double t = (x[a] - points(i, a)) / bandwidths[a];
        q += t * t;
      }
      sum += std::exp(-0.5 * q);
    }
    return sum / (n * norm_const);
  }
};

// Scott's factor n^(-1/(d+4)) times the per-axis standard deviation.
Vector scott_bandwidths(const Matrix& points, double floor) {
  const int n = static_cast<int>(points.rows());
  const int d = static_cast<int>(points.cols());
  const double factor = std::pow(static_cast<double>(n), -1.0 / (d + 4));
  Vector bw(d);
  const Vector mean = points.colwise().mean();
  for (int a = 0; a < d; ++a) {
    const double var = (points.col(a).array() - mean[a]).square().sum() / std::max(1, n - 1);
    bw[a] = std::max(std::sqrt(var) * factor, floor);
  }
  return bw;
}

// Joint PCA basis from per-set partial sums (commutative, so symmetric in
// the argument order). Returns dim x target columns.
Matrix joint_pca_basis(const Matrix& a, const Matrix& b, int target, Vector* mean_out) {
  const int dim = static_cast<int>(a.cols());
  const double n = static_cast<double>(a.rows() + b.rows());
  const Vector mean = (a.colwise().sum() + b.colwise().sum()).transpose() / n;
  Matrix cov = Matrix::Zero(dim, dim);
  for (int i = 0; i < a.rows(); ++i) {
    const Vector c = a.row(i).transpose() - mean;
    cov += c * c.transpose();
  }
  Matrix cov_b = Matrix::Zero(dim, dim);
  for (int i = 0; i < b.rows(); ++i) {
    const Vector c = b.row(i).transpose() - mean;
    cov_b += c * c.transpose();
  }
  cov = (cov + cov_b) / n;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  Matrix basis(dim, target);
  for (int c = 0; c < target; ++c) basis.col(c) = solver.eigenvectors().col(dim - 1 - c);
  *mean_out = mean;
  return basis;
}

double integrate_grid(const Kde& ka, const Kde& kb, const OverlapConfig& cfg) {
  const int d = static_cast<int>(ka.points.cols());
  const int res = cfg.grid_resolution;
  Vector lo(d), hi(d);
  for (int a = 0; a < d; ++a) {
    const double pad =
        cfg.padding_bandwidths * std::max(ka.bandwidths[a], kb.bandwidths[a]);
    lo[a] = std::min(ka.points.col(a).minCoeff(), kb.points.col(a).minCoeff()) - pad;
    hi[a] = std::max(ka.points.col(a).maxCoeff(), kb.points.col(a).maxCoeff()) + pad;
  }
  Vector step(d);
  double cell = 1.0;
  for (int a = 0; a < d; ++a) {
    step[a] = (hi[a] - lo[a]) / (res - 1);
    cell *= step[a];
  }

  // Separable kernel tables: per set, per axis, exp factors for every
  // (point, grid node) pair. Densities at a node are then dot products.
  auto tables = [&](const Kde& kde) {
    std::vector<Matrix> per_axis(static_cast<std::size_t>(d));
    const int n = static_cast<int>(kde.points.rows());
    double norm_const = static_cast<double>(n);
    for (int a = 0; a < d; ++a) norm_const *= kde.bandwidths[a] * std::sqrt(2.0 * M_PI);
    for (int a = 0; a < d; ++a) {
      Matrix t(n, res);
      for (int i = 0; i < n; ++i) {
        for (int g = 0; g < res; ++g) {
          const double u = (lo[a] + g * step[a] - kde.points(i, a)) / kde.bandwidths[a];
          t(i, g) = std::exp(-0.5 * u * u);
        }
      }
      // Fold the normalization into the first axis.
      if (a == 0) t /= norm_const;
      per_axis[static_cast<std::size_t>(a)] = std::move(t);
    }
    return per_axis;
  };
  const auto ta = tables(ka);
  const auto tb = tables(kb);
  const int na = static_cast<int>(ka.points.rows());
  const int nb = static_cast<int>(kb.points.rows());

  double integral = 0.0;
  Vector prod_a(na), prod_b(nb);
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  const long total = static_cast<long>(std::pow(res, d));
  for (long node = 0; node < total; ++node) {
    long rem = node;
    for (int a = d - 1; a >= 0; --a) {
      idx[static_cast<std::size_t>(a)] = static_cast<int>(rem % res);
      rem /= res;
    }
    prod_a = ta[0].col(idx[0]);
    prod_b = tb[0].col(idx[0]);
    for (int a = 1; a < d; ++a) {
      prod_a = prod_a.cwiseProduct(ta[static_cast<std::size_t>(a)].col(idx[static_cast<std::size_t>(a)]));
      prod_b = prod_b.cwiseProduct(tb[static_cast<std::size_t>(a)].col(idx[static_cast<std::size_t>(a)]));
    }
    integral += std::min(prod_a.sum(), prod_b.sum());
  }
  return integral * cell;
}

double integrate_monte_carlo(const Kde& ka, const Kde& kb, const OverlapConfig& cfg) {
  // Importance sampling from the even mixture of both KDEs.
  Rng rng(cfg.mc_seed);
  const int d = static_cast<int>(ka.points.cols());
  double sum = 0.0;
  for (int s = 0; s < cfg.mc_samples; ++s) {
    const Kde& source = (rng.uniform() < 0.5) ? ka : kb;
    const int i = rng.uniform_int(0, static_cast<int>(source.points.rows()) - 1);
    Vector x(d);
    for (int a = 0; a < d; ++a)
      x[a] = source.points(i, a) + source.bandwidths[a] * rng.normal();
    const double pa = ka.density(x);
    const double pb = kb.density(x);
    const double mix = 0.5 * (pa + pb);
    if (mix > 0.0) sum += std::min(pa, pb) / mix;
  }
  return sum / cfg.mc_samples;
}

}  // namespace

double overlap_eo(const Matrix& a, const Matrix& b, const OverlapConfig& cfg) {
  if (a.rows() == 0 || b.rows() == 0)
    throw std::invalid_argument("overlap_eo: both point sets must be nonempty");
  if (a.cols() != b.cols())
    throw std::invalid_argument("overlap_eo: ambient dimension mismatch");
  if (cfg.projection_dim < 1 || cfg.grid_resolution < 8)
    throw std::invalid_argument("overlap_eo: invalid config");

  Matrix pa = a, pb = b;
  const int dim = static_cast<int>(a.cols());
  if (dim > cfg.projection_dim) {
    Vector mean;
    const Matrix basis = joint_pca_basis(a, b, cfg.projection_dim, &mean);
    pa = (a.rowwise() - mean.transpose()) * basis;
    pb = (b.rowwise() - mean.transpose()) * basis;
  }
  Kde ka{pa, scott_bandwidths(pa, cfg.bandwidth_floor)};
  Kde kb{pb, scott_bandwidths(pb, cfg.bandwidth_floor)};

  const double raw = (pa.cols() <= 3) ? integrate_grid(ka, kb, cfg)
                                      : integrate_monte_carlo(ka, kb, cfg);
  return std::clamp(raw, 0.0, 1.0);
}

Matrix overlap_matrix(const std::vector<Matrix>& task_features, const OverlapConfig& cfg) {
  const int t = static_cast<int>(task_features.size());
  Matrix out = Matrix::Identity(t, t);
  for (int i = 0; i < t; ++i) {
    for (int j = i + 1; j < t; ++j) {
      const double e = overlap_eo(task_features[static_cast<std::size_t>(i)],
                                  task_features[static_cast<std::size_t>(j)], cfg);
      out(i, j) = e;
      out(j, i) = e;
    }
  }
  return out;
}

double forgetting(const std::vector<std::vector<double>>& acc_matrix) {
  const int t_final = static_cast<int>(acc_matrix.size());
  if (t_final < 2) throw std::invalid_argument("forgetting: need at least 2 tasks");
  const auto& final_row = acc_matrix.back();
  double total = 0.0;
  for (int i = 0; i + 1 < t_final; ++i) {
    double peak = -std::numeric_limits<double>::infinity();
    for (int t = i; t + 1 < t_final; ++t) {
      peak = std::max(peak, acc_matrix[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]);
    }
    total += peak - final_row[static_cast<std::size_t>(i)];
  }
  return total / (t_final - 1);
}

double ncm_accuracy(const Matrix& test_features, const std::vector<int>& test_labels,
                    const std::map<int, Vector>& class_means,
                    const std::optional<std::set<int>>& candidates) {
  const int n = static_cast<int>(test_features.rows());
  if (n == 0) throw std::invalid_argument("ncm_accuracy: empty test set");
  if (test_labels.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("ncm_accuracy: label count mismatch");
  for (int label : test_labels) {
    if (class_means.find(label) == class_means.end())
      throw std::invalid_argument("ncm_accuracy: missing mean for class " +
                                  std::to_string(label));
  }
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    int best_class = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (const auto& [cls, mean] : class_means) {  // ascending class order
      if (candidates && candidates->find(cls) == candidates->end()) continue;
      const double dist = (test_features.row(i).transpose() - mean).squaredNorm();
      if (dist < best_dist) {  // ties keep the earlier (lower) class
        best_dist = dist;
        best_class = cls;
      }
    }
    if (best_class == test_labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / n;
}

EqualityReport simplex_fit(const FeatureSet& fs, double k, double tol) {
  return equality_check(fs, k, tol);
}

}  // namespace gplasc
