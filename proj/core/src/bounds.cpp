#include "gplasc/bounds.hpp"

#include "gplasc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace gplasc {

BatchPlan build_batch_plan(const std::vector<int>& labels, const std::vector<Batch>& batches) {
  BatchPlan plan;
  plan.batches = batches;
  if (batches.empty()) return plan;
  plan.b = static_cast<int>(batches.front().size());
  if (plan.b < 2) throw std::invalid_argument("build_batch_plan: batch size must be >= 2");
  for (const Batch& batch : batches) {
    if (static_cast<int>(batch.size()) != plan.b)
      throw std::invalid_argument("build_batch_plan: ragged batch sizes");
    std::map<int, int> multiplicity;
    for (int idx : batch) {
      if (idx < 0 || idx >= static_cast<int>(labels.size()))
        throw std::out_of_range("build_batch_plan: index out of range");
      ++multiplicity[labels[static_cast<std::size_t>(idx)]];
    }
    for (const auto& [label, l] : multiplicity) {
      auto [it, inserted] = plan.counts.try_emplace(
          label, std::vector<std::int64_t>(static_cast<std::size_t>(plan.b) + 1, 0));
      ++it->second[static_cast<std::size_t>(l)];
    }
  }
  plan.m.assign(static_cast<std::size_t>(plan.b) + 1, 0);
  for (const auto& [label, per_l] : plan.counts) {
    for (int l = 1; l <= plan.b; ++l) plan.m[static_cast<std::size_t>(l)] += per_l[static_cast<std::size_t>(l)];
  }
  return plan;
}

double theorem_bound(const BatchPlan& plan, double k, double rho_z) {
  if (rho_z <= 0.0) throw std::invalid_argument("theorem_bound: rho_z must be positive");
  double bound = 0.0;
  const double attenuation = std::exp(-(1.0 - k) * rho_z * rho_z);
  for (int l = 2; l <= plan.b; ++l) {
    const auto m_l = plan.m[static_cast<std::size_t>(l)];
    if (m_l == 0) continue;
    bound += static_cast<double>(l) * static_cast<double>(m_l) *
             std::log(l - 1 + (plan.b - l) * attenuation);
  }
  return bound;
}

EqualityReport equality_check(const FeatureSet& fs, double k, double tol) {
  fs.validate();
  const int n = fs.size();
  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < n; ++i) by_class[fs.labels[static_cast<std::size_t>(i)]].push_back(i);
  const int classes = static_cast<int>(by_class.size());
  if (classes < 2) throw std::invalid_argument("equality_check: need at least 2 classes");

  EqualityReport report;
  report.tol = tol;
  for (const auto& [label, rows] : by_class) {
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        const double d = (fs.features.row(rows[a]) - fs.features.row(rows[b])).norm();
        report.collapse_dev = std::max(report.collapse_dev, d);
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (fs.labels[static_cast<std::size_t>(i)] == fs.labels[static_cast<std::size_t>(j)])
        continue;
      const double s = fs.features.row(i).dot(fs.features.row(j));
      report.cross_inner_dev = std::max(report.cross_inner_dev, std::abs(s - k));
    }
  }
  report.center = fs.features.colwise().mean().transpose();
  const double rho = simplex_radius(classes, std::clamp(k, -1.0 / (classes - 1), 1.0));
  for (const auto& [label, rows] : by_class) {
    Vector mean = Vector::Zero(fs.dim());
    for (int idx : rows) mean += fs.features.row(idx).transpose();
    mean /= static_cast<double>(rows.size());
    const double r = (mean - report.center).norm();
    report.radius_dev = std::max(report.radius_dev, std::abs(r - rho));
  }
  report.pass = report.collapse_dev <= tol && report.cross_inner_dev <= tol &&
                report.radius_dev <= tol;
  return report;
}

Matrix sample_constrained_vertices(int classes, int h, double k, Rng& rng, int max_attempts) {
  if (classes < 2) throw std::invalid_argument("sample_constrained_vertices: need C >= 2");
  auto satisfies = [&](const Matrix& v) {
    for (int i = 0; i < classes; ++i) {
      for (int j = i + 1; j < classes; ++j) {
        if (v.row(i).dot(v.row(j)) < k - 1e-12) return false;
      }
    }
    return true;
  };
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Matrix v(classes, h);
    for (int c = 0; c < classes; ++c) v.row(c) = rng.unit_vector(h).transpose();
    if (satisfies(v)) return v;
  }
  // Fallback: pull a random configuration toward the exact equality simplex
  // until the inner-product floor holds (alpha = 1 is exact, so this ends).
  const Vector direction = rng.unit_vector(h);
  const Matrix target = make_inscribed_simplex(direction, classes, k, rng.next_u64());
  Matrix start(classes, h);
  for (int c = 0; c < classes; ++c) start.row(c) = rng.unit_vector(h).transpose();
  for (int step = 1; step <= 20; ++step) {
    const double alpha = static_cast<double>(step) / 20.0;
    Matrix v = (1.0 - alpha) * start + alpha * target;
    normalize_rows(v);
    if (satisfies(v)) return v;
  }
  return target;
}

CollapsedConfig make_collapsed_config(const Matrix& vertices, int n_per_class) {
  const int classes = static_cast<int>(vertices.rows());
  const int h = static_cast<int>(vertices.cols());
  CollapsedConfig config;
  config.fs.features.resize(classes * n_per_class, h);
  config.fs.labels.resize(static_cast<std::size_t>(classes) * n_per_class);
  config.fs.task_ids.assign(static_cast<std::size_t>(classes) * n_per_class, 0);
  Batch batch;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < n_per_class; ++i) {
      const int row = c * n_per_class + i;
      config.fs.features.row(row) = vertices.row(c);
      config.fs.labels[static_cast<std::size_t>(row)] = c;
      batch.push_back(row);
    }
  }
  config.batches.push_back(std::move(batch));
  return config;
}

}  // namespace gplasc
