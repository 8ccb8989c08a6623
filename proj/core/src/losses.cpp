#include "gplasc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace gplasc {

namespace {

void check_batch(const FeatureSet& fs, const Batch& batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  for (int idx : batch) {
    if (idx < 0 || idx >= fs.size())
      throw std::out_of_range("batch index " + std::to_string(idx) + " out of range");
  }
}

Batch all_rows(const FeatureSet& fs) {
  Batch batch(static_cast<std::size_t>(fs.size()));
  std::iota(batch.begin(), batch.end(), 0);
  return batch;
}

std::set<int> tasks_present(const FeatureSet& fs, const Batch& batch) {
  std::set<int> tasks;
  for (int idx : batch) tasks.insert(fs.task_ids[static_cast<std::size_t>(idx)]);
  return tasks;
}

}  // namespace

bool FeatureSet::is_normalized(double tol) const {
  for (int r = 0; r < size(); ++r) {
    if (std::abs(features.row(r).norm() - 1.0) > tol) return false;
  }
  return true;
}

void FeatureSet::validate() const {
  if (labels.size() != static_cast<std::size_t>(size()) ||
      task_ids.size() != static_cast<std::size_t>(size()))
    throw std::invalid_argument("FeatureSet: labels/task_ids length mismatch");
}

double supcon_batch(const FeatureSet& fs, const Batch& batch, const LossParams& params) {
  check_batch(fs, batch);
  const int b = static_cast<int>(batch.size());
  double loss = 0.0;
  for (int a = 0; a < b; ++a) {
    const int i = batch[static_cast<std::size_t>(a)];
    const int label = fs.labels[static_cast<std::size_t>(i)];
    // positions of positives and similarity vector over the rest of the batch
    std::vector<int> positives;
    Vector sims(b - 1);
    int out = 0;
    for (int m = 0; m < b; ++m) {
      if (m == a) continue;
      const int j = batch[static_cast<std::size_t>(m)];
      sims[out] = fs.features.row(i).dot(fs.features.row(j)) / params.tau;
      if (fs.labels[static_cast<std::size_t>(j)] == label) positives.push_back(out);
      ++out;
    }
    if (positives.empty()) continue;  // |B_{y_i}| = 1 contributes nothing
    const double log_z = logsumexp(sims);
    double anchor = 0.0;
    for (int p : positives) anchor += log_z - sims[p];
    loss += anchor / static_cast<double>(positives.size());
  }
  return loss;
}

double supcon_total(const FeatureSet& fs, const std::vector<Batch>& batches,
                    const LossParams& params) {
  double total = 0.0;
  for (const Batch& batch : batches) total += supcon_batch(fs, batch, params);
  return total;
}

double range_penalty(const FeatureSet& fs, const Batch& batch, double k) {
  check_batch(fs, batch);
  const int b = static_cast<int>(batch.size());
  double penalty = 0.0;
  for (int a = 0; a < b; ++a) {
    const int i = batch[static_cast<std::size_t>(a)];
    for (int m = a + 1; m < b; ++m) {
      const int j = batch[static_cast<std::size_t>(m)];
      if (fs.labels[static_cast<std::size_t>(i)] == fs.labels[static_cast<std::size_t>(j)])
        continue;
      if (fs.task_ids[static_cast<std::size_t>(i)] != fs.task_ids[static_cast<std::size_t>(j)])
        continue;
      const double s = fs.features.row(i).dot(fs.features.row(j));
      if (s < k) penalty += k - s;
    }
  }
  return penalty;
}

double position_loss(const FeatureSet& fs, const Batch& batch, int task_id,
                     const Vector& p_fix) {
  check_batch(fs, batch);
  const int h = fs.dim();
  Vector prototype = Vector::Zero(h);
  int count = 0;
  for (int idx : batch) {
    if (fs.task_ids[static_cast<std::size_t>(idx)] != task_id) continue;
    prototype += fs.features.row(idx).transpose();
    ++count;
  }
  if (count == 0)
    throw std::invalid_argument("position_loss: no samples for task " + std::to_string(task_id));
  prototype /= static_cast<double>(count);
  return (prototype - p_fix).squaredNorm() / static_cast<double>(h);
}

double position_loss(const FeatureSet& fs, int task_id, const Vector& p_fix) {
  return position_loss(fs, all_rows(fs), task_id, p_fix);
}

double feature_distill(const FeatureSet& current, const FeatureSet& teacher,
                       const std::vector<int>& buffer_indices) {
  if (current.dim() != teacher.dim())
    throw std::invalid_argument("feature_distill: dimension mismatch");
  double loss = 0.0;
  for (int idx : buffer_indices) {
    if (idx < 0 || idx >= current.size() || idx >= teacher.size())
      throw std::out_of_range("feature_distill: buffer index " + std::to_string(idx) +
                              " out of range");
    loss += (current.features.row(idx) - teacher.features.row(idx)).squaredNorm();
  }
  return loss;
}

double ird_loss(const FeatureSet& current, const FeatureSet& teacher, const Batch& batch,
                double tau_star, double tau) {
  check_batch(current, batch);
  check_batch(teacher, batch);
  const int b = static_cast<int>(batch.size());
  if (b < 2) throw std::invalid_argument("ird_loss: batch size must be >= 2");
  double loss = 0.0;
  for (int a = 0; a < b; ++a) {
    const int i = batch[static_cast<std::size_t>(a)];
    Vector t_sims(b - 1), s_sims(b - 1);
    int out = 0;
    for (int m = 0; m < b; ++m) {
      if (m == a) continue;
      const int j = batch[static_cast<std::size_t>(m)];
      t_sims[out] = teacher.features.row(i).dot(teacher.features.row(j)) / tau_star;
      s_sims[out] = current.features.row(i).dot(current.features.row(j)) / tau;
      ++out;
    }
    const double t_log_z = logsumexp(t_sims);
    const double s_log_z = logsumexp(s_sims);
    for (int m = 0; m < b - 1; ++m) {
      const double p_teacher = std::exp(t_sims[m] - t_log_z);
      loss -= p_teacher * (s_sims[m] - s_log_z);
    }
  }
  return loss;
}

LossBreakdown gplasc_total(const FeatureSet& fs, const std::vector<Batch>& batches,
                           const RegionPlan& plan, const LossParams& params,
                           const FeatureSet* teacher, const std::vector<int>& buffer_indices) {
  if (std::abs(params.k - plan.k) > 1e-9)
    throw std::invalid_argument("gplasc_total: params.k and plan.k disagree");
  LossBreakdown breakdown;
  breakdown.supcon = supcon_total(fs, batches, params);
  for (const Batch& batch : batches) {
    breakdown.range += range_penalty(fs, batch, params.k);
    for (int task : tasks_present(fs, batch)) {
      if (task < 0 || task >= plan.task_count_max)
        throw std::out_of_range("gplasc_total: task id " + std::to_string(task) +
                                " outside the region plan");
      breakdown.position += position_loss(fs, batch, task, plan.center(task));
    }
  }
  if (teacher != nullptr) breakdown.distill = feature_distill(fs, *teacher, buffer_indices);
  breakdown.total = breakdown.supcon + params.lambda_range * breakdown.range +
                    params.lambda_position * breakdown.position +
                    params.lambda_distill * breakdown.distill;
  return breakdown;
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

Matrix supcon_batch_grad(const FeatureSet& fs, const Batch& batch, const LossParams& params) {
  check_batch(fs, batch);
  const int b = static_cast<int>(batch.size());
  Matrix grad = Matrix::Zero(fs.size(), fs.dim());
  for (int a = 0; a < b; ++a) {
    const int i = batch[static_cast<std::size_t>(a)];
    const int label = fs.labels[static_cast<std::size_t>(i)];
    std::vector<char> is_positive(static_cast<std::size_t>(b - 1), 0);
    Vector sims(b - 1);
    std::vector<int> rows(static_cast<std::size_t>(b - 1));
    int out = 0;
    int n_pos = 0;
    for (int m = 0; m < b; ++m) {
      if (m == a) continue;
      const int j = batch[static_cast<std::size_t>(m)];
      rows[static_cast<std::size_t>(out)] = j;
      sims[out] = fs.features.row(i).dot(fs.features.row(j)) / params.tau;
      if (fs.labels[static_cast<std::size_t>(j)] == label) {
        is_positive[static_cast<std::size_t>(out)] = 1;
        ++n_pos;
      }
      ++out;
    }
    if (n_pos == 0) continue;
    const double log_z = logsumexp(sims);
    for (int m = 0; m < b - 1; ++m) {
      const double prob = std::exp(sims[m] - log_z);
      const double pos_part = is_positive[static_cast<std::size_t>(m)]
                                  ? 1.0 / static_cast<double>(n_pos)
                                  : 0.0;
      const double coef = (prob - pos_part) / params.tau;
      const int j = rows[static_cast<std::size_t>(m)];
      grad.row(i) += coef * fs.features.row(j);
      grad.row(j) += coef * fs.features.row(i);
    }
  }
  return grad;
}

Matrix supcon_total_grad(const FeatureSet& fs, const std::vector<Batch>& batches,
                         const LossParams& params) {
  Matrix grad = Matrix::Zero(fs.size(), fs.dim());
  for (const Batch& batch : batches) grad += supcon_batch_grad(fs, batch, params);
  return grad;
}

Matrix range_penalty_grad(const FeatureSet& fs, const Batch& batch, double k) {
  check_batch(fs, batch);
  const int b = static_cast<int>(batch.size());
  Matrix grad = Matrix::Zero(fs.size(), fs.dim());
  for (int a = 0; a < b; ++a) {
    const int i = batch[static_cast<std::size_t>(a)];
    for (int m = a + 1; m < b; ++m) {
      const int j = batch[static_cast<std::size_t>(m)];
      if (fs.labels[static_cast<std::size_t>(i)] == fs.labels[static_cast<std::size_t>(j)])
        continue;
      if (fs.task_ids[static_cast<std::size_t>(i)] != fs.task_ids[static_cast<std::size_t>(j)])
        continue;
      const double s = fs.features.row(i).dot(fs.features.row(j));
      if (s < k) {
        grad.row(i) -= fs.features.row(j);
        grad.row(j) -= fs.features.row(i);
      }
    }
  }
  return grad;
}

Matrix position_loss_grad(const FeatureSet& fs, const Batch& batch, int task_id,
                          const Vector& p_fix) {
  check_batch(fs, batch);
  const int h = fs.dim();
  Vector prototype = Vector::Zero(h);
  int count = 0;
  for (int idx : batch) {
    if (fs.task_ids[static_cast<std::size_t>(idx)] != task_id) continue;
    prototype += fs.features.row(idx).transpose();
    ++count;
  }
  if (count == 0)
    throw std::invalid_argument("position_loss_grad: no samples for task " +
                                std::to_string(task_id));
  prototype /= static_cast<double>(count);
  const Vector pull = (2.0 / (static_cast<double>(count) * h)) * (prototype - p_fix);
  Matrix grad = Matrix::Zero(fs.size(), h);
  for (int idx : batch) {
    if (fs.task_ids[static_cast<std::size_t>(idx)] != task_id) continue;
    grad.row(idx) += pull.transpose();
  }
  return grad;
}

Matrix feature_distill_grad(const FeatureSet& current, const FeatureSet& teacher,
                            const std::vector<int>& buffer_indices) {
  if (current.dim() != teacher.dim())
    throw std::invalid_argument("feature_distill_grad: dimension mismatch");
  Matrix grad = Matrix::Zero(current.size(), current.dim());
  for (int idx : buffer_indices) {
    if (idx < 0 || idx >= current.size() || idx >= teacher.size())
      throw std::out_of_range("feature_distill_grad: buffer index out of range");
    grad.row(idx) += 2.0 * (current.features.row(idx) - teacher.features.row(idx));
  }
  return grad;
}

Matrix ird_loss_grad(const FeatureSet& current, const FeatureSet& teacher,
                     const Batch& batch, double tau_star, double tau) {
  check_batch(current, batch);
  check_batch(teacher, batch);
  const int b = static_cast<int>(batch.size());
  if (b < 2) throw std::invalid_argument("ird_loss_grad: batch size must be >= 2");
  Matrix grad = Matrix::Zero(current.size(), current.dim());
  for (int a = 0; a < b; ++a) {
    const int i = batch[static_cast<std::size_t>(a)];
    Vector t_sims(b - 1), s_sims(b - 1);
    std::vector<int> rows(static_cast<std::size_t>(b - 1));
    int out = 0;
    for (int m = 0; m < b; ++m) {
      if (m == a) continue;
      const int j = batch[static_cast<std::size_t>(m)];
      rows[static_cast<std::size_t>(out)] = j;
      t_sims[out] = teacher.features.row(i).dot(teacher.features.row(j)) / tau_star;
      s_sims[out] = current.features.row(i).dot(current.features.row(j)) / tau;
      ++out;
    }
    const double t_log_z = logsumexp(t_sims);
    const double s_log_z = logsumexp(s_sims);
    for (int m = 0; m < b - 1; ++m) {
      const double p_teacher = std::exp(t_sims[m] - t_log_z);
      const double p_student = std::exp(s_sims[m] - s_log_z);
      const double coef = (p_student - p_teacher) / tau;
      const int j = rows[static_cast<std::size_t>(m)];
      grad.row(i) += coef * current.features.row(j);
      grad.row(j) += coef * current.features.row(i);
    }
  }
  return grad;
}

Matrix gplasc_grad(const FeatureSet& fs, const std::vector<Batch>& batches,
                   const RegionPlan& plan, const LossParams& params,
                   const FeatureSet* teacher, const std::vector<int>& buffer_indices) {
  if (std::abs(params.k - plan.k) > 1e-9)
    throw std::invalid_argument("gplasc_grad: params.k and plan.k disagree");
  Matrix grad = supcon_total_grad(fs, batches, params);
  for (const Batch& batch : batches) {
    grad += params.lambda_range * range_penalty_grad(fs, batch, params.k);
    for (int task : tasks_present(fs, batch)) {
      if (task < 0 || task >= plan.task_count_max)
        throw std::out_of_range("gplasc_grad: task id outside the region plan");
      grad += params.lambda_position * position_loss_grad(fs, batch, task, plan.center(task));
    }
  }
  if (teacher != nullptr)
    grad += params.lambda_distill * feature_distill_grad(fs, *teacher, buffer_indices);
  return grad;
}

Matrix grad_features(LossSelector selector, const GradContext& ctx) {
  if (ctx.fs == nullptr) throw std::invalid_argument("grad_features: missing feature set");
  const FeatureSet& fs = *ctx.fs;
  const std::vector<Batch> batches =
      ctx.batches.empty() ? std::vector<Batch>{all_rows(fs)} : ctx.batches;
  switch (selector) {
    case LossSelector::supcon:
      return supcon_total_grad(fs, batches, ctx.params);
    case LossSelector::range: {
      Matrix grad = Matrix::Zero(fs.size(), fs.dim());
      for (const Batch& batch : batches) grad += range_penalty_grad(fs, batch, ctx.params.k);
      return grad;
    }
    case LossSelector::position:
      return position_loss_grad(fs, batches.front(), ctx.task_id, ctx.p_fix);
    case LossSelector::distill:
      if (ctx.teacher == nullptr) throw std::invalid_argument("grad_features: missing teacher");
      return feature_distill_grad(fs, *ctx.teacher, ctx.buffer_indices);
    case LossSelector::ird:
      if (ctx.teacher == nullptr) throw std::invalid_argument("grad_features: missing teacher");
      return ird_loss_grad(fs, *ctx.teacher, batches.front(), ctx.ird_tau_star, ctx.params.tau);
    case LossSelector::gplasc:
      if (ctx.plan == nullptr) throw std::invalid_argument("grad_features: missing region plan");
      return gplasc_grad(fs, batches, *ctx.plan, ctx.params, ctx.teacher, ctx.buffer_indices);
  }
  throw std::invalid_argument("grad_features: unknown selector");
}

}  // namespace gplasc
