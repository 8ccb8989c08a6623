// ============================================================================
// losses.hpp - contrastive losses and their analytic feature gradients
//
// All losses operate on row-normalized feature matrices. Batches are index
// multisets into the feature set; repeated indices are counted per position.
// Thresholded terms use the hinge max(0, k - <z_i, z_j>) over unordered
// cross-class pairs drawn from the same task, so replayed samples of earlier
// tasks are never pulled above their region separation.
// ============================================================================
#pragma once

#include "gplasc/common.hpp"
#include "gplasc/geometry.hpp"

#include <vector>

namespace gplasc {

using Batch = std::vector<int>;  // index multiset into a FeatureSet

struct FeatureSet {
  Matrix features;            // N x h, rows are z_i
  std::vector<int> labels;    // N
  std::vector<int> task_ids;  // N

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  bool is_normalized(double tol = 1e-9) const;
  void validate() const;  // shape agreement between rows, labels, task ids
};

struct LossParams {
  double tau = 0.1;             // temperature
  double lambda_range = 0.0;
  double lambda_position = 0.0;
  double lambda_distill = 0.0;
  double k = -1.0;              // similarity threshold (from the region plan)
};

struct LossBreakdown {
  double supcon = 0.0;
  double range = 0.0;     // unweighted hinge sum
  double position = 0.0;  // unweighted MSE sum
  double distill = 0.0;   // unweighted squared-distance sum
  double total = 0.0;
};

// Supervised contrastive loss of one batch; anchors whose class appears
// once contribute zero.
double supcon_batch(const FeatureSet& fs, const Batch& batch, const LossParams& params);
double supcon_total(const FeatureSet& fs, const std::vector<Batch>& batches,
                    const LossParams& params);

// Hinge sum over unordered same-task cross-class pairs in the batch.
double range_penalty(const FeatureSet& fs, const Batch& batch, double k);

// Mean-over-coordinates MSE between the task prototype (mean of the task's
// rows among `batch`) and the fixed center. The all-rows overload treats the
// whole set as the batch.
double position_loss(const FeatureSet& fs, const Batch& batch, int task_id,
                     const Vector& p_fix);
double position_loss(const FeatureSet& fs, int task_id, const Vector& p_fix);

// Sum of squared feature distances over the buffer rows.
double feature_distill(const FeatureSet& current, const FeatureSet& teacher,
                       const std::vector<int>& buffer_indices);

// Instance-relation distillation: anchor-wise softmax over within-batch
// similarities, teacher at tau_star / student at tau, summed cross-entropy.
double ird_loss(const FeatureSet& current, const FeatureSet& teacher, const Batch& batch,
                double tau_star, double tau);

// Composite loss: supcon + lambda_range*range + lambda_position*position
// (per task present per batch) + lambda_distill*distill (teacher optional).
LossBreakdown gplasc_total(const FeatureSet& fs, const std::vector<Batch>& batches,
                           const RegionPlan& plan, const LossParams& params,
                           const FeatureSet* teacher = nullptr,
                           const std::vector<int>& buffer_indices = {});

// ---------------------------------------------------------------------------
// Analytic gradients w.r.t. the full feature matrix (N x h, zeros for rows
// outside the batch). These are plain Euclidean gradients; any sphere
// projection is the optimizer's business.
// ---------------------------------------------------------------------------
Matrix supcon_batch_grad(const FeatureSet& fs, const Batch& batch, const LossParams& params);
Matrix supcon_total_grad(const FeatureSet& fs, const std::vector<Batch>& batches,
                         const LossParams& params);
Matrix range_penalty_grad(const FeatureSet& fs, const Batch& batch, double k);
Matrix position_loss_grad(const FeatureSet& fs, const Batch& batch, int task_id,
                          const Vector& p_fix);
Matrix feature_distill_grad(const FeatureSet& current, const FeatureSet& teacher,
                            const std::vector<int>& buffer_indices);
Matrix ird_loss_grad(const FeatureSet& current, const FeatureSet& teacher,
                     const Batch& batch, double tau_star, double tau);
Matrix gplasc_grad(const FeatureSet& fs, const std::vector<Batch>& batches,
                   const RegionPlan& plan, const LossParams& params,
                   const FeatureSet* teacher = nullptr,
                   const std::vector<int>& buffer_indices = {});

// Selector-style dispatch mirroring the scalar losses above.
enum class LossSelector { supcon, range, position, distill, ird, gplasc };

struct GradContext {
  const FeatureSet* fs = nullptr;
  std::vector<Batch> batches;
  const RegionPlan* plan = nullptr;
  LossParams params;
  const FeatureSet* teacher = nullptr;
  std::vector<int> buffer_indices;
  int task_id = 0;
  Vector p_fix;
  double ird_tau_star = 0.1;
};

Matrix grad_features(LossSelector selector, const GradContext& ctx);

}  // namespace gplasc
