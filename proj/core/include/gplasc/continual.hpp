// ============================================================================
// continual.hpp - synthetic task streams, class-balanced replay buffer, and
// the sequential training harness (supcon / supcon+ird / gplasc)
// ============================================================================
#pragma once

#include "gplasc/encoder_net.hpp"
#include "gplasc/geometry.hpp"
#include "gplasc/losses.hpp"
#include "gplasc/metrics.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

namespace gplasc {

struct TaskData {
  Matrix train_x;               // rows in R^{D_in}
  std::vector<int> train_y;     // global class labels
  Matrix test_x;
  std::vector<int> test_y;
};

struct TaskStream {
  int task_count = 0;
  int classes_per_task = 0;
  int input_dim = 0;
  double sigma = 0.0;
  std::vector<TaskData> tasks;
  Matrix class_means;  // (T*C) x D_in generator means

  std::vector<int> task_classes(int t) const {
    std::vector<int> out;
    for (int c = 0; c < classes_per_task; ++c) out.push_back(t * classes_per_task + c);
    return out;
  }
};

// Gaussian clusters around unit-sphere means sampled with minimum-separation
// rejection; classes are disjoint across tasks and per-task balanced.
TaskStream make_stream(int tasks, int classes_per_task, int input_dim, int n_train_per_class,
                       int n_test_per_class, double sigma, std::uint64_t seed);

struct BufferItem {
  Vector x;
  int label = 0;
  int task_id = 0;
};

// Class-balanced ring buffer: per-class quotas differ by at most one and the
// oldest item of an over-quota class is evicted first.
class MemoryBuffer {
 public:
  explicit MemoryBuffer(int capacity);

  void update(const Matrix& xs, const std::vector<int>& ys, int task_id);

  int size() const;
  int capacity() const { return capacity_; }
  std::vector<BufferItem> items() const;  // deterministic class-major order
  std::map<int, int> per_class_counts() const;

 private:
  void rebalance();

  int capacity_;
  std::map<int, std::deque<BufferItem>> per_class_;
};

enum class Method { supcon, supcon_ird, gplasc };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct HarnessConfig {
  Method method = Method::supcon;
  RegionPlan plan;
  int hidden = 32;
  LossParams loss;             // tau, lambdas, k (k is forced to plan.k)
  double ird_tau_star = 0.1;
  int buffer_capacity = 20;
  int epochs = 20;
  int batch_size = 16;
  double lr = 0.05;
  double weight_decay = 0.0;
  double momentum = 0.9;
  double ema_decay = 0.9;      // metric-only prototype tracker
  std::uint64_t seed = 1;
  OverlapConfig overlap;
};

struct TaskReport {
  double prototype_error = 0.0;        // ||P_ema - P_fix|| at end of the task
  std::vector<double> overlap_row;     // E_O against every task, final encoder
};

struct RunReport {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> acc_cil;  // lower-triangular Acc_{t,i}
  std::vector<std::vector<double>> acc_til;
  double forgetting_cil = 0.0;               // 0 when T < 2
  std::vector<TaskReport> per_task;
  std::vector<std::vector<LossBreakdown>> loss_curves;  // per task, per step
};

// Sequential training per the replay algorithm: snapshot the teacher, train
// on current data mixed with buffer replay, evaluate all seen tasks with the
// nearest-class-mean classifier, then refill the buffer.
RunReport run_continual(const TaskStream& stream, const HarnessConfig& cfg);

}  // namespace gplasc
