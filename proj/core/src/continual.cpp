#include "gplasc/continual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace gplasc {

TaskStream make_stream(int tasks, int classes_per_task, int input_dim, int n_train_per_class,
                       int n_test_per_class, double sigma, std::uint64_t seed) {
  if (tasks < 1 || classes_per_task < 1)
    throw std::invalid_argument("make_stream: need tasks >= 1 and classes >= 1");
  if (input_dim < 2) throw std::invalid_argument("make_stream: need input_dim >= 2");
  if (n_train_per_class < 1 || n_test_per_class < 1)
    throw std::invalid_argument("make_stream: need at least 1 sample per class per split");
  if (sigma < 0.0) throw std::invalid_argument("make_stream: sigma must be >= 0");

  Rng rng(seed);
  const int total_classes = tasks * classes_per_task;
  TaskStream stream;
  stream.task_count = tasks;
  stream.classes_per_task = classes_per_task;
  stream.input_dim = input_dim;
  stream.sigma = sigma;
  stream.class_means.resize(total_classes, input_dim);

  // Cluster means on the sphere, rejecting candidates too close to earlier ones.
  constexpr double kMaxInner = 0.8;
  constexpr int kMaxAttempts = 10000;
  Rng mean_rng = rng.child(1);
  for (int c = 0; c < total_classes; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      const Vector candidate = mean_rng.unit_vector(input_dim);
      bool ok = true;
      for (int prev = 0; prev < c && ok; ++prev) {
        if (candidate.dot(stream.class_means.row(prev)) > kMaxInner) ok = false;
      }
      if (ok) {
        stream.class_means.row(c) = candidate.transpose();
        placed = true;
      }
    }
    if (!placed)
      throw std::runtime_error("make_stream: could not separate " +
                               std::to_string(total_classes) + " class means");
  }

  for (int t = 0; t < tasks; ++t) {
    Rng task_rng = rng.child(100 + static_cast<std::uint64_t>(t));
    TaskData task;
    const int n_train = classes_per_task * n_train_per_class;
    const int n_test = classes_per_task * n_test_per_class;
    task.train_x.resize(n_train, input_dim);
    task.test_x.resize(n_test, input_dim);
    for (int c = 0; c < classes_per_task; ++c) {
      const int cls = t * classes_per_task + c;
      for (int i = 0; i < n_train_per_class; ++i) {
        task.train_x.row(c * n_train_per_class + i) =
            stream.class_means.row(cls) + sigma * task_rng.normal_vector(input_dim).transpose();
        task.train_y.push_back(cls);
      }
      for (int i = 0; i < n_test_per_class; ++i) {
        task.test_x.row(c * n_test_per_class + i) =
            stream.class_means.row(cls) + sigma * task_rng.normal_vector(input_dim).transpose();
        task.test_y.push_back(cls);
      }
    }
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

MemoryBuffer::MemoryBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 0) throw std::invalid_argument("MemoryBuffer: negative capacity");
}

void MemoryBuffer::update(const Matrix& xs, const std::vector<int>& ys, int task_id) {
  if (xs.rows() != static_cast<Eigen::Index>(ys.size()))
    throw std::invalid_argument("MemoryBuffer::update: rows/labels mismatch");
  for (int i = 0; i < xs.rows(); ++i) {
    per_class_[ys[static_cast<std::size_t>(i)]].push_back(
        BufferItem{xs.row(i).transpose(), ys[static_cast<std::size_t>(i)], task_id});
  }
  rebalance();
}

void MemoryBuffer::rebalance() {
  if (per_class_.empty()) return;
  const int n_classes = static_cast<int>(per_class_.size());
  const int base = capacity_ / n_classes;
  int remainder = capacity_ % n_classes;
  for (auto& [cls, ring] : per_class_) {  // ascending class order
    const int quota = base + (remainder > 0 ? 1 : 0);
    if (remainder > 0) --remainder;
    while (static_cast<int>(ring.size()) > quota) ring.pop_front();  // oldest first
  }
}

int MemoryBuffer::size() const {
  int n = 0;
  for (const auto& [cls, ring] : per_class_) n += static_cast<int>(ring.size());
  return n;
}

std::vector<BufferItem> MemoryBuffer::items() const {
  std::vector<BufferItem> out;
  for (const auto& [cls, ring] : per_class_)
    out.insert(out.end(), ring.begin(), ring.end());
  return out;
}

std::map<int, int> MemoryBuffer::per_class_counts() const {
  std::map<int, int> out;
  for (const auto& [cls, ring] : per_class_) out[cls] = static_cast<int>(ring.size());
  return out;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::supcon: return "supcon";
    case Method::supcon_ird: return "supcon_ird";
    case Method::gplasc: return "gplasc";
  }
  return "unknown";
}

Method method_from_name(const std::string& name) {
  if (name == "supcon") return Method::supcon;
  if (name == "supcon_ird") return Method::supcon_ird;
  if (name == "gplasc") return Method::gplasc;
  throw std::invalid_argument("unknown method: " + name);
}

namespace {

Matrix forward_rows(const EncoderParams& params, const Matrix& x) {
  return encoder_forward(params, x);
}

}  // namespace

RunReport run_continual(const TaskStream& stream, const HarnessConfig& cfg) {
  if (cfg.plan.task_count_max < stream.task_count)
    throw std::invalid_argument("run_continual: region plan covers fewer tasks than the stream");
  if (cfg.batch_size < 2) throw std::invalid_argument("run_continual: batch_size must be >= 2");
  if (cfg.epochs < 1) throw std::invalid_argument("run_continual: epochs must be >= 1");

  const int h = cfg.plan.dim;
  Rng root(cfg.seed);
  EncoderParams params = init_encoder(stream.input_dim, cfg.hidden, h, root.child(0).seed());
  SgdOptimizer optimizer(cfg.momentum);
  MemoryBuffer buffer(cfg.buffer_capacity);
  LossParams loss = cfg.loss;
  loss.k = cfg.plan.k;

  RunReport report;
  report.method = method_name(cfg.method);
  report.seed = cfg.seed;

  EncoderParams teacher;
  bool has_teacher = false;

  for (int t = 0; t < stream.task_count; ++t) {
    if (t > 0) {
      teacher = params;
      has_teacher = true;
    }
    const TaskData& task = stream.tasks[static_cast<std::size_t>(t)];
    const std::vector<BufferItem> replay = buffer.items();
    const int n_cur = static_cast<int>(task.train_x.rows());
    const int n_buf = static_cast<int>(replay.size());
    const int cur_per_batch = n_buf > 0 ? (cfg.batch_size + 1) / 2 : cfg.batch_size;
    const int buf_per_batch = n_buf > 0 ? cfg.batch_size / 2 : 0;

    Rng task_rng = root.child(1000 + static_cast<std::uint64_t>(t));
    std::vector<LossBreakdown> curve;
    Vector ema = Vector::Zero(h);
    bool ema_started = false;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::vector<int> order(static_cast<std::size_t>(n_cur));
      std::iota(order.begin(), order.end(), 0);
      task_rng.shuffle(order);
      std::vector<int> buf_order(static_cast<std::size_t>(n_buf));
      std::iota(buf_order.begin(), buf_order.end(), 0);
      task_rng.shuffle(buf_order);
      int buf_cursor = 0;

      for (int start = 0; start < n_cur; start += cur_per_batch) {
        const int cur_count = std::min(cur_per_batch, n_cur - start);
        const int rows = cur_count + (n_buf > 0 ? buf_per_batch : 0);
        Matrix x(rows, stream.input_dim);
        FeatureSet fs;
        fs.labels.resize(static_cast<std::size_t>(rows));
        fs.task_ids.resize(static_cast<std::size_t>(rows));
        for (int i = 0; i < cur_count; ++i) {
          const int src = order[static_cast<std::size_t>(start + i)];
          x.row(i) = task.train_x.row(src);
          fs.labels[static_cast<std::size_t>(i)] = task.train_y[static_cast<std::size_t>(src)];
          fs.task_ids[static_cast<std::size_t>(i)] = t;
        }
        std::vector<int> buffer_positions;
        for (int i = 0; i < (n_buf > 0 ? buf_per_batch : 0); ++i) {
          const BufferItem& item = replay[static_cast<std::size_t>(
              buf_order[static_cast<std::size_t>(buf_cursor)])];
          buf_cursor = (buf_cursor + 1) % n_buf;
          const int row = cur_count + i;
          x.row(row) = item.x.transpose();
          fs.labels[static_cast<std::size_t>(row)] = item.label;
          fs.task_ids[static_cast<std::size_t>(row)] = item.task_id;
          buffer_positions.push_back(row);
        }

        EncoderCache cache;
        fs.features = encoder_forward(params, x, &cache);
        Batch batch(static_cast<std::size_t>(rows));
        std::iota(batch.begin(), batch.end(), 0);

        LossBreakdown bd;
        bd.supcon = supcon_batch(fs, batch, loss);
        Matrix dz = supcon_batch_grad(fs, batch, loss);

        if (cfg.method == Method::gplasc) {
          bd.range = range_penalty(fs, batch, loss.k);
          dz += loss.lambda_range * range_penalty_grad(fs, batch, loss.k);
          std::set<int> present(fs.task_ids.begin(), fs.task_ids.end());
          for (int tk : present) {
            bd.position += position_loss(fs, batch, tk, cfg.plan.center(tk));
            dz += loss.lambda_position * position_loss_grad(fs, batch, tk, cfg.plan.center(tk));
          }
          if (has_teacher && !buffer_positions.empty()) {
            FeatureSet teacher_fs = fs;
            teacher_fs.features = forward_rows(teacher, x);
            bd.distill = feature_distill(fs, teacher_fs, buffer_positions);
            dz += loss.lambda_distill * feature_distill_grad(fs, teacher_fs, buffer_positions);
          }
        } else if (cfg.method == Method::supcon_ird && has_teacher && rows >= 2) {
          FeatureSet teacher_fs = fs;
          teacher_fs.features = forward_rows(teacher, x);
          bd.distill = ird_loss(fs, teacher_fs, batch, cfg.ird_tau_star, loss.tau);
          dz += loss.lambda_distill * ird_loss_grad(fs, teacher_fs, batch, cfg.ird_tau_star, loss.tau);
        }
        bd.total = bd.supcon + loss.lambda_range * bd.range +
                   loss.lambda_position * bd.position + loss.lambda_distill * bd.distill;
        if (!std::isfinite(bd.total))
          throw DivergenceError("run_continual: non-finite loss in task " + std::to_string(t));
        curve.push_back(bd);

        const EncoderGrads grads = encoder_backward(params, cache, dz);
        optimizer.step(params, grads, cfg.lr, cfg.weight_decay);

        Vector batch_prototype = Vector::Zero(h);
        for (int i = 0; i < cur_count; ++i) batch_prototype += fs.features.row(i).transpose();
        batch_prototype /= static_cast<double>(cur_count);
        ema = ema_started ? (cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * batch_prototype)
                          : batch_prototype;
        ema_started = true;
      }
    }

    TaskReport task_report;
    task_report.prototype_error = (ema - cfg.plan.center(t)).norm();
    report.per_task.push_back(task_report);
    report.loss_curves.push_back(std::move(curve));

    // Class means: full current-task training data plus buffered exemplars of
    // earlier classes, all through the current encoder.
    std::map<int, Vector> sums;
    std::map<int, int> counts;
    const Matrix cur_features = forward_rows(params, task.train_x);
    for (int i = 0; i < n_cur; ++i) {
      const int cls = task.train_y[static_cast<std::size_t>(i)];
      auto [it, inserted] = sums.try_emplace(cls, Vector::Zero(h));
      it->second += cur_features.row(i).transpose();
      ++counts[cls];
    }
    for (const BufferItem& item : replay) {
      const Matrix f = forward_rows(params, item.x.transpose());
      auto [it, inserted] = sums.try_emplace(item.label, Vector::Zero(h));
      it->second += f.row(0).transpose();
      ++counts[item.label];
    }
    std::map<int, Vector> means;
    for (const auto& [cls, sum] : sums) means[cls] = sum / counts[cls];

    std::vector<double> cil_row, til_row;
    for (int i = 0; i <= t; ++i) {
      const TaskData& seen = stream.tasks[static_cast<std::size_t>(i)];
      const Matrix test_features = forward_rows(params, seen.test_x);
      cil_row.push_back(ncm_accuracy(test_features, seen.test_y, means));
      const auto classes = stream.task_classes(i);
      til_row.push_back(ncm_accuracy(test_features, seen.test_y, means,
                                     std::set<int>(classes.begin(), classes.end())));
    }
    report.acc_cil.push_back(std::move(cil_row));
    report.acc_til.push_back(std::move(til_row));

    buffer.update(task.train_x, task.train_y, t);
  }

  if (stream.task_count >= 2) report.forgetting_cil = forgetting(report.acc_cil);

  std::vector<Matrix> clouds;
  for (int t = 0; t < stream.task_count; ++t)
    clouds.push_back(forward_rows(params, stream.tasks[static_cast<std::size_t>(t)].test_x));
  const Matrix om = overlap_matrix(clouds, cfg.overlap);
  for (int t = 0; t < stream.task_count; ++t) {
    std::vector<double> row;
    for (int j = 0; j < stream.task_count; ++j) row.push_back(om(t, j));
    report.per_task[static_cast<std::size_t>(t)].overlap_row = std::move(row);
  }
  return report;
}

}  // namespace gplasc
