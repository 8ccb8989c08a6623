#include "gplasc/encoder_net.hpp"

#include <cmath>

namespace gplasc {

EncoderParams init_encoder(int d_in, int hidden, int d_out, std::uint64_t seed) {
  if (d_in < 1 || hidden < 1 || d_out < 1)
    throw std::invalid_argument("init_encoder: dimensions must be positive");
  Rng rng(seed);
  EncoderParams params;
  const double s1 = std::sqrt(2.0 / d_in);
  const double s2 = std::sqrt(2.0 / hidden);
  params.w1 = s1 * rng.normal_matrix(d_in, hidden);
  params.b1 = Vector::Zero(hidden);
  params.w2 = s2 * rng.normal_matrix(hidden, d_out);
  params.b2 = Vector::Zero(d_out);
  return params;
}

Matrix encoder_forward(const EncoderParams& params, const Matrix& x, EncoderCache* cache) {
  if (x.cols() != params.w1.rows())
    throw std::invalid_argument("encoder_forward: input dimension mismatch");
  const int m = static_cast<int>(x.rows());
  Matrix pre_hidden = x * params.w1;
  pre_hidden.rowwise() += params.b1.transpose();
  const Matrix hidden = pre_hidden.cwiseMax(0.0);
  Matrix pre_norm = hidden * params.w2;
  pre_norm.rowwise() += params.b2.transpose();

  Matrix z = pre_norm;
  Vector norms(m);
  for (int r = 0; r < m; ++r) {
    const double norm = pre_norm.row(r).norm();
    norms[r] = norm;
    if (norm == 0.0) {
      z.row(r).setZero();
      z(r, 0) = 1.0;
    } else {
      z.row(r) /= norm;
    }
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->pre_hidden = pre_hidden;
    cache->pre_norm = pre_norm;
    cache->norms = norms;
  }
  return z;
}

EncoderGrads encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                              const Matrix& dz) {
  const int m = static_cast<int>(cache.x.rows());
  if (dz.rows() != m || dz.cols() != params.output_dim())
    throw std::invalid_argument("encoder_backward: dz shape mismatch");
  if (cache.pre_hidden.rows() != m || cache.pre_hidden.cols() != params.hidden_dim() ||
      cache.x.cols() != params.input_dim())
    throw std::invalid_argument("encoder_backward: stale cache");

  // Through the normalization: du = (dz - <dz, z> z) / ||u||.
  Matrix du(m, params.output_dim());
  for (int r = 0; r < m; ++r) {
    const double norm = cache.norms[r];
    if (norm == 0.0) {
      du.row(r).setZero();
      continue;
    }
    const Vector z = cache.pre_norm.row(r).transpose() / norm;
    const Vector g = dz.row(r).transpose();
    du.row(r) = ((g - z.dot(g) * z) / norm).transpose();
  }

  const Matrix hidden = cache.pre_hidden.cwiseMax(0.0);
  EncoderGrads grads;
  grads.w2 = hidden.transpose() * du;
  grads.b2 = du.colwise().sum();
  Matrix d_hidden = du * params.w2.transpose();
  const Matrix relu_mask = (cache.pre_hidden.array() > 0.0).cast<double>();
  d_hidden = d_hidden.cwiseProduct(relu_mask);
  grads.w1 = cache.x.transpose() * d_hidden;
  grads.b1 = d_hidden.colwise().sum();
  return grads;
}

void SgdOptimizer::step(EncoderParams& params, const EncoderGrads& grads, double lr,
                        double weight_decay) {
  if (!initialized_) {
    velocity_.w1 = Matrix::Zero(params.w1.rows(), params.w1.cols());
    velocity_.b1 = Vector::Zero(params.b1.size());
    velocity_.w2 = Matrix::Zero(params.w2.rows(), params.w2.cols());
    velocity_.b2 = Vector::Zero(params.b2.size());
    initialized_ = true;
  }
  velocity_.w1 = momentum_ * velocity_.w1 + grads.w1 + weight_decay * params.w1;
  velocity_.b1 = momentum_ * velocity_.b1 + grads.b1;
  velocity_.w2 = momentum_ * velocity_.w2 + grads.w2 + weight_decay * params.w2;
  velocity_.b2 = momentum_ * velocity_.b2 + grads.b2;
  params.w1 -= lr * velocity_.w1;
  params.b1 -= lr * velocity_.b1;
  params.w2 -= lr * velocity_.w2;
  params.b2 -= lr * velocity_.b2;
}

}  // namespace gplasc
