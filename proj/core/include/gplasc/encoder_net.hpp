// ============================================================================
// encoder_net.hpp - two-layer feedforward encoder with normalized outputs
//
// z = normalize(relu(x W1 + b1) W2 + b2), batch rows as samples. Backprop is
// hand-derived, including the normalization Jacobian (I - z z^T)/||u||.
// ============================================================================
#pragma once

#include "gplasc/common.hpp"

#include <cstdint>

namespace gplasc {

struct EncoderParams {
  Matrix w1;  // D_in x H
  Vector b1;  // H
  Matrix w2;  // H x h
  Vector b2;  // h

  int input_dim() const { return static_cast<int>(w1.rows()); }
  int hidden_dim() const { return static_cast<int>(w1.cols()); }
  int output_dim() const { return static_cast<int>(w2.cols()); }
};

struct EncoderGrads {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

// Intermediate values needed by the backward pass.
struct EncoderCache {
  Matrix x;           // M x D_in
  Matrix pre_hidden;  // M x H, before relu
  Matrix pre_norm;    // M x h, before row normalization
  Vector norms;       // M, ||pre_norm row||; 0 marks a degenerate row
};

// He-scaled seeded initialization.
EncoderParams init_encoder(int d_in, int hidden, int d_out, std::uint64_t seed);

// Forward pass; every output row has unit norm. Rows whose pre-normalization
// vector is zero map to the first basis vector.
Matrix encoder_forward(const EncoderParams& params, const Matrix& x,
                       EncoderCache* cache = nullptr);

// Exact parameter gradients for upstream dZ (M x h).
EncoderGrads encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                              const Matrix& dz);

// SGD with momentum; weight decay is added to the gradient (biases excluded).
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double momentum = 0.9) : momentum_(momentum) {}

  void step(EncoderParams& params, const EncoderGrads& grads, double lr,
            double weight_decay = 0.0);

  void reset() { initialized_ = false; }

 private:
  double momentum_;
  bool initialized_ = false;
  EncoderGrads velocity_;
};

}  // namespace gplasc
