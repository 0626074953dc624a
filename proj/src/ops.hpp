#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace ssk::ops {

enum class Mode { Train, Infer };

// ---------------------------------------------------------------------------
// Convolution: 3x3 kernel, stride 1, same (zero) padding. Input is a single
// image [H,W,Cin], kernel [3,3,Cin,Cout], bias [Cout] (may be absent).
// Sums accumulate in double before narrowing to float32.
// ---------------------------------------------------------------------------
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias);

struct Conv2dGrads {
  Tensor grad_input;   // empty when not requested
  Tensor grad_kernel;
  Tensor grad_bias;    // absent when the forward pass had no bias
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                            bool has_bias, bool need_grad_input = true);

// Accumulate variant: adds this sample's kernel/bias contributions into
// existing 64-bit accumulators (used when summing over a batch in order).
void conv2d_backward_accumulate(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                                std::vector<double>& kernel_acc, std::vector<double>& bias_acc,
                                Tensor* grad_input);

// ---------------------------------------------------------------------------
// Elementwise rectifier
// ---------------------------------------------------------------------------
Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

// ---------------------------------------------------------------------------
// Batch normalization over the last (channel) axis. Train mode normalizes by
// batch statistics (eps inside the square root) and updates the running stats
// in place with the given momentum; infer mode normalizes by the running
// stats. Any rank >= 2 is accepted; the reduction covers every non-channel
// axis, so [N,H,W,C] behaves as usual.
// ---------------------------------------------------------------------------
struct BatchNormCache {
  Tensor normalized;             // x_hat, same shape as x
  std::vector<double> mean;      // per channel
  std::vector<double> inv_std;   // 1/sqrt(var+eps) per channel
};

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                 Tensor& running_var, Mode mode, float eps = 1e-3f, float momentum = 0.99f,
                 BatchNormCache* cache = nullptr);

struct BatchNormGrads {
  Tensor grad_x;
  Tensor grad_gamma;
  Tensor grad_beta;
};
BatchNormGrads batchnorm_train_backward(const BatchNormCache& cache, const Tensor& gamma,
                                        const Tensor& grad_out);
// Infer-mode backward: the op is an affine map, so only grad_x is meaningful.
Tensor batchnorm_infer_backward(const Tensor& grad_out, const Tensor& gamma,
                                const Tensor& running_var, float eps = 1e-3f);

// ---------------------------------------------------------------------------
// 2x2/stride-2 max pooling over [H,W,C]; odd trailing row/column dropped.
// Argmax (flat input index per output element, first max on ties) is recorded
// for backward routing.
// ---------------------------------------------------------------------------
struct MaxPoolResult {
  Tensor output;
  std::vector<std::int32_t> argmax;
};
MaxPoolResult maxpool2(const Tensor& x);
Tensor maxpool2_backward(const MaxPoolResult& pooled, const std::vector<int>& input_shape,
                         const Tensor& grad_out);

// ---------------------------------------------------------------------------
// Fully connected: out = x.W + b with x [m], W [m,n], b [n] (b may be absent).
// ---------------------------------------------------------------------------
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);
struct DenseGrads {
  Tensor grad_x;
  Tensor grad_w;
  Tensor grad_b;
};
DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, bool has_bias);

// ---------------------------------------------------------------------------
// Inverted dropout: each element is zeroed with probability p during training
// and survivors scale by 1/(1-p), so inference is the identity. The mask
// (0 or 1/(1-p) per element) is written to mask_out when given; backward is
// grad_out * mask.
// ---------------------------------------------------------------------------
Tensor dropout(const Tensor& x, float p, SeededRng& rng, Mode mode, Tensor* mask_out = nullptr);

// ---------------------------------------------------------------------------
// Numerically stable softmax over a vector.
// ---------------------------------------------------------------------------
Tensor softmax(const Tensor& x);

// Row-major flatten to one dimension.
Tensor flatten(const Tensor& x);

// ---------------------------------------------------------------------------
// Gradient oracle: central finite differences of a scalar function, compared
// against an analytic gradient. Returns the max over elements of
// |fd - analytic| / max(|fd|, |analytic|, 1), i.e. relative error above unit
// scale and absolute error below it (a float32 forward pass cannot resolve
// relative error on near-zero gradient elements).
// ---------------------------------------------------------------------------
double finite_difference_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                               const Tensor& analytic_grad, float eps);

}  // namespace ssk::ops
