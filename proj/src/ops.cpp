#include "ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ssk::ops {

namespace {

void check_conv_shapes(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  if (input.rank() != 3)
    fail(ErrorKind::ShapeMismatch, "conv2d: input must be rank 3 [H,W,Cin], got " + shape_str(input.shape));
  if (kernel.rank() != 4)
    fail(ErrorKind::ShapeMismatch, "conv2d: kernel must be rank 4 [3,3,Cin,Cout], got " + shape_str(kernel.shape));
  if (kernel.dim(0) != 3 || kernel.dim(1) != 3)
    fail(ErrorKind::ShapeMismatch, "conv2d: kernel spatial size must be 3x3, got " +
                                       std::to_string(kernel.dim(0)) + "x" + std::to_string(kernel.dim(1)));
  if (kernel.dim(2) != input.dim(2))
    fail(ErrorKind::ShapeMismatch, "conv2d: kernel input channels (" + std::to_string(kernel.dim(2)) +
                                       ") do not match input channels (" + std::to_string(input.dim(2)) + ")");
  if (!bias.absent() && (bias.rank() != 1 || bias.dim(0) != kernel.dim(3)))
    fail(ErrorKind::ShapeMismatch, "conv2d: bias length must equal output channels (" +
                                       std::to_string(kernel.dim(3)) + "), got " + shape_str(bias.shape));
}

// Single-input-channel path: per output channel, a 3x3 stencil over the plane
// with the inner loop running along image columns. Much faster than the
// channel-inner loop when Cout is small.
void conv2d_cin1(const float* in, int h, int w, const float* k, const float* bias, int cout,
                 float* out) {
  std::vector<double> plane(static_cast<std::size_t>(h) * w);
  for (int co = 0; co < cout; ++co) {
    const double b = bias ? bias[co] : 0.0;
    double taps[9];
    for (int t = 0; t < 9; ++t) taps[t] = k[t * cout + co];
    for (int i = 0; i < h; ++i) {
      double* prow = plane.data() + static_cast<std::size_t>(i) * w;
      for (int j = 0; j < w; ++j) prow[j] = b;
      for (int u = 0; u < 3; ++u) {
        const int ii = i + u - 1;
        if (ii < 0 || ii >= h) continue;
        const float* irow = in + static_cast<std::size_t>(ii) * w;
        const double k0 = taps[u * 3], k1 = taps[u * 3 + 1], k2 = taps[u * 3 + 2];
        prow[0] += k1 * irow[0] + (w > 1 ? k2 * irow[1] : 0.0);
        for (int j = 1; j < w - 1; ++j)
          prow[j] += k0 * irow[j - 1] + k1 * irow[j] + k2 * irow[j + 1];
        if (w > 1) prow[w - 1] += k0 * irow[w - 2] + k1 * irow[w - 1];
      }
    }
    const std::size_t n = static_cast<std::size_t>(h) * w;
    for (std::size_t p = 0; p < n; ++p) out[p * cout + co] = static_cast<float>(plane[p]);
  }
}

// Generic path, inner loop over output channels. The CO template parameter
// pins the accumulator width at compile time so it lives in registers; the
// dynamic fallback handles channel counts outside the usual power-of-two menu.
template <int CO>
void conv2d_generic_t(const float* in, int h, int w, int cin, const float* k, const float* bias,
                      float* out) {
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double acc[CO];
      for (int co = 0; co < CO; ++co) acc[co] = bias ? bias[co] : 0.0;
      const int u0 = i > 0 ? 0 : 1, u1 = i < h - 1 ? 3 : 2;
      const int v0 = j > 0 ? 0 : 1, v1 = j < w - 1 ? 3 : 2;
      for (int u = u0; u < u1; ++u) {
        const float* inrow = in + (static_cast<std::size_t>(i + u - 1) * w + (j + v0 - 1)) * cin;
        const float* krow = k + static_cast<std::size_t>((u * 3 + v0) * cin) * CO;
        for (int v = v0; v < v1; ++v) {
          for (int ci = 0; ci < cin; ++ci) {
            const double a = inrow[ci];
            const float* kc = krow + static_cast<std::size_t>(ci) * CO;
            for (int co = 0; co < CO; ++co) acc[co] += a * kc[co];
          }
          inrow += cin;
          krow += static_cast<std::size_t>(cin) * CO;
        }
      }
      float* o = out + (static_cast<std::size_t>(i) * w + j) * CO;
      for (int co = 0; co < CO; ++co) o[co] = static_cast<float>(acc[co]);
    }
  }
}

void conv2d_generic(const float* in, int h, int w, int cin, const float* k, const float* bias,
                    int cout, float* out) {
  switch (cout) {
    case 2: return conv2d_generic_t<2>(in, h, w, cin, k, bias, out);
    case 4: return conv2d_generic_t<4>(in, h, w, cin, k, bias, out);
    case 8: return conv2d_generic_t<8>(in, h, w, cin, k, bias, out);
    case 16: return conv2d_generic_t<16>(in, h, w, cin, k, bias, out);
    case 32: return conv2d_generic_t<32>(in, h, w, cin, k, bias, out);
    case 64: return conv2d_generic_t<64>(in, h, w, cin, k, bias, out);
    default: break;
  }
  std::vector<double> acc(static_cast<std::size_t>(cout));
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int co = 0; co < cout; ++co) acc[co] = bias ? bias[co] : 0.0;
      const int u0 = i > 0 ? 0 : 1, u1 = i < h - 1 ? 3 : 2;
      const int v0 = j > 0 ? 0 : 1, v1 = j < w - 1 ? 3 : 2;
      for (int u = u0; u < u1; ++u) {
        const float* inrow = in + (static_cast<std::size_t>(i + u - 1) * w + (j + v0 - 1)) * cin;
        const float* krow = k + static_cast<std::size_t>((u * 3 + v0) * cin) * cout;
        for (int v = v0; v < v1; ++v) {
          for (int ci = 0; ci < cin; ++ci) {
            const double a = inrow[ci];
            const float* kc = krow + static_cast<std::size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) acc[co] += a * kc[co];
          }
          inrow += cin;
          krow += static_cast<std::size_t>(cin) * cout;
        }
      }
      float* o = out + (static_cast<std::size_t>(i) * w + j) * cout;
      for (int co = 0; co < cout; ++co) o[co] = static_cast<float>(acc[co]);
    }
  }
}

// Kernel-gradient inner kernel with the co accumulator in registers; one tap
// (u,v,ci) at a time so both planes stream sequentially.
template <int CO>
void conv2d_kgrad_t(const float* in, int h, int w, int cin, const float* g, double* kernel_acc) {
  for (int u = 0; u < 3; ++u) {
    const int i0 = u > 0 ? 0 : 1, i1 = u < 2 ? h : h - 1;
    for (int v = 0; v < 3; ++v) {
      const int j0 = v > 0 ? 0 : 1, j1 = v < 2 ? w : w - 1;
      for (int ci = 0; ci < cin; ++ci) {
        double tap[CO] = {};
        for (int i = i0; i < i1; ++i) {
          const float* inrow = in + (static_cast<std::size_t>(i + u - 1) * w + (j0 + v - 1)) * cin + ci;
          const float* grow = g + (static_cast<std::size_t>(i) * w + j0) * CO;
          for (int j = j0; j < j1; ++j) {
            const double a = *inrow;
            for (int co = 0; co < CO; ++co) tap[co] += a * grow[co];
            inrow += cin;
            grow += CO;
          }
        }
        double* kc = kernel_acc + static_cast<std::size_t>((u * 3 + v) * cin + ci) * CO;
        for (int co = 0; co < CO; ++co) kc[co] += tap[co];
      }
    }
  }
}

void conv2d_kgrad(const float* in, int h, int w, int cin, const float* g, int cout,
                  double* kernel_acc) {
  switch (cout) {
    case 2: return conv2d_kgrad_t<2>(in, h, w, cin, g, kernel_acc);
    case 4: return conv2d_kgrad_t<4>(in, h, w, cin, g, kernel_acc);
    case 8: return conv2d_kgrad_t<8>(in, h, w, cin, g, kernel_acc);
    case 16: return conv2d_kgrad_t<16>(in, h, w, cin, g, kernel_acc);
    case 32: return conv2d_kgrad_t<32>(in, h, w, cin, g, kernel_acc);
    case 64: return conv2d_kgrad_t<64>(in, h, w, cin, g, kernel_acc);
    default: break;
  }
  std::vector<double> tap(static_cast<std::size_t>(cout));
  for (int u = 0; u < 3; ++u) {
    const int i0 = u > 0 ? 0 : 1, i1 = u < 2 ? h : h - 1;
    for (int v = 0; v < 3; ++v) {
      const int j0 = v > 0 ? 0 : 1, j1 = v < 2 ? w : w - 1;
      for (int ci = 0; ci < cin; ++ci) {
        std::fill(tap.begin(), tap.end(), 0.0);
        for (int i = i0; i < i1; ++i) {
          const float* inrow = in + (static_cast<std::size_t>(i + u - 1) * w + (j0 + v - 1)) * cin + ci;
          const float* grow = g + (static_cast<std::size_t>(i) * w + j0) * cout;
          for (int j = j0; j < j1; ++j) {
            const double a = *inrow;
            for (int co = 0; co < cout; ++co) tap[co] += a * grow[co];
            inrow += cin;
            grow += cout;
          }
        }
        double* kc = kernel_acc + static_cast<std::size_t>((u * 3 + v) * cin + ci) * cout;
        for (int co = 0; co < cout; ++co) kc[co] += tap[co];
      }
    }
  }
}

// Input-gradient inner kernel: per tap and output channel, a ci-wide fused
// multiply-add into the double plane buffer (unit stride on both sides).
template <int CI>
void conv2d_igrad_t(const float* k, int h, int w, int cout, const float* g, double* acc) {
  double kcol[CI];
  for (int u = 0; u < 3; ++u) {
    const int i0 = u > 0 ? 0 : 1, i1 = u < 2 ? h : h - 1;
    for (int v = 0; v < 3; ++v) {
      const int j0 = v > 0 ? 0 : 1, j1 = v < 2 ? w : w - 1;
      const float* kbase = k + static_cast<std::size_t>((u * 3 + v) * CI) * cout;
      for (int co = 0; co < cout; ++co) {
        for (int ci = 0; ci < CI; ++ci) kcol[ci] = kbase[static_cast<std::size_t>(ci) * cout + co];
        for (int i = i0; i < i1; ++i) {
          double* arow = acc + (static_cast<std::size_t>(i + u - 1) * w + (j0 + v - 1)) * CI;
          const float* grow = g + (static_cast<std::size_t>(i) * w + j0) * cout + co;
          for (int j = j0; j < j1; ++j) {
            const double gv = *grow;
            for (int ci = 0; ci < CI; ++ci) arow[ci] += kcol[ci] * gv;
            arow += CI;
            grow += cout;
          }
        }
      }
    }
  }
}

void conv2d_igrad(const float* k, int h, int w, int cin, int cout, const float* g, double* acc) {
  switch (cin) {
    case 1: return conv2d_igrad_t<1>(k, h, w, cout, g, acc);
    case 2: return conv2d_igrad_t<2>(k, h, w, cout, g, acc);
    case 4: return conv2d_igrad_t<4>(k, h, w, cout, g, acc);
    case 8: return conv2d_igrad_t<8>(k, h, w, cout, g, acc);
    case 16: return conv2d_igrad_t<16>(k, h, w, cout, g, acc);
    case 32: return conv2d_igrad_t<32>(k, h, w, cout, g, acc);
    case 64: return conv2d_igrad_t<64>(k, h, w, cout, g, acc);
    default: break;
  }
  for (int u = 0; u < 3; ++u) {
    const int i0 = u > 0 ? 0 : 1, i1 = u < 2 ? h : h - 1;
    for (int v = 0; v < 3; ++v) {
      const int j0 = v > 0 ? 0 : 1, j1 = v < 2 ? w : w - 1;
      const float* kbase = k + static_cast<std::size_t>((u * 3 + v) * cin) * cout;
      for (int co = 0; co < cout; ++co) {
        for (int i = i0; i < i1; ++i) {
          double* arow = acc + (static_cast<std::size_t>(i + u - 1) * w + (j0 + v - 1)) * cin;
          const float* grow = g + (static_cast<std::size_t>(i) * w + j0) * cout + co;
          for (int j = j0; j < j1; ++j) {
            const double gv = *grow;
            for (int ci = 0; ci < cin; ++ci) arow[ci] += kbase[static_cast<std::size_t>(ci) * cout + co] * gv;
            arow += cin;
            grow += cout;
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  check_conv_shapes(input, kernel, bias);
  const int h = input.dim(0), w = input.dim(1), cin = input.dim(2), cout = kernel.dim(3);
  Tensor out({h, w, cout});
  const float* b = bias.absent() ? nullptr : bias.data.data();
  if (cin == 1)
    conv2d_cin1(input.data.data(), h, w, kernel.data.data(), b, cout, out.data.data());
  else
    conv2d_generic(input.data.data(), h, w, cin, kernel.data.data(), b, cout, out.data.data());
  return out;
}

void conv2d_backward_accumulate(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                                std::vector<double>& kernel_acc, std::vector<double>& bias_acc,
                                Tensor* grad_input) {
  check_conv_shapes(input, kernel, Tensor{});
  const int h = input.dim(0), w = input.dim(1), cin = input.dim(2), cout = kernel.dim(3);
  require_shape(grad_out, {h, w, cout}, "conv2d_backward: grad_out");
  if (kernel_acc.size() != kernel.numel()) kernel_acc.assign(kernel.numel(), 0.0);
  if (bias_acc.size() != static_cast<std::size_t>(cout)) bias_acc.assign(cout, 0.0);

  const float* in = input.data.data();
  const float* g = grad_out.data.data();

  // bias gradient: spatial sum per output channel
  for (std::size_t p = 0, n = static_cast<std::size_t>(h) * w; p < n; ++p)
    for (int co = 0; co < cout; ++co) bias_acc[co] += g[p * cout + co];

  // kernel gradient: one tap (u,v,ci) at a time so the co-length accumulator
  // stays in registers while both planes stream
  conv2d_kgrad(in, h, w, cin, g, cout, kernel_acc.data());

  if (grad_input) {
    *grad_input = Tensor({h, w, cin});
    std::vector<double> acc(input.numel(), 0.0);
    conv2d_igrad(kernel.data.data(), h, w, cin, cout, g, acc.data());
    for (std::size_t p = 0; p < acc.size(); ++p) grad_input->data[p] = static_cast<float>(acc[p]);
  }
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                            bool has_bias, bool need_grad_input) {
  std::vector<double> kacc, bacc;
  Conv2dGrads grads;
  conv2d_backward_accumulate(input, kernel, grad_out, kacc, bacc,
                             need_grad_input ? &grads.grad_input : nullptr);
  grads.grad_kernel = Tensor(kernel.shape);
  for (std::size_t i = 0; i < kacc.size(); ++i) grads.grad_kernel.data[i] = static_cast<float>(kacc[i]);
  if (has_bias) {
    grads.grad_bias = Tensor({kernel.dim(3)});
    for (std::size_t i = 0; i < bacc.size(); ++i) grads.grad_bias.data[i] = static_cast<float>(bacc[i]);
  }
  return grads;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = x.data[i] > 0.0f ? x.data[i] : 0.0f;
  return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  if (!same_shape(x, grad_out))
    fail(ErrorKind::ShapeMismatch, "relu_backward: grad_out shape " + shape_str(grad_out.shape) +
                                       " does not match input shape " + shape_str(x.shape));
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    out.data[i] = x.data[i] > 0.0f ? grad_out.data[i] : 0.0f;
  return out;
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                 Tensor& running_var, Mode mode, float eps, float momentum, BatchNormCache* cache) {
  if (x.rank() < 2)
    fail(ErrorKind::ShapeMismatch, "batchnorm: input must have a channel axis, got " + shape_str(x.shape));
  const int c = x.dim(x.rank() - 1);
  const std::size_t rows = x.numel() / static_cast<std::size_t>(c);
  require_shape(gamma, {c}, "batchnorm: gamma");
  require_shape(beta, {c}, "batchnorm: beta");
  require_shape(running_mean, {c}, "batchnorm: running_mean");
  require_shape(running_var, {c}, "batchnorm: running_var");

  Tensor out(x.shape);
  const float* xd = x.data.data();
  float* od = out.data.data();

  if (mode == Mode::Infer) {
    std::vector<double> scale(c), shift(c);
    for (int ch = 0; ch < c; ++ch) {
      const double istd = 1.0 / std::sqrt(static_cast<double>(running_var.data[ch]) + eps);
      scale[ch] = static_cast<double>(gamma.data[ch]) * istd;
      shift[ch] = static_cast<double>(beta.data[ch]) - running_mean.data[ch] * scale[ch];
    }
    for (std::size_t r = 0; r < rows; ++r)
      for (int ch = 0; ch < c; ++ch) od[r * c + ch] = static_cast<float>(xd[r * c + ch] * scale[ch] + shift[ch]);
    return out;
  }

  if (rows < 2)
    fail(ErrorKind::InvalidArgument,
         "batchnorm: train mode needs at least 2 values per channel, got " + std::to_string(rows));

  std::vector<double> mean(c, 0.0), var(c, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (int ch = 0; ch < c; ++ch) mean[ch] += xd[r * c + ch];
  for (int ch = 0; ch < c; ++ch) mean[ch] /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (int ch = 0; ch < c; ++ch) {
      const double d = xd[r * c + ch] - mean[ch];
      var[ch] += d * d;
    }
  for (int ch = 0; ch < c; ++ch) var[ch] /= static_cast<double>(rows);

  std::vector<double> inv_std(c);
  for (int ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + eps);

  Tensor normalized(x.shape);
  float* nd = normalized.data.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (int ch = 0; ch < c; ++ch) {
      const double xh = (xd[r * c + ch] - mean[ch]) * inv_std[ch];
      nd[r * c + ch] = static_cast<float>(xh);
      od[r * c + ch] = static_cast<float>(xh * gamma.data[ch] + beta.data[ch]);
    }

  for (int ch = 0; ch < c; ++ch) {
    running_mean.data[ch] = static_cast<float>(momentum * running_mean.data[ch] + (1.0 - momentum) * mean[ch]);
    running_var.data[ch] = static_cast<float>(momentum * running_var.data[ch] + (1.0 - momentum) * var[ch]);
  }

  if (cache) {
    cache->normalized = std::move(normalized);
    cache->mean = std::move(mean);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

BatchNormGrads batchnorm_train_backward(const BatchNormCache& cache, const Tensor& gamma,
                                        const Tensor& grad_out) {
  const Tensor& xh = cache.normalized;
  if (!same_shape(xh, grad_out))
    fail(ErrorKind::ShapeMismatch, "batchnorm_backward: grad_out shape " + shape_str(grad_out.shape) +
                                       " does not match " + shape_str(xh.shape));
  const int c = xh.dim(xh.rank() - 1);
  const std::size_t rows = xh.numel() / static_cast<std::size_t>(c);
  const float* g = grad_out.data.data();
  const float* n = xh.data.data();

  std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (int ch = 0; ch < c; ++ch) {
      sum_g[ch] += g[r * c + ch];
      sum_gx[ch] += static_cast<double>(g[r * c + ch]) * n[r * c + ch];
    }

  BatchNormGrads grads;
  grads.grad_gamma = Tensor({c});
  grads.grad_beta = Tensor({c});
  for (int ch = 0; ch < c; ++ch) {
    grads.grad_gamma.data[ch] = static_cast<float>(sum_gx[ch]);
    grads.grad_beta.data[ch] = static_cast<float>(sum_g[ch]);
  }

  grads.grad_x = Tensor(xh.shape);
  float* gx = grads.grad_x.data.data();
  const double inv_rows = 1.0 / static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (int ch = 0; ch < c; ++ch) {
      const double dxh = static_cast<double>(g[r * c + ch]) * gamma.data[ch];
      const double mean_dxh = sum_g[ch] * gamma.data[ch] * inv_rows;
      const double mean_dxh_xh = sum_gx[ch] * gamma.data[ch] * inv_rows;
      gx[r * c + ch] =
          static_cast<float>(cache.inv_std[ch] * (dxh - mean_dxh - n[r * c + ch] * mean_dxh_xh));
    }
  return grads;
}

Tensor batchnorm_infer_backward(const Tensor& grad_out, const Tensor& gamma,
                                const Tensor& running_var, float eps) {
  const int c = grad_out.dim(grad_out.rank() - 1);
  require_shape(gamma, {c}, "batchnorm_infer_backward: gamma");
  Tensor out(grad_out.shape);
  std::vector<double> scale(c);
  for (int ch = 0; ch < c; ++ch)
    scale[ch] = static_cast<double>(gamma.data[ch]) / std::sqrt(static_cast<double>(running_var.data[ch]) + eps);
  const std::size_t rows = grad_out.numel() / static_cast<std::size_t>(c);
  for (std::size_t r = 0; r < rows; ++r)
    for (int ch = 0; ch < c; ++ch)
      out.data[r * c + ch] = static_cast<float>(grad_out.data[r * c + ch] * scale[ch]);
  return out;
}

MaxPoolResult maxpool2(const Tensor& x) {
  if (x.rank() != 3)
    fail(ErrorKind::ShapeMismatch, "maxpool2: input must be rank 3 [H,W,C], got " + shape_str(x.shape));
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (h < 2 || w < 2)
    fail(ErrorKind::InvalidArgument, "maxpool2: spatial dims must be at least 2x2, got " +
                                         std::to_string(h) + "x" + std::to_string(w));
  const int ho = h / 2, wo = w / 2;
  MaxPoolResult res;
  res.output = Tensor({ho, wo, c});
  res.argmax.resize(res.output.numel());
  const float* xd = x.data.data();
  for (int i = 0; i < ho; ++i) {
    for (int j = 0; j < wo; ++j) {
      for (int ch = 0; ch < c; ++ch) {
        std::int32_t best = static_cast<std::int32_t>((static_cast<std::size_t>(2 * i) * w + 2 * j) * c + ch);
        float bv = xd[best];
        for (int du = 0; du < 2; ++du)
          for (int dv = 0; dv < 2; ++dv) {
            const std::int32_t idx =
                static_cast<std::int32_t>((static_cast<std::size_t>(2 * i + du) * w + 2 * j + dv) * c + ch);
            if (xd[idx] > bv) {
              bv = xd[idx];
              best = idx;
            }
          }
        const std::size_t o = (static_cast<std::size_t>(i) * wo + j) * c + ch;
        res.output.data[o] = bv;
        res.argmax[o] = best;
      }
    }
  }
  return res;
}

Tensor maxpool2_backward(const MaxPoolResult& pooled, const std::vector<int>& input_shape,
                         const Tensor& grad_out) {
  if (!same_shape(pooled.output, grad_out))
    fail(ErrorKind::ShapeMismatch, "maxpool2_backward: grad_out shape " + shape_str(grad_out.shape) +
                                       " does not match pooled shape " + shape_str(pooled.output.shape));
  Tensor grad_in(input_shape);
  for (std::size_t o = 0; o < pooled.argmax.size(); ++o)
    grad_in.data[static_cast<std::size_t>(pooled.argmax[o])] += grad_out.data[o];
  return grad_in;
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 1)
    fail(ErrorKind::ShapeMismatch, "dense: input must be rank 1, got " + shape_str(x.shape));
  if (w.rank() != 2 || w.dim(0) != x.dim(0))
    fail(ErrorKind::ShapeMismatch, "dense: weight rows (" + shape_str(w.shape) +
                                       ") must match input length " + std::to_string(x.dim(0)));
  const int m = w.dim(0), n = w.dim(1);
  if (!b.absent() && (b.rank() != 1 || b.dim(0) != n))
    fail(ErrorKind::ShapeMismatch, "dense: bias length must be " + std::to_string(n) + ", got " + shape_str(b.shape));
  Tensor out({n});
  std::vector<double> acc(n, 0.0);
  if (!b.absent())
    for (int j = 0; j < n; ++j) acc[j] = b.data[j];
  const float* wd = w.data.data();
  for (int i = 0; i < m; ++i) {
    const double a = x.data[i];
    const float* row = wd + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) acc[j] += a * row[j];
  }
  for (int j = 0; j < n; ++j) out.data[j] = static_cast<float>(acc[j]);
  return out;
}

DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, bool has_bias) {
  const int m = w.dim(0), n = w.dim(1);
  require_shape(grad_out, {n}, "dense_backward: grad_out");
  DenseGrads grads;
  grads.grad_x = Tensor({m});
  grads.grad_w = Tensor({m, n});
  const float* wd = w.data.data();
  for (int i = 0; i < m; ++i) {
    const float* row = wd + static_cast<std::size_t>(i) * n;
    double dot = 0.0;
    float* gw = grads.grad_w.data.data() + static_cast<std::size_t>(i) * n;
    const float a = x.data[i];
    for (int j = 0; j < n; ++j) {
      dot += static_cast<double>(row[j]) * grad_out.data[j];
      gw[j] = a * grad_out.data[j];
    }
    grads.grad_x.data[i] = static_cast<float>(dot);
  }
  if (has_bias) grads.grad_b = grad_out;
  return grads;
}

Tensor dropout(const Tensor& x, float p, SeededRng& rng, Mode mode, Tensor* mask_out) {
  if (!(p >= 0.0f && p < 1.0f))
    fail(ErrorKind::InvalidArgument, "dropout: p must be in [0,1), got " + std::to_string(p));
  if (mode == Mode::Infer || p == 0.0f) {
    if (mask_out) *mask_out = Tensor::full(x.shape, 1.0f);
    return x;
  }
  const float scale = 1.0f / (1.0f - p);
  Tensor out(x.shape);
  Tensor mask(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const bool keep = rng.uniform() >= p;
    mask.data[i] = keep ? scale : 0.0f;
    out.data[i] = keep ? x.data[i] * scale : 0.0f;
  }
  if (mask_out) *mask_out = std::move(mask);
  return out;
}

Tensor softmax(const Tensor& x) {
  if (x.numel() == 0) fail(ErrorKind::InvalidArgument, "softmax: empty input");
  Tensor out(x.shape);
  const float mx = *std::max_element(x.data.begin(), x.data.end());
  double sum = 0.0;
  std::vector<double> e(x.numel());
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    e[i] = std::exp(static_cast<double>(x.data[i]) - mx);
    sum += e[i];
  }
  for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = static_cast<float>(e[i] / sum);
  return out;
}

Tensor flatten(const Tensor& x) {
  Tensor out = x;
  out.shape = {static_cast<int>(x.numel())};
  return out;
}

double finite_difference_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                               const Tensor& analytic_grad, float eps) {
  if (!same_shape(x, analytic_grad))
    fail(ErrorKind::ShapeMismatch, "finite_difference_check: gradient shape " +
                                       shape_str(analytic_grad.shape) + " does not match input " +
                                       shape_str(x.shape));
  double max_rel = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const float orig = x.data[i];
    probe.data[i] = orig + eps;
    const double hi = f(probe);
    const float xp = probe.data[i];
    probe.data[i] = orig - eps;
    const double lo = f(probe);
    const float xm = probe.data[i];
    probe.data[i] = orig;
    const double fd = (hi - lo) / (static_cast<double>(xp) - static_cast<double>(xm));
    const double an = analytic_grad.data[i];
    // relative above unit scale, absolute below: a float32 forward limits what
    // a central difference at this eps can resolve for tiny gradient elements
    const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace ssk::ops
