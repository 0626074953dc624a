#include "gradcam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "errors.hpp"

namespace ssk {

Tensor gradcam_map(const Tensor& activation, const Tensor& activation_grad) {
  if (!same_shape(activation, activation_grad) || activation.rank() != 3)
    fail(ErrorKind::ShapeMismatch, "gradcam_map: activation/gradient shapes differ");
  const int h = activation.dim(0), w = activation.dim(1), c = activation.dim(2);
  const std::size_t npix = static_cast<std::size_t>(h) * w;

  // channel importance: spatial mean of the gradient
  std::vector<double> alpha(static_cast<std::size_t>(c), 0.0);
  for (std::size_t p = 0; p < npix; ++p)
    for (int k = 0; k < c; ++k) alpha[static_cast<std::size_t>(k)] += activation_grad.data[p * c + k];
  for (auto& a : alpha) a /= static_cast<double>(npix);

  Tensor map({h, w});
  for (std::size_t p = 0; p < npix; ++p) {
    double s = 0.0;
    for (int k = 0; k < c; ++k) s += alpha[static_cast<std::size_t>(k)] * activation.data[p * c + k];
    map.data[p] = s > 0.0 ? static_cast<float>(s) : 0.0f;
  }
  return map;
}

Tensor upsample_bilinear(const Tensor& map, int out_h, int out_w) {
  if (map.rank() != 2) fail(ErrorKind::ShapeMismatch, "upsample: expected a rank-2 map");
  const int h = map.dim(0), w = map.dim(1);
  Tensor out({out_h, out_w});
  const float sy = static_cast<float>(h) / static_cast<float>(out_h);
  const float sx = static_cast<float>(w) / static_cast<float>(out_w);
  for (int i = 0; i < out_h; ++i) {
    const float fy = std::clamp((static_cast<float>(i) + 0.5f) * sy - 0.5f, 0.0f,
                                static_cast<float>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const float wy = fy - static_cast<float>(y0);
    for (int j = 0; j < out_w; ++j) {
      const float fx = std::clamp((static_cast<float>(j) + 0.5f) * sx - 0.5f, 0.0f,
                                  static_cast<float>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const float wx = fx - static_cast<float>(x0);
      const float top = map.at(y0, x0) * (1.0f - wx) + map.at(y0, x1) * wx;
      const float bot = map.at(y1, x0) * (1.0f - wx) + map.at(y1, x1) * wx;
      out.at(i, j) = top * (1.0f - wy) + bot * wy;
    }
  }
  return out;
}

namespace {

Tensor output_gradient(const Model& m, int output_index) {
  const int out = head_outputs(m.head);
  if (output_index < 0 || output_index >= out)
    fail(ErrorKind::InvalidArgument, "output index " + std::to_string(output_index) +
                                         " out of range for this head");
  Tensor g = Tensor::zeros({out});
  g.data[static_cast<std::size_t>(output_index)] = 1.0f;
  return g;
}

void max_normalize(Tensor& t) {
  float mx = 0.0f;
  for (float v : t.data) mx = std::max(mx, v);
  if (mx > 0.0f)
    for (auto& v : t.data) v /= mx;
}

}  // namespace

GradCamResult weighted_gradcam(const Model& m, const Tensor& x, int output_index,
                               const std::array<float, 5>& layer_weights) {
  InferTrace trace;
  forward_sample(m, x, &trace);
  SampleBackwardOptions opts;
  opts.relu_rule = ReluBackwardRule::Standard;
  opts.capture_activation_grads = true;
  SampleBackwardResult back = backward_sample(m, trace, output_gradient(m, output_index), opts);

  GradCamResult res;
  const int size = m.config.input_size;
  res.combined = Tensor::zeros({size, size});
  for (int l = 0; l < 5; ++l) {
    res.layer_maps[static_cast<std::size_t>(l)] =
        gradcam_map(trace.a[static_cast<std::size_t>(l)], back.activation_grads[static_cast<std::size_t>(l)]);
    // weight the raw maps: layers with little signal contribute little, and
    // equal weights reduce to the plain sum of per-layer maps
    Tensor up = upsample_bilinear(res.layer_maps[static_cast<std::size_t>(l)], size, size);
    const float wl = layer_weights[static_cast<std::size_t>(l)];
    for (std::size_t i = 0; i < res.combined.data.size(); ++i)
      res.combined.data[i] += wl * up.data[i];
  }
  for (auto& v : res.combined.data) v = std::max(v, 0.0f);
  max_normalize(res.combined);
  return res;
}

Tensor guided_backprop(const Model& m, const Tensor& x, int output_index, ReluBackwardRule rule) {
  InferTrace trace;
  forward_sample(m, x, &trace);
  SampleBackwardOptions opts;
  opts.relu_rule = rule;
  return backward_sample(m, trace, output_gradient(m, output_index), opts).grad_input;
}

void export_overlay_ppm(const std::string& path, const Tensor& image, const Tensor& heat,
                        float alpha) {
  if (image.rank() != 3 || image.dim(2) != 1)
    fail(ErrorKind::ShapeMismatch, "overlay: image must be [H,W,1]");
  const int h = image.dim(0), w = image.dim(1);
  require_shape(heat, {h, w}, "overlay: heatmap");
  if (!(alpha >= 0.0f && alpha <= 1.0f))
    fail(ErrorKind::InvalidArgument, "overlay: alpha must be in [0,1]");

  auto jet = [](float t, unsigned char* rgb) {
    const auto seg = [](float v) { return std::clamp(v, 0.0f, 1.0f); };
    rgb[0] = static_cast<unsigned char>(std::lround(seg(1.5f - std::abs(4.0f * t - 3.0f)) * 255.0f));
    rgb[1] = static_cast<unsigned char>(std::lround(seg(1.5f - std::abs(4.0f * t - 2.0f)) * 255.0f));
    rgb[2] = static_cast<unsigned char>(std::lround(seg(1.5f - std::abs(4.0f * t - 1.0f)) * 255.0f));
  };

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f << "P6\n" << (2 * w) << " " << h << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(2 * w) * 3);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const float g = std::clamp(image.at(i, j, 0), 0.0f, 1.0f);
      const unsigned char gray = static_cast<unsigned char>(std::lround(g * 255.0f));
      row[static_cast<std::size_t>(j) * 3] = gray;
      row[static_cast<std::size_t>(j) * 3 + 1] = gray;
      row[static_cast<std::size_t>(j) * 3 + 2] = gray;

      unsigned char rgb[3];
      jet(std::clamp(heat.at(i, j), 0.0f, 1.0f), rgb);
      for (int ch = 0; ch < 3; ++ch) {
        const float blended = (1.0f - alpha) * g * 255.0f + alpha * static_cast<float>(rgb[ch]);
        row[(static_cast<std::size_t>(w) + j) * 3 + static_cast<std::size_t>(ch)] =
            static_cast<unsigned char>(std::lround(std::clamp(blended, 0.0f, 255.0f)));
      }
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) fail(ErrorKind::Io, "write failed: " + path);
}

}  // namespace ssk
