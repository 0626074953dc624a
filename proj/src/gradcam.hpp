// Grad-CAM over the conv stack (hooked at each layer's relu output) plus
// guided backpropagation saliency.
#pragma once

#include <array>
#include <string>

#include "model.hpp"

namespace ssk {

// relative weight of each conv layer when combining maps; deeper layers carry
// more semantic signal, so the default profile is deep-heavy
inline std::array<float, 5> default_layer_weights() { return {0.15f, 0.35f, 0.75f, 1.0f, 1.0f}; }

struct GradCamResult {
  std::array<Tensor, 5> layer_maps;  // [h_l, w_l], unnormalized, >= 0
  Tensor combined;                   // [S, S], max-normalized to 1 (all-zero if no signal)
};

// output_index: class index for skill models (gradient of that logit),
// must be 0 for force models (gradient of the force output)
GradCamResult weighted_gradcam(const Model& m, const Tensor& x, int output_index,
                               const std::array<float, 5>& layer_weights = default_layer_weights());

// single-layer map at native resolution, from captured activations/gradients
Tensor gradcam_map(const Tensor& activation, const Tensor& activation_grad);

Tensor upsample_bilinear(const Tensor& map, int out_h, int out_w);

// saliency wrt the input; rule selects the relu backward variant
Tensor guided_backprop(const Model& m, const Tensor& x, int output_index,
                       ReluBackwardRule rule = ReluBackwardRule::Guided);

// side-by-side PPM (P6): grayscale input on the left, jet-colormap overlay on
// the right, blended with the given alpha
void export_overlay_ppm(const std::string& path, const Tensor& image, const Tensor& heat,
                        float alpha = 0.4f);

}  // namespace ssk
