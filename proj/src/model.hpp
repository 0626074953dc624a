// Shared-backbone CNN: five conv -> relu -> batchnorm -> maxpool stages, then
// dense(16) + relu + dropout and either a 5-way softmax skill head or a single
// linear force output.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "ops.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace ssk {

enum class Head { Skill, Force };

inline int head_outputs(Head h) { return h == Head::Skill ? 5 : 1; }
std::string head_name(Head h);
Head head_from_name(const std::string& name);

struct ArchitectureConfig {
  int input_size = 64;
  std::array<int, 5> channels = {16, 16, 16, 16, 16};
  int dense_units = 16;
  float dropout = 0.5f;
  bool with_bias = true;

  void validate() const;
};

// spatial side length entering each stage plus the final pooled size;
// plan[0] = input_size, plan[5] = side after the fifth pool
std::array<int, 6> spatial_plan(int input_size);
int flatten_units(const ArchitectureConfig& cfg);

struct ConvLayerParams {
  Tensor kernel;        // [3,3,cin,cout]
  Tensor bias;          // [cout] or absent
  Tensor gamma, beta;   // [cout]
  Tensor running_mean;  // [cout], non-trainable
  Tensor running_var;   // [cout], non-trainable
};

struct Model {
  ArchitectureConfig config;
  Head head = Head::Skill;
  std::array<ConvLayerParams, 5> conv;
  Tensor dense_w, dense_b;  // [flat,16], [16]
  Tensor head_w, head_b;    // [16,out], [out]

  // fixed traversal order used by the optimizer and the checkpoint format
  std::vector<Tensor*> trainable_refs();
  std::vector<const Tensor*> trainable_refs() const;
  std::vector<std::string> trainable_names() const;
  std::vector<Tensor*> running_stat_refs();
  std::vector<const Tensor*> running_stat_refs() const;
  std::vector<std::string> running_stat_names() const;
};

struct ParamCount {
  long long trainable = 0;
  long long non_trainable = 0;
  long long total() const { return trainable + non_trainable; }
};

ParamCount count_parameters(const ArchitectureConfig& cfg, Head head);

struct ChannelSearchResult {
  std::array<int, 5> channels;
  long long trainable = 0;
  long long gap = 0;  // |trainable - target|
  bool exact = false;
};

// Searches monotone non-decreasing channel ladders drawn from {2,4,8,16,32,64}
// for the configuration whose trainable-parameter count lands closest to
// target (ties broken toward the smaller ladder).
ChannelSearchResult search_channel_config(long long target_trainable, int input_size, Head head,
                                          int dense_units = 16, bool with_bias = true);

Model build_model(const ArchitectureConfig& cfg, Head head, std::uint64_t seed);

// --- training path (batched; batchnorm uses batch statistics) ---

struct BatchTrace {
  int n = 0;
  ops::Mode mode = ops::Mode::Train;
  std::vector<Tensor> input;                   // raw inputs (conv input for layer 0)
  std::array<std::vector<Tensor>, 5> z;        // conv output, pre-relu
  std::array<ops::BatchNormCache, 5> bn;       // over the stacked batch
  std::array<std::vector<ops::MaxPoolResult>, 5> pooled;
  std::vector<Tensor> flat, dense_z, dropped, mask, logits;
};

// returns raw head outputs per sample; updates running stats in Train mode
std::vector<Tensor> forward_batch(Model& m, const std::vector<const Tensor*>& inputs,
                                  ops::Mode mode, SeededRng& rng, BatchTrace* trace);

// grad_logits: dLoss/dlogits per sample (any loss scaling already applied).
// Returns parameter gradients parallel to trainable_refs(), summed over the
// batch with 64-bit accumulation.
std::vector<Tensor> backward_batch(const Model& m, const BatchTrace& trace,
                                   const std::vector<Tensor>& grad_logits);

// --- inference path (single sample; batchnorm uses running stats) ---

struct InferTrace {
  std::vector<Tensor> conv_in, z, a, b;  // per layer; a = relu output
  std::vector<ops::MaxPoolResult> pooled;
  Tensor flat, dense_z, dense_a, logits;
};

Tensor forward_sample(const Model& m, const Tensor& x, InferTrace* trace = nullptr);

enum class ReluBackwardRule {
  Standard,      // pass where the forward input was positive
  Guided,        // additionally require a positive upstream gradient
  GuidedProduct  // relu(activation) * relu(upstream gradient)
};

struct SampleBackwardOptions {
  ReluBackwardRule relu_rule = ReluBackwardRule::Standard;  // applied at every relu
  bool capture_activation_grads = false;
};

struct SampleBackwardResult {
  Tensor grad_input;
  std::vector<Tensor> activation_grads;  // grad at each layer's relu output
};

SampleBackwardResult backward_sample(const Model& m, const InferTrace& t, const Tensor& grad_logits,
                                     const SampleBackwardOptions& opts = {});

// Re-runs the network from layer `layer`'s relu output onward (inference
// mode) and returns the head output at output_index. Lets tests check
// activation gradients against finite differences.
double forward_tail_from_activation(const Model& m, int layer, const Tensor& activation,
                                    int output_index);

int predict_skill(const Model& m, const Tensor& x, std::array<float, 5>* probs = nullptr);
float predict_force(const Model& m, const Tensor& x);

}  // namespace ssk
