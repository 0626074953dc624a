#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "errors.hpp"

namespace ssk {

std::string head_name(Head h) { return h == Head::Skill ? "skill" : "force"; }

Head head_from_name(const std::string& name) {
  if (name == "skill") return Head::Skill;
  if (name == "force") return Head::Force;
  fail(ErrorKind::InvalidArgument, "unknown head '" + name + "' (expected 'skill' or 'force')");
}

void ArchitectureConfig::validate() const {
  if (input_size < 32)
    fail(ErrorKind::InvalidArgument,
         "input size must be at least 32 (five pooling stages), got " + std::to_string(input_size));
  for (int c : channels)
    if (c < 1) fail(ErrorKind::InvalidArgument, "channel counts must be positive");
  if (dense_units < 1) fail(ErrorKind::InvalidArgument, "dense_units must be positive");
  if (!(dropout >= 0.0f && dropout < 1.0f))
    fail(ErrorKind::InvalidArgument, "dropout must be in [0,1), got " + std::to_string(dropout));
}

std::array<int, 6> spatial_plan(int input_size) {
  std::array<int, 6> plan;
  plan[0] = input_size;
  for (int i = 1; i <= 5; ++i) plan[i] = plan[i - 1] / 2;
  return plan;
}

int flatten_units(const ArchitectureConfig& cfg) {
  const auto plan = spatial_plan(cfg.input_size);
  return plan[5] * plan[5] * cfg.channels[4];
}

std::vector<Tensor*> Model::trainable_refs() {
  std::vector<Tensor*> refs;
  for (auto& l : conv) {
    refs.push_back(&l.kernel);
    if (!l.bias.absent()) refs.push_back(&l.bias);
    refs.push_back(&l.gamma);
    refs.push_back(&l.beta);
  }
  refs.push_back(&dense_w);
  if (!dense_b.absent()) refs.push_back(&dense_b);
  refs.push_back(&head_w);
  if (!head_b.absent()) refs.push_back(&head_b);
  return refs;
}

std::vector<const Tensor*> Model::trainable_refs() const {
  auto refs = const_cast<Model*>(this)->trainable_refs();
  return {refs.begin(), refs.end()};
}

std::vector<std::string> Model::trainable_names() const {
  std::vector<std::string> names;
  for (int l = 0; l < 5; ++l) {
    const std::string p = "conv" + std::to_string(l + 1) + ".";
    names.push_back(p + "kernel");
    if (!conv[l].bias.absent()) names.push_back(p + "bias");
    names.push_back(p + "gamma");
    names.push_back(p + "beta");
  }
  names.push_back("dense.w");
  if (!dense_b.absent()) names.push_back("dense.b");
  names.push_back("head.w");
  if (!head_b.absent()) names.push_back("head.b");
  return names;
}

std::vector<Tensor*> Model::running_stat_refs() {
  std::vector<Tensor*> refs;
  for (auto& l : conv) {
    refs.push_back(&l.running_mean);
    refs.push_back(&l.running_var);
  }
  return refs;
}

std::vector<const Tensor*> Model::running_stat_refs() const {
  auto refs = const_cast<Model*>(this)->running_stat_refs();
  return {refs.begin(), refs.end()};
}

std::vector<std::string> Model::running_stat_names() const {
  std::vector<std::string> names;
  for (int l = 0; l < 5; ++l) {
    const std::string p = "conv" + std::to_string(l + 1) + ".";
    names.push_back(p + "running_mean");
    names.push_back(p + "running_var");
  }
  return names;
}

ParamCount count_parameters(const ArchitectureConfig& cfg, Head head) {
  cfg.validate();
  ParamCount pc;
  int cin = 1;
  for (int c : cfg.channels) {
    pc.trainable += 9LL * cin * c + (cfg.with_bias ? c : 0) + 2LL * c;  // kernel, bias, gamma, beta
    pc.non_trainable += 2LL * c;                                        // running mean and variance
    cin = c;
  }
  const long long flat = flatten_units(cfg);
  pc.trainable += flat * cfg.dense_units + (cfg.with_bias ? cfg.dense_units : 0);
  const long long out = head_outputs(head);
  pc.trainable += static_cast<long long>(cfg.dense_units) * out + (cfg.with_bias ? out : 0);
  return pc;
}

ChannelSearchResult search_channel_config(long long target_trainable, int input_size, Head head,
                                          int dense_units, bool with_bias) {
  static constexpr std::array<int, 6> kMenu = {2, 4, 8, 16, 32, 64};
  ChannelSearchResult best;
  best.gap = -1;
  for (int a = 0; a < 6; ++a)
    for (int b = a; b < 6; ++b)
      for (int c = b; c < 6; ++c)
        for (int d = c; d < 6; ++d)
          for (int e = d; e < 6; ++e) {
            ArchitectureConfig cfg;
            cfg.input_size = input_size;
            cfg.channels = {kMenu[a], kMenu[b], kMenu[c], kMenu[d], kMenu[e]};
            cfg.dense_units = dense_units;
            cfg.with_bias = with_bias;
            const long long n = count_parameters(cfg, head).trainable;
            const long long gap = std::llabs(n - target_trainable);
            if (best.gap < 0 || gap < best.gap || (gap == best.gap && n < best.trainable)) {
              best.channels = cfg.channels;
              best.trainable = n;
              best.gap = gap;
              best.exact = gap == 0;
            }
          }
  return best;
}

namespace {

Tensor he_uniform(const std::vector<int>& shape, int fan_in, SeededRng& rng) {
  Tensor t(shape);
  const float limit = std::sqrt(6.0f / static_cast<float>(fan_in));
  for (auto& v : t.data) v = rng.uniform_range(-limit, limit);
  return t;
}

}  // namespace

Model build_model(const ArchitectureConfig& cfg, Head head, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.config = cfg;
  m.head = head;
  SeededRng rng(seed);
  int cin = 1;
  for (int l = 0; l < 5; ++l) {
    const int cout = cfg.channels[l];
    m.conv[l].kernel = he_uniform({3, 3, cin, cout}, 9 * cin, rng);
    if (cfg.with_bias) m.conv[l].bias = Tensor::zeros({cout});
    m.conv[l].gamma = Tensor::full({cout}, 1.0f);
    m.conv[l].beta = Tensor::zeros({cout});
    m.conv[l].running_mean = Tensor::zeros({cout});
    m.conv[l].running_var = Tensor::full({cout}, 1.0f);
    cin = cout;
  }
  const int flat = flatten_units(cfg);
  m.dense_w = he_uniform({flat, cfg.dense_units}, flat, rng);
  if (cfg.with_bias) m.dense_b = Tensor::zeros({cfg.dense_units});
  const int out = head_outputs(head);
  m.head_w = he_uniform({cfg.dense_units, out}, cfg.dense_units, rng);
  if (cfg.with_bias) m.head_b = Tensor::zeros({out});
  return m;
}

namespace {

Tensor stack_samples(const std::vector<Tensor>& samples) {
  const int n = static_cast<int>(samples.size());
  std::vector<int> shape = {n};
  shape.insert(shape.end(), samples[0].shape.begin(), samples[0].shape.end());
  Tensor stacked(shape);
  const std::size_t per = samples[0].numel();
  for (int s = 0; s < n; ++s)
    std::memcpy(stacked.data.data() + s * per, samples[s].data.data(), per * sizeof(float));
  return stacked;
}

std::vector<Tensor> split_samples(const Tensor& stacked, const std::vector<int>& sample_shape) {
  const int n = stacked.dim(0);
  const std::size_t per = shape_numel(sample_shape);
  std::vector<Tensor> out(n);
  for (int s = 0; s < n; ++s) {
    out[s] = Tensor(sample_shape);
    std::memcpy(out[s].data.data(), stacked.data.data() + s * per, per * sizeof(float));
  }
  return out;
}

void check_input(const Model& m, const Tensor& x, const char* who) {
  require_shape(x, {m.config.input_size, m.config.input_size, 1}, who);
}

Tensor apply_relu_rule(const Tensor& z, const Tensor& g, ReluBackwardRule rule) {
  Tensor out(z.shape);
  switch (rule) {
    case ReluBackwardRule::Standard:
      for (std::size_t i = 0; i < z.data.size(); ++i)
        out.data[i] = z.data[i] > 0.0f ? g.data[i] : 0.0f;
      break;
    case ReluBackwardRule::Guided:
      for (std::size_t i = 0; i < z.data.size(); ++i)
        out.data[i] = (z.data[i] > 0.0f && g.data[i] > 0.0f) ? g.data[i] : 0.0f;
      break;
    case ReluBackwardRule::GuidedProduct:
      for (std::size_t i = 0; i < z.data.size(); ++i)
        out.data[i] = std::max(z.data[i], 0.0f) * std::max(g.data[i], 0.0f);
      break;
  }
  return out;
}

}  // namespace

std::vector<Tensor> forward_batch(Model& m, const std::vector<const Tensor*>& inputs,
                                  ops::Mode mode, SeededRng& rng, BatchTrace* trace) {
  if (inputs.empty()) fail(ErrorKind::InvalidArgument, "forward_batch: empty batch");
  const int n = static_cast<int>(inputs.size());
  BatchTrace local;
  BatchTrace& t = trace ? *trace : local;
  t = BatchTrace{};
  t.n = n;
  t.mode = mode;
  t.input.reserve(n);
  for (const Tensor* x : inputs) {
    check_input(m, *x, "forward_batch: input");
    t.input.push_back(*x);
  }

  std::vector<Tensor> cur(n);
  for (int l = 0; l < 5; ++l) {
    auto& layer = m.conv[l];
    std::vector<Tensor> a(n);
    t.z[l].resize(n);
    for (int s = 0; s < n; ++s) {
      const Tensor& in = l == 0 ? t.input[s] : cur[s];
      t.z[l][s] = ops::conv2d(in, layer.kernel, layer.bias);
      a[s] = ops::relu(t.z[l][s]);
    }
    Tensor stacked = stack_samples(a);
    Tensor bn_out = ops::batchnorm(stacked, layer.gamma, layer.beta, layer.running_mean,
                                   layer.running_var, mode, 1e-3f, 0.99f,
                                   mode == ops::Mode::Train ? &t.bn[l] : nullptr);
    std::vector<Tensor> b = split_samples(bn_out, a[0].shape);
    t.pooled[l].resize(n);
    for (int s = 0; s < n; ++s) {
      t.pooled[l][s] = ops::maxpool2(b[s]);
      cur[s] = t.pooled[l][s].output;
    }
  }

  t.flat.resize(n);
  t.dense_z.resize(n);
  t.dropped.resize(n);
  t.mask.resize(n);
  t.logits.resize(n);
  for (int s = 0; s < n; ++s) {
    t.flat[s] = ops::flatten(cur[s]);
    t.dense_z[s] = ops::dense(t.flat[s], m.dense_w, m.dense_b);
    Tensor da = ops::relu(t.dense_z[s]);
    t.dropped[s] = ops::dropout(da, m.config.dropout, rng, mode, &t.mask[s]);
    t.logits[s] = ops::dense(t.dropped[s], m.head_w, m.head_b);
  }
  return t.logits;
}

std::vector<Tensor> backward_batch(const Model& m, const BatchTrace& t,
                                   const std::vector<Tensor>& grad_logits) {
  if (t.mode != ops::Mode::Train)
    fail(ErrorKind::State, "backward_batch: trace was not recorded in train mode");
  const int n = t.n;
  if (static_cast<int>(grad_logits.size()) != n)
    fail(ErrorKind::InvalidArgument, "backward_batch: grad_logits count does not match batch");

  const bool bias = m.config.with_bias;
  auto acc_add = [](std::vector<double>& acc, const Tensor& g) {
    if (acc.empty()) acc.assign(g.numel(), 0.0);
    for (std::size_t i = 0; i < g.data.size(); ++i) acc[i] += g.data[i];
  };
  auto acc_to_tensor = [](const std::vector<double>& acc, const std::vector<int>& shape) {
    Tensor t(shape);
    for (std::size_t i = 0; i < acc.size(); ++i) t.data[i] = static_cast<float>(acc[i]);
    return t;
  };

  std::vector<double> head_w_acc, head_b_acc, dense_w_acc, dense_b_acc;
  std::vector<Tensor> grad_pool(n);  // grad wrt layer-5 pooled output, reshaped spatially
  const auto plan = spatial_plan(m.config.input_size);
  const std::vector<int> top_shape = {plan[5], plan[5], m.config.channels[4]};

  for (int s = 0; s < n; ++s) {
    auto hg = ops::dense_backward(t.dropped[s], m.head_w, grad_logits[s], bias);
    acc_add(head_w_acc, hg.grad_w);
    if (bias) acc_add(head_b_acc, hg.grad_b);
    Tensor grad_da(t.mask[s].shape);
    for (std::size_t i = 0; i < grad_da.data.size(); ++i)
      grad_da.data[i] = hg.grad_x.data[i] * t.mask[s].data[i];
    Tensor grad_dz = ops::relu_backward(t.dense_z[s], grad_da);
    auto dg = ops::dense_backward(t.flat[s], m.dense_w, grad_dz, bias);
    acc_add(dense_w_acc, dg.grad_w);
    if (bias) acc_add(dense_b_acc, dg.grad_b);
    grad_pool[s] = dg.grad_x;
    grad_pool[s].shape = top_shape;
  }

  std::array<Tensor, 5> grad_kernel, grad_bias, grad_gamma, grad_beta;
  for (int l = 4; l >= 0; --l) {
    const auto& layer = m.conv[l];
    std::vector<Tensor> grad_b(n);
    for (int s = 0; s < n; ++s)
      grad_b[s] = ops::maxpool2_backward(t.pooled[l][s], t.z[l][s].shape, grad_pool[s]);
    Tensor stacked_gb = stack_samples(grad_b);
    auto bn_grads = ops::batchnorm_train_backward(t.bn[l], layer.gamma, stacked_gb);
    grad_gamma[l] = bn_grads.grad_gamma;
    grad_beta[l] = bn_grads.grad_beta;
    std::vector<Tensor> grad_a = split_samples(bn_grads.grad_x, t.z[l][0].shape);

    std::vector<double> kacc, bacc;
    const bool need_input = l > 0;
    for (int s = 0; s < n; ++s) {
      Tensor grad_z = ops::relu_backward(t.z[l][s], grad_a[s]);
      const Tensor& in = l == 0 ? t.input[s] : t.pooled[l - 1][s].output;
      Tensor grad_in;
      ops::conv2d_backward_accumulate(in, layer.kernel, grad_z, kacc, bacc,
                                      need_input ? &grad_in : nullptr);
      if (need_input) grad_pool[s] = std::move(grad_in);
    }
    grad_kernel[l] = acc_to_tensor(kacc, layer.kernel.shape);
    if (bias) grad_bias[l] = acc_to_tensor(bacc, {layer.kernel.dim(3)});
  }

  std::vector<Tensor> grads;
  for (int l = 0; l < 5; ++l) {
    grads.push_back(std::move(grad_kernel[l]));
    if (bias) grads.push_back(std::move(grad_bias[l]));
    grads.push_back(std::move(grad_gamma[l]));
    grads.push_back(std::move(grad_beta[l]));
  }
  grads.push_back(acc_to_tensor(dense_w_acc, m.dense_w.shape));
  if (bias) grads.push_back(acc_to_tensor(dense_b_acc, m.dense_b.shape));
  grads.push_back(acc_to_tensor(head_w_acc, m.head_w.shape));
  if (bias) grads.push_back(acc_to_tensor(head_b_acc, m.head_b.shape));
  return grads;
}

Tensor forward_sample(const Model& m, const Tensor& x, InferTrace* trace) {
  check_input(m, x, "forward_sample: input");
  InferTrace local;
  InferTrace& t = trace ? *trace : local;
  t = InferTrace{};
  t.conv_in.resize(5);
  t.z.resize(5);
  t.a.resize(5);
  t.b.resize(5);
  t.pooled.resize(5);

  Tensor cur = x;
  for (int l = 0; l < 5; ++l) {
    auto& layer = m.conv[l];
    t.conv_in[l] = cur;
    t.z[l] = ops::conv2d(cur, layer.kernel, layer.bias);
    t.a[l] = ops::relu(t.z[l]);
    // running stats are const in inference; the op takes mutable refs, so copy
    Tensor rm = layer.running_mean, rv = layer.running_var;
    t.b[l] = ops::batchnorm(t.a[l], layer.gamma, layer.beta, rm, rv, ops::Mode::Infer);
    t.pooled[l] = ops::maxpool2(t.b[l]);
    cur = t.pooled[l].output;
  }
  t.flat = ops::flatten(cur);
  t.dense_z = ops::dense(t.flat, m.dense_w, m.dense_b);
  t.dense_a = ops::relu(t.dense_z);
  t.logits = ops::dense(t.dense_a, m.head_w, m.head_b);
  return t.logits;
}

SampleBackwardResult backward_sample(const Model& m, const InferTrace& t, const Tensor& grad_logits,
                                     const SampleBackwardOptions& opts) {
  require_shape(grad_logits, {head_outputs(m.head)}, "backward_sample: grad_logits");
  SampleBackwardResult res;
  if (opts.capture_activation_grads) res.activation_grads.resize(5);

  auto hg = ops::dense_backward(t.dense_a, m.head_w, grad_logits, false);
  Tensor grad_dz = apply_relu_rule(t.dense_z, hg.grad_x, opts.relu_rule);
  auto dg = ops::dense_backward(t.flat, m.dense_w, grad_dz, false);
  Tensor grad_pool = dg.grad_x;
  grad_pool.shape = t.pooled[4].output.shape;

  for (int l = 4; l >= 0; --l) {
    const auto& layer = m.conv[l];
    Tensor grad_b = ops::maxpool2_backward(t.pooled[l], t.b[l].shape, grad_pool);
    Tensor grad_a = ops::batchnorm_infer_backward(grad_b, layer.gamma, layer.running_var);
    if (opts.capture_activation_grads) res.activation_grads[l] = grad_a;
    Tensor grad_z = apply_relu_rule(t.z[l], grad_a, opts.relu_rule);
    auto cg = ops::conv2d_backward(t.conv_in[l], layer.kernel, grad_z, false, true);
    grad_pool = std::move(cg.grad_input);
  }
  res.grad_input = std::move(grad_pool);
  return res;
}

double forward_tail_from_activation(const Model& m, int layer, const Tensor& activation,
                                    int output_index) {
  if (layer < 0 || layer > 4) fail(ErrorKind::InvalidArgument, "layer index out of range");
  if (output_index < 0 || output_index >= head_outputs(m.head))
    fail(ErrorKind::InvalidArgument, "output index out of range");
  Tensor cur = activation;
  for (int l = layer; l < 5; ++l) {
    const auto& lp = m.conv[l];
    if (l > layer) {
      cur = ops::conv2d(cur, lp.kernel, lp.bias);
      cur = ops::relu(cur);
    }
    Tensor rm = lp.running_mean, rv = lp.running_var;
    cur = ops::batchnorm(cur, lp.gamma, lp.beta, rm, rv, ops::Mode::Infer);
    cur = ops::maxpool2(cur).output;
  }
  Tensor flat = ops::flatten(cur);
  Tensor dz = ops::dense(flat, m.dense_w, m.dense_b);
  Tensor da = ops::relu(dz);
  Tensor logits = ops::dense(da, m.head_w, m.head_b);
  return logits.data[static_cast<std::size_t>(output_index)];
}

int predict_skill(const Model& m, const Tensor& x, std::array<float, 5>* probs) {
  if (m.head != Head::Skill) fail(ErrorKind::State, "predict_skill called on a force model");
  Tensor logits = forward_sample(m, x);
  Tensor p = ops::softmax(logits);
  if (probs)
    for (int i = 0; i < 5; ++i) (*probs)[i] = p.data[i];
  int best = 0;
  for (int i = 1; i < 5; ++i)
    if (p.data[i] > p.data[best]) best = i;
  return best;
}

float predict_force(const Model& m, const Tensor& x) {
  if (m.head != Head::Force) fail(ErrorKind::State, "predict_force called on a skill model");
  return forward_sample(m, x).data[0];
}

}  // namespace ssk
