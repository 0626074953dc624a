#include "train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "errors.hpp"
#include "metrics.hpp"

namespace ssk {

LossResult scce_loss(const Tensor& logits, int label) {
  const int n = static_cast<int>(logits.numel());
  if (label < 0 || label >= n)
    fail(ErrorKind::InvalidArgument, "scce_loss: label " + std::to_string(label) +
                                         " out of range for " + std::to_string(n) + " classes");
  LossResult res;
  Tensor probs = ops::softmax(logits);
  const double p = std::max(static_cast<double>(probs.data[static_cast<std::size_t>(label)]), 1e-30);
  res.loss = -std::log(p);
  res.grad_logits = probs;
  res.grad_logits.data[static_cast<std::size_t>(label)] -= 1.0f;
  return res;
}

LossResult mae_loss(const Tensor& output, float target) {
  require_shape(output, {1}, "mae_loss: output");
  LossResult res;
  const double d = static_cast<double>(output.data[0]) - target;
  res.loss = std::abs(d);
  res.grad_logits = Tensor({1});
  res.grad_logits.data[0] = d > 0.0 ? 1.0f : (d < 0.0 ? -1.0f : 0.0f);
  return res;
}

Adam::Adam(std::vector<Tensor*> params, float lr, float beta1, float beta2, float eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor* p : params_) {
    m_.emplace_back(p->numel(), 0.0f);
    v_.emplace_back(p->numel(), 0.0f);
  }
}

void Adam::step(const std::vector<Tensor>& grads) {
  if (grads.size() != params_.size())
    fail(ErrorKind::InvalidArgument, "Adam::step: gradient count does not match parameters");
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(beta1_), t_);
  const double bc2 = 1.0 - std::pow(static_cast<double>(beta2_), t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    if (!same_shape(p, grads[i]))
      fail(ErrorKind::ShapeMismatch, "Adam::step: gradient shape mismatch at parameter " +
                                         std::to_string(i));
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      const double g = grads[i].data[j];
      const double mj = beta1_ * m[j] + (1.0 - beta1_) * g;
      const double vj = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double mhat = mj / bc1;
      const double vhat = vj / bc2;
      p.data[j] = static_cast<float>(p.data[j] - lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

TrainStats train_model(Model& m, const TrainSet& data, const TrainConfig& cfg) {
  const std::size_t n = data.images.size();
  if (n == 0) fail(ErrorKind::InvalidArgument, "train_model: empty training set");
  if (m.head == Head::Skill && data.skill_labels.size() != n)
    fail(ErrorKind::InvalidArgument, "train_model: skill labels do not match image count");
  if (m.head == Head::Force && data.force_targets.size() != n)
    fail(ErrorKind::InvalidArgument, "train_model: force targets do not match image count");
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    fail(ErrorKind::InvalidArgument, "train_model: epochs and batch_size must be positive");

  SeededRng rng(SeededRng::derive(cfg.seed, {0x7E41}));
  Adam opt(m.trainable_refs(), cfg.lr);
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);

  TrainStats stats;
  BatchTrace trace;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      const int bn = static_cast<int>(end - start);
      std::vector<const Tensor*> batch(bn);
      for (int s = 0; s < bn; ++s) batch[s] = data.images[static_cast<std::size_t>(order[start + s])];

      forward_batch(m, batch, ops::Mode::Train, rng, &trace);

      std::vector<Tensor> grad_logits(bn);
      const float inv_bn = 1.0f / static_cast<float>(bn);
      for (int s = 0; s < bn; ++s) {
        const int idx = order[start + s];
        LossResult lr = m.head == Head::Skill
                            ? scce_loss(trace.logits[s], data.skill_labels[static_cast<std::size_t>(idx)])
                            : mae_loss(trace.logits[s], data.force_targets[static_cast<std::size_t>(idx)]);
        loss_sum += lr.loss;
        for (auto& g : lr.grad_logits.data) g *= inv_bn;
        grad_logits[s] = std::move(lr.grad_logits);
      }
      opt.step(backward_batch(m, trace, grad_logits));
    }
    stats.epoch_loss.push_back(loss_sum / static_cast<double>(n));
  }
  return stats;
}

FoldMode fold_mode_from_name(const std::string& name) {
  if (name == "rotating") return FoldMode::Rotating;
  if (name == "strided") return FoldMode::Strided;
  fail(ErrorKind::InvalidArgument, "unknown fold mode '" + name + "' (rotating|strided)");
}

std::string fold_mode_name(FoldMode mode) {
  return mode == FoldMode::Rotating ? "rotating" : "strided";
}

std::pair<std::vector<int>, std::vector<int>> fold_partition(int n, int fold, int folds,
                                                             FoldMode mode) {
  if (folds < 2 || folds > n)
    fail(ErrorKind::InvalidArgument, "fold_partition: need 2 <= folds <= n, got folds=" +
                                         std::to_string(folds) + " n=" + std::to_string(n));
  if (fold < 0 || fold >= folds)
    fail(ErrorKind::InvalidArgument, "fold_partition: fold index out of range");
  std::vector<int> train, test;
  if (mode == FoldMode::Rotating) {
    const int lo = static_cast<int>(static_cast<long long>(n) * fold / folds);
    const int hi = static_cast<int>(static_cast<long long>(n) * (fold + 1) / folds);
    for (int i = 0; i < n; ++i) (i >= lo && i < hi ? test : train).push_back(i);
  } else {
    for (int i = 0; i < n; ++i) (i % folds == fold ? test : train).push_back(i);
  }
  return {std::move(train), std::move(test)};
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

constexpr const char* kLedgerHeader =
    "run_id,head,subject,skill,fold,iteration,seed,train_count,test_count,final_train_loss,metric";

}  // namespace

void ExperimentLedger::write_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f << kLedgerHeader << "\n";
  for (const auto& r : rows) {
    f << r.run_id << ',' << r.head << ',' << r.subject << ',' << r.skill << ',' << r.fold << ','
      << r.iteration << ',' << r.seed << ',' << r.train_count << ',' << r.test_count << ','
      << format_double(r.final_train_loss) << ',' << format_double(r.metric) << "\n";
  }
  if (!f) fail(ErrorKind::Io, "write failed: " + path);
}

ExperimentLedger ExperimentLedger::read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::Io, "cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != kLedgerHeader)
    fail(ErrorKind::MalformedHeader, "unexpected ledger header in " + path);
  ExperimentLedger ledger;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cols = split_csv_line(line);
    if (cols.size() != 11)
      fail(ErrorKind::Corruption, "ledger row has " + std::to_string(cols.size()) + " columns");
    LedgerRow r;
    try {
      r.run_id = cols[0];
      r.head = cols[1];
      r.subject = std::stoi(cols[2]);
      r.skill = std::stoi(cols[3]);
      r.fold = std::stoi(cols[4]);
      r.iteration = std::stoi(cols[5]);
      r.seed = std::stoull(cols[6]);
      r.train_count = std::stoi(cols[7]);
      r.test_count = std::stoi(cols[8]);
      r.final_train_loss = std::stod(cols[9]);
      r.metric = std::stod(cols[10]);
    } catch (const std::exception&) {
      fail(ErrorKind::Corruption, "unparsable ledger row: " + line);
    }
    ledger.rows.push_back(std::move(r));
  }
  return ledger;
}

void TimingSheet::write_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f << "run_id,seconds\n";
  for (const auto& [id, s] : seconds) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", s);
    f << id << ',' << buf << "\n";
  }
}

namespace {

std::string run_id(const char* head, int subject, int skill, int fold, int iter) {
  char buf[64];
  if (skill < 0)
    std::snprintf(buf, sizeof(buf), "%s-s%02d-f%d-i%d", head, subject, fold, iter);
  else
    std::snprintf(buf, sizeof(buf), "%s-s%02d-k%d-f%d-i%d", head, subject, skill, fold, iter);
  return buf;
}

}  // namespace

CvResult run_cross_validation(const Dataset& ds, const CvConfig& cfg, const CvProgress& progress) {
  cfg.arch.validate();
  if (ds.params.image_size != cfg.arch.input_size)
    fail(ErrorKind::InvalidArgument, "dataset image size " + std::to_string(ds.params.image_size) +
                                         " does not match model input size " +
                                         std::to_string(cfg.arch.input_size));
  if (cfg.folds < 2 || cfg.iterations < 1)
    fail(ErrorKind::InvalidArgument, "cross-validation needs folds >= 2 and iterations >= 1");

  CvResult res;
  std::vector<double> skill_metrics, force_metrics;
  using clock = std::chrono::steady_clock;

  auto record = [&](LedgerRow row, double secs) {
    res.timing.seconds.emplace_back(row.run_id, secs);
    if (progress) progress(row);
    res.ledger.rows.push_back(std::move(row));
  };

  for (int u = 0; u < ds.params.subjects; ++u) {
    const SubjectData& subj = ds.subjects[static_cast<std::size_t>(u)];

    if (cfg.run_skill) {
      for (int f = 0; f < cfg.folds; ++f) {
        // stratified: each skill's chronological sequence is split separately
        TrainSet train_set, test_set;
        for (int k = 0; k < kNumSkills; ++k) {
          const auto& frames = subj.frames[static_cast<std::size_t>(k)];
          auto [tr, te] = fold_partition(static_cast<int>(frames.size()), f, cfg.folds,
                                         cfg.fold_mode);
          for (int i : tr) {
            train_set.images.push_back(&frames[static_cast<std::size_t>(i)]);
            train_set.skill_labels.push_back(k);
          }
          for (int i : te) {
            test_set.images.push_back(&frames[static_cast<std::size_t>(i)]);
            test_set.skill_labels.push_back(k);
          }
        }
        for (int it = 0; it < cfg.iterations; ++it) {
          const std::uint64_t run_seed = SeededRng::derive(
              cfg.seed, {1, static_cast<std::uint64_t>(u), static_cast<std::uint64_t>(f),
                         static_cast<std::uint64_t>(it)});
          const auto t0 = clock::now();
          Model m = build_model(cfg.arch, Head::Skill, SeededRng::derive(run_seed, {0}));
          TrainConfig tc = cfg.skill_train;
          tc.seed = SeededRng::derive(run_seed, {1});
          TrainStats stats = train_model(m, train_set, tc);
          SkillEval ev = evaluate_skill(m, test_set.images, test_set.skill_labels);
          const double secs = std::chrono::duration<double>(clock::now() - t0).count();

          LedgerRow row;
          row.run_id = run_id("skill", u, -1, f, it);
          row.head = "skill";
          row.subject = u;
          row.skill = -1;
          row.fold = f;
          row.iteration = it;
          row.seed = run_seed;
          row.train_count = static_cast<int>(train_set.images.size());
          row.test_count = static_cast<int>(test_set.images.size());
          row.final_train_loss = stats.epoch_loss.back();
          row.metric = ev.accuracy;
          skill_metrics.push_back(ev.accuracy);
          record(std::move(row), secs);
        }
      }
    }

    if (cfg.run_force) {
      for (int k = 0; k < kNumSkills; ++k) {
        const auto& frames = subj.frames[static_cast<std::size_t>(k)];
        const auto& forces = subj.forces[static_cast<std::size_t>(k)];
        for (int f = 0; f < cfg.folds; ++f) {
          auto [tr, te] = fold_partition(static_cast<int>(frames.size()), f, cfg.folds,
                                         cfg.fold_mode);
          TrainSet train_set;
          std::vector<const Tensor*> test_images;
          std::vector<float> test_targets;
          for (int i : tr) {
            train_set.images.push_back(&frames[static_cast<std::size_t>(i)]);
            train_set.force_targets.push_back(forces[static_cast<std::size_t>(i)]);
          }
          for (int i : te) {
            test_images.push_back(&frames[static_cast<std::size_t>(i)]);
            test_targets.push_back(forces[static_cast<std::size_t>(i)]);
          }
          for (int it = 0; it < cfg.iterations; ++it) {
            const std::uint64_t run_seed = SeededRng::derive(
                cfg.seed, {2, static_cast<std::uint64_t>(u), static_cast<std::uint64_t>(k),
                           static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(it)});
            const auto t0 = clock::now();
            Model m = build_model(cfg.arch, Head::Force, SeededRng::derive(run_seed, {0}));
            TrainConfig tc = cfg.force_train;
            tc.seed = SeededRng::derive(run_seed, {1});
            TrainStats stats = train_model(m, train_set, tc);
            ForceEval ev = evaluate_force(m, test_images, test_targets);
            const double secs = std::chrono::duration<double>(clock::now() - t0).count();

            LedgerRow row;
            row.run_id = run_id("force", u, k, f, it);
            row.head = "force";
            row.subject = u;
            row.skill = k;
            row.fold = f;
            row.iteration = it;
            row.seed = run_seed;
            row.train_count = static_cast<int>(train_set.images.size());
            row.test_count = static_cast<int>(test_images.size());
            row.final_train_loss = stats.epoch_loss.back();
            row.metric = ev.rmse;
            force_metrics.push_back(ev.rmse);
            record(std::move(row), secs);
          }
        }
      }
    }
  }

  res.skill_runs = static_cast<int>(skill_metrics.size());
  res.force_runs = static_cast<int>(force_metrics.size());
  if (!skill_metrics.empty()) {
    res.skill_accuracy_mean = mean(skill_metrics);
    res.skill_accuracy_sd = stddev(skill_metrics);
  }
  if (!force_metrics.empty()) {
    res.force_rmse_mean = mean(force_metrics);
    res.force_rmse_sd = stddev(force_metrics);
  }
  return res;
}

}  // namespace ssk
