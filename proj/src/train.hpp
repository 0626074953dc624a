// Adam training for both heads plus the per-subject 5-fold cross-validation
// protocol with its experiment ledger.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "model.hpp"

namespace ssk {

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;
};

// sparse categorical cross-entropy on raw logits (softmax applied internally)
LossResult scce_loss(const Tensor& logits, int label);
// mean absolute error on the scalar force output (sign subgradient, 0 at ties)
LossResult mae_loss(const Tensor& output, float target);

class Adam {
 public:
  Adam(std::vector<Tensor*> params, float lr, float beta1 = 0.9f, float beta2 = 0.999f,
       float eps = 1e-7f);
  void step(const std::vector<Tensor>& grads);
  int steps_taken() const { return t_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<float>> m_, v_;
  float lr_, beta1_, beta2_, eps_;
  int t_ = 0;
};

struct TrainConfig {
  int epochs = 10;
  float lr = 1e-4f;
  int batch_size = 32;
  std::uint64_t seed = 0;

  static TrainConfig skill_defaults() { return {10, 1e-4f, 32, 0}; }
  static TrainConfig force_defaults() { return {20, 1e-3f, 32, 0}; }
};

struct TrainSet {
  std::vector<const Tensor*> images;
  std::vector<int> skill_labels;     // used by skill-head models
  std::vector<float> force_targets;  // used by force-head models
};

struct TrainStats {
  std::vector<double> epoch_loss;  // mean per-sample loss per epoch
};

TrainStats train_model(Model& m, const TrainSet& data, const TrainConfig& cfg);

enum class FoldMode {
  Rotating,  // contiguous chronological blocks; fold f is the f-th block
  Strided    // frame i goes to fold i % folds
};
FoldMode fold_mode_from_name(const std::string& name);
std::string fold_mode_name(FoldMode mode);

// returns {train_indices, test_indices} for the given fold
std::pair<std::vector<int>, std::vector<int>> fold_partition(int n, int fold, int folds,
                                                             FoldMode mode);

struct LedgerRow {
  std::string run_id;
  std::string head;  // "skill" or "force"
  int subject = 0;
  int skill = -1;  // -1 for skill-head rows (all skills pooled)
  int fold = 0;
  int iteration = 0;
  std::uint64_t seed = 0;
  int train_count = 0;
  int test_count = 0;
  double final_train_loss = 0.0;
  double metric = 0.0;  // accuracy % (skill) or RMSE in N (force)
};

struct ExperimentLedger {
  std::vector<LedgerRow> rows;
  void write_csv(const std::string& path) const;  // deterministic bytes
  static ExperimentLedger read_csv(const std::string& path);
};

// wall-clock seconds per run; kept out of the ledger so reruns are
// byte-identical
struct TimingSheet {
  std::vector<std::pair<std::string, double>> seconds;
  void write_csv(const std::string& path) const;
};

struct CvConfig {
  ArchitectureConfig arch;
  int folds = 5;
  int iterations = 3;
  FoldMode fold_mode = FoldMode::Rotating;
  bool run_skill = true;
  bool run_force = true;
  TrainConfig skill_train = TrainConfig::skill_defaults();
  TrainConfig force_train = TrainConfig::force_defaults();
  std::uint64_t seed = 0;
};

struct CvResult {
  ExperimentLedger ledger;
  TimingSheet timing;
  double skill_accuracy_mean = 0.0, skill_accuracy_sd = 0.0;
  double force_rmse_mean = 0.0, force_rmse_sd = 0.0;
  int skill_runs = 0, force_runs = 0;
};

using CvProgress = std::function<void(const LedgerRow&)>;

CvResult run_cross_validation(const Dataset& ds, const CvConfig& cfg,
                              const CvProgress& progress = nullptr);

}  // namespace ssk
