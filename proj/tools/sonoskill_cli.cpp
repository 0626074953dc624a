// Command-line front end for the sonoskill shared library. Talks to the core
// exclusively through the public C API.
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sonoskill.h"

namespace {

[[noreturn]] void die(const char* what, ssk_status status) {
  std::fprintf(stderr, "error: %s: [%s] %s\n", what, ssk_status_name(status), ssk_last_error());
  std::exit(1);
}

void check(ssk_status status, const char* what) {
  if (status != SSK_OK) die(what, status);
}

struct DatasetHandle {
  ssk_dataset* ptr = nullptr;
  ~DatasetHandle() { ssk_dataset_close(ptr); }
};

struct ModelHandle {
  ssk_model* ptr = nullptr;
  ~ModelHandle() { ssk_model_free(ptr); }
};

void open_dataset(const std::string& dir, DatasetHandle& h) {
  check(ssk_dataset_open(dir.c_str(), &h.ptr), "opening dataset");
}

void load_model(const std::string& path, ModelHandle& h) {
  check(ssk_model_load(path.c_str(), &h.ptr), "loading model");
}

void write_resolved_config(CLI::App* cmd, const std::string& out_dir) {
  std::ofstream f(out_dir + "/run_config.ini", std::ios::trunc);
  if (f) f << cmd->config_to_str(true, false);
}

void add_arch_options(CLI::App* cmd, std::vector<int>& channels, int& dense_units, double& dropout,
                      bool& no_bias) {
  cmd->add_option("--channels", channels, "conv channels per layer (5 values)")
      ->expected(5)
      ->delimiter(',');
  cmd->add_option("--dense", dense_units, "dense layer width");
  cmd->add_option("--dropout", dropout, "dropout rate before the head");
  cmd->add_flag("--no-bias", no_bias, "train without conv/dense biases");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forearm-ultrasound skill classification and force regression"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI file");
  app.set_version_flag("--version", ssk_version_string());

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic phantom dataset");
  ssk_synth_params sp;
  ssk_synth_params_defaults(&sp);
  std::string synth_out;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--subjects", sp.subjects, "number of subjects");
  synth->add_option("--frames", sp.frames_per_skill, "frames per (subject, skill)");
  synth->add_option("--size", sp.image_size, "square image side length");
  synth->add_option("--segment", sp.segment_len, "frames per effort segment");
  synth->add_option("--peak-min", sp.peak_min, "minimum segment peak force (N)");
  synth->add_option("--peak-max", sp.peak_max, "maximum segment peak force (N)");
  synth->add_option("--noise", sp.noise_level, "speckle noise amplitude");
  synth->add_option("--seed", synth_seed, "generator seed");

  // ---- train ----
  auto* train = app.add_subcommand("train", "train one model and save a checkpoint");
  std::string train_dataset, train_out, train_head = "skill", train_fold_mode = "rotating";
  int train_subject = 0, train_skill = 0, train_epochs = -1, train_batch = -1;
  int train_holdout = -1, train_folds = 5, train_dense = 16;
  double train_lr = -1.0, train_dropout = 0.5;
  bool train_no_bias = false;
  std::vector<int> train_channels = {16, 16, 16, 16, 16};
  std::uint64_t train_seed = 0;
  train->add_option("--dataset", train_dataset, "dataset directory")->required();
  train->add_option("--out", train_out, "checkpoint output path")->required();
  train->add_option("--head", train_head, "skill | force")
      ->check(CLI::IsMember({"skill", "force"}));
  train->add_option("--subject", train_subject, "subject index");
  train->add_option("--skill", train_skill, "skill index (force head only)");
  add_arch_options(train, train_channels, train_dense, train_dropout, train_no_bias);
  train->add_option("--epochs", train_epochs, "training epochs (default per head)");
  train->add_option("--lr", train_lr, "learning rate (default per head)");
  train->add_option("--batch", train_batch, "batch size");
  train->add_option("--holdout-fold", train_holdout, "fold to hold out for evaluation (-1 = none)");
  train->add_option("--folds", train_folds, "number of folds for the holdout split");
  train->add_option("--fold-mode", train_fold_mode, "rotating | strided")
      ->check(CLI::IsMember({"rotating", "strided"}));
  train->add_option("--seed", train_seed, "training seed");

  // ---- cv ----
  auto* cv = app.add_subcommand("cv", "run the per-subject cross-validation protocol");
  std::string cv_dataset, cv_out, cv_fold_mode = "rotating";
  ssk_cv_params cp;
  ssk_cv_params_defaults(&cp);
  std::vector<int> cv_channels = {cp.channels[0], cp.channels[1], cp.channels[2], cp.channels[3],
                                  cp.channels[4]};
  int cv_dense = cp.dense_units;
  double cv_dropout = cp.dropout;
  bool cv_no_bias = false, cv_skill_only = false, cv_force_only = false, cv_quiet = false;
  std::uint64_t cv_seed = 0;
  cv->add_option("--dataset", cv_dataset, "dataset directory")->required();
  cv->add_option("--out", cv_out, "output directory for ledger.csv/timing.csv/summary.txt")
      ->required();
  add_arch_options(cv, cv_channels, cv_dense, cv_dropout, cv_no_bias);
  cv->add_option("--folds", cp.folds, "folds per experiment");
  cv->add_option("--iterations", cp.iterations, "repetitions per fold");
  cv->add_option("--fold-mode", cv_fold_mode, "rotating | strided")
      ->check(CLI::IsMember({"rotating", "strided"}));
  cv->add_flag("--skill-only", cv_skill_only, "run only skill-classification experiments");
  cv->add_flag("--force-only", cv_force_only, "run only force-regression experiments");
  cv->add_option("--skill-epochs", cp.skill_epochs, "epochs for skill models");
  cv->add_option("--skill-lr", cp.skill_learning_rate, "learning rate for skill models");
  cv->add_option("--skill-batch", cp.skill_batch_size, "batch size for skill models");
  cv->add_option("--force-epochs", cp.force_epochs, "epochs for force models");
  cv->add_option("--force-lr", cp.force_learning_rate, "learning rate for force models");
  cv->add_option("--force-batch", cp.force_batch_size, "batch size for force models");
  cv->add_option("--seed", cv_seed, "protocol seed");
  cv->add_flag("--quiet", cv_quiet, "suppress per-run progress lines");

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on one subject");
  std::string eval_model, eval_dataset;
  int eval_subject = 0, eval_skill = -1;
  eval->add_option("--model", eval_model, "checkpoint path")->required();
  eval->add_option("--dataset", eval_dataset, "dataset directory")->required();
  eval->add_option("--subject", eval_subject, "subject index");
  eval->add_option("--skill", eval_skill,
                   "skill index (-1 = all skills; required for force models)");

  // ---- gradcam ----
  auto* gradcam = app.add_subcommand("gradcam", "write heatmap overlays for one frame");
  std::string gc_model, gc_dataset, gc_out, gc_saliency = "none";
  int gc_subject = 0, gc_skill = 0, gc_frame = 0, gc_class = -1;
  std::vector<double> gc_weights;
  gradcam->add_option("--model", gc_model, "checkpoint path")->required();
  gradcam->add_option("--dataset", gc_dataset, "dataset directory")->required();
  gradcam->add_option("--out", gc_out, "output path prefix")->required();
  gradcam->add_option("--subject", gc_subject, "subject index");
  gradcam->add_option("--skill", gc_skill, "skill index of the frame sequence");
  gradcam->add_option("--frame", gc_frame, "frame index");
  gradcam->add_option("--class", gc_class, "class logit to explain (-1 = predicted)");
  gradcam->add_option("--weights", gc_weights, "layer weights for the combined map (5 values)")
      ->expected(5)
      ->delimiter(',');
  gradcam->add_option("--saliency", gc_saliency, "none | guided | product")
      ->check(CLI::IsMember({"none", "guided", "product"}));

  // ---- stream ----
  auto* stream = app.add_subcommand("stream", "replay frames at a fixed rate through both heads");
  std::string st_skill_model, st_dataset, st_csv;
  std::vector<std::string> st_force_models;
  int st_subject = 0, st_skill = 0, st_max = 0;
  double st_rate = 6.3;
  stream->add_option("--skill-model", st_skill_model, "skill checkpoint path")->required();
  stream
      ->add_option("--force-model", st_force_models,
                   "force checkpoint path; give once for a shared model or five times for "
                   "per-skill routing")
      ->required();
  stream->add_option("--dataset", st_dataset, "dataset directory")->required();
  stream->add_option("--subject", st_subject, "subject index");
  stream->add_option("--skill", st_skill, "skill sequence to replay");
  stream->add_option("--rate", st_rate, "frame rate in Hz");
  stream->add_option("--max-frames", st_max, "stop after this many frames (0 = all)");
  stream->add_option("--csv", st_csv, "write per-frame records to this CSV");

  // ---- info ----
  auto* info = app.add_subcommand("info", "describe a dataset or checkpoint");
  std::string info_dataset, info_model;
  info->add_option("--dataset", info_dataset, "dataset directory");
  info->add_option("--model", info_model, "checkpoint path");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    sp.seed = synth_seed;
    check(ssk_synth_generate(&sp, synth_out.c_str()), "generating dataset");
    write_resolved_config(synth, synth_out);
    std::printf("dataset written to %s (%d subjects x %d skills x %d frames, %dx%d)\n",
                synth_out.c_str(), sp.subjects, SSK_NUM_SKILLS, sp.frames_per_skill, sp.image_size,
                sp.image_size);
    return 0;
  }

  if (train->parsed()) {
    DatasetHandle ds;
    open_dataset(train_dataset, ds);
    const int head = train_head == "force" ? SSK_HEAD_FORCE : SSK_HEAD_SKILL;
    ssk_train_params tp;
    ssk_train_params_defaults(&tp, head);
    tp.subject = train_subject;
    tp.skill = train_skill;
    for (int i = 0; i < 5; ++i) tp.channels[i] = train_channels[static_cast<std::size_t>(i)];
    tp.dense_units = train_dense;
    tp.dropout = train_dropout;
    tp.with_bias = train_no_bias ? 0 : 1;
    if (train_epochs > 0) tp.epochs = train_epochs;
    if (train_lr > 0.0) tp.learning_rate = train_lr;
    if (train_batch > 0) tp.batch_size = train_batch;
    tp.holdout_fold = train_holdout;
    tp.folds = train_folds;
    tp.fold_mode = train_fold_mode == "strided" ? 1 : 0;
    tp.seed = train_seed;

    double metric = 0.0;
    check(ssk_train_single(ds.ptr, &tp, train_out.c_str(), &metric), "training");
    std::printf("checkpoint written to %s\n", train_out.c_str());

    ModelHandle m;
    load_model(train_out, m);
    int64_t trainable = 0, frozen = 0;
    check(ssk_model_param_count(m.ptr, &trainable, &frozen), "counting parameters");
    std::printf("parameters: %" PRId64 " trainable + %" PRId64 " non-trainable\n", trainable,
                frozen);
    if (!std::isnan(metric)) {
      if (head == SSK_HEAD_SKILL)
        std::printf("holdout fold %d accuracy: %.2f %%\n", train_holdout, metric);
      else
        std::printf("holdout fold %d RMSE: %.4f N\n", train_holdout, metric);
    }
    return 0;
  }

  if (cv->parsed()) {
    DatasetHandle ds;
    open_dataset(cv_dataset, ds);
    for (int i = 0; i < 5; ++i) cp.channels[i] = cv_channels[static_cast<std::size_t>(i)];
    cp.dense_units = cv_dense;
    cp.dropout = cv_dropout;
    cp.with_bias = cv_no_bias ? 0 : 1;
    cp.fold_mode = cv_fold_mode == "strided" ? 1 : 0;
    if (cv_skill_only && cv_force_only) {
      std::fprintf(stderr, "error: --skill-only and --force-only are mutually exclusive\n");
      return 1;
    }
    cp.run_skill = cv_force_only ? 0 : 1;
    cp.run_force = cv_skill_only ? 0 : 1;
    cp.seed = cv_seed;

    auto progress = [](const char* run_id, double metric, void*) {
      std::printf("%-24s %8.3f\n", run_id, metric);
      std::fflush(stdout);
    };
    ssk_cv_summary summary;
    check(ssk_cross_validate(ds.ptr, &cp, cv_out.c_str(), cv_quiet ? nullptr : +progress, nullptr,
                             &summary),
          "cross-validation");
    write_resolved_config(cv, cv_out);
    if (summary.skill_runs > 0)
      std::printf("skill accuracy over %d runs: %.2f %% (sd %.2f)\n", summary.skill_runs,
                  summary.skill_accuracy_mean, summary.skill_accuracy_sd);
    if (summary.force_runs > 0)
      std::printf("force RMSE over %d runs: %.4f N (sd %.4f, %.2f %% of range)\n",
                  summary.force_runs, summary.force_rmse_mean, summary.force_rmse_sd,
                  summary.force_rmse_mean / 4.0 * 100.0);
    std::printf("ledger written to %s/ledger.csv\n", cv_out.c_str());
    return 0;
  }

  if (eval->parsed()) {
    DatasetHandle ds;
    open_dataset(eval_dataset, ds);
    ModelHandle m;
    load_model(eval_model, m);
    double metric = 0.0;
    check(ssk_evaluate(m.ptr, ds.ptr, eval_subject, eval_skill, &metric), "evaluating");
    if (ssk_model_head(m.ptr) == SSK_HEAD_SKILL)
      std::printf("subject %d accuracy: %.2f %%\n", eval_subject, metric);
    else
      std::printf("subject %d skill %d RMSE: %.4f N (%.2f %% of range)\n", eval_subject, eval_skill,
                  metric, metric / 4.0 * 100.0);
    return 0;
  }

  if (gradcam->parsed()) {
    DatasetHandle ds;
    open_dataset(gc_dataset, ds);
    ModelHandle m;
    load_model(gc_model, m);
    std::vector<float> weights;
    for (double w : gc_weights) weights.push_back(static_cast<float>(w));
    const int rule = gc_saliency == "guided"    ? SSK_SALIENCY_GUIDED
                     : gc_saliency == "product" ? SSK_SALIENCY_GUIDED_PRODUCT
                                                : SSK_SALIENCY_NONE;
    check(ssk_gradcam_run(m.ptr, ds.ptr, gc_subject, gc_skill, gc_frame, gc_class,
                          weights.empty() ? nullptr : weights.data(), rule, gc_out.c_str()),
          "grad-cam");
    std::printf("wrote %s_overlay.ppm and %s_heat.npy\n", gc_out.c_str(), gc_out.c_str());
    if (rule != SSK_SALIENCY_NONE)
      std::printf("wrote %s_saliency.ppm and %s_saliency.npy\n", gc_out.c_str(), gc_out.c_str());
    return 0;
  }

  if (stream->parsed()) {
    if (st_force_models.size() != 1 && st_force_models.size() != 5) {
      std::fprintf(stderr, "error: --force-model must be given once or five times\n");
      return 1;
    }
    DatasetHandle ds;
    open_dataset(st_dataset, ds);
    ModelHandle skill_model;
    load_model(st_skill_model, skill_model);
    std::vector<std::unique_ptr<ModelHandle>> owned;
    const ssk_model* routed[5];
    for (const std::string& path : st_force_models) {
      owned.push_back(std::make_unique<ModelHandle>());
      load_model(path, *owned.back());
    }
    for (int k = 0; k < 5; ++k)
      routed[k] = owned[st_force_models.size() == 1 ? 0 : static_cast<std::size_t>(k)]->ptr;
    ssk_stream_stats stats;
    check(ssk_stream_run(skill_model.ptr, routed, ds.ptr, st_subject, st_skill, st_rate, st_max,
                         st_csv.empty() ? nullptr : st_csv.c_str(), &stats),
          "streaming");
    std::printf("frames emitted:   %d (period %.1f ms)\n", stats.emitted, stats.period_ms);
    std::printf("frames processed: %d\n", stats.processed);
    std::printf("frames displaced: %d\n", stats.displaced);
    std::printf("deadline misses:  %d\n", stats.deadline_misses);
    std::printf("skill latency:    mean %.2f ms, max %.2f ms\n", stats.mean_skill_ms,
                stats.max_skill_ms);
    std::printf("force latency:    mean %.2f ms, max %.2f ms\n", stats.mean_force_ms,
                stats.max_force_ms);
    std::printf("wall time:        %.2f s\n", stats.duration_s);
    if (!st_csv.empty()) std::printf("per-frame records written to %s\n", st_csv.c_str());
    return 0;
  }

  if (info->parsed()) {
    if (info_dataset.empty() && info_model.empty()) {
      std::fprintf(stderr, "error: info needs --dataset and/or --model\n");
      return 1;
    }
    if (!info_dataset.empty()) {
      DatasetHandle ds;
      open_dataset(info_dataset, ds);
      ssk_dataset_info di;
      check(ssk_dataset_get_info(ds.ptr, &di), "reading dataset info");
      std::printf("dataset %s\n", info_dataset.c_str());
      std::printf("  subjects:         %d\n", di.subjects);
      std::printf("  frames per skill: %d\n", di.frames_per_skill);
      std::printf("  image size:       %dx%d\n", di.image_size, di.image_size);
      std::printf("  segment length:   %d frames\n", di.segment_len);
      std::printf("  peak force:       %.2f .. %.2f N\n", di.peak_min, di.peak_max);
      std::printf("  noise level:      %.3f\n", di.noise_level);
      std::printf("  seed:             %" PRIu64 "\n", di.seed);
    }
    if (!info_model.empty()) {
      ModelHandle m;
      load_model(info_model, m);
      int64_t trainable = 0, frozen = 0;
      check(ssk_model_param_count(m.ptr, &trainable, &frozen), "counting parameters");
      std::printf("model %s\n", info_model.c_str());
      std::printf("  head:       %s\n", ssk_model_head(m.ptr) == SSK_HEAD_SKILL ? "skill" : "force");
      std::printf("  input size: %dx%d\n", ssk_model_input_size(m.ptr),
                  ssk_model_input_size(m.ptr));
      std::printf("  parameters: %" PRId64 " trainable + %" PRId64 " non-trainable\n", trainable,
                  frozen);
    }
    return 0;
  }

  return 0;
}
