#include "sonoskill.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <string>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "gradcam.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "npy.hpp"
#include "stream.hpp"
#include "train.hpp"

struct ssk_dataset {
  ssk::Dataset ds;
};

struct ssk_model {
  ssk::Model m;
  std::uint64_t train_seed = 0;
};

namespace {

thread_local std::string g_last_error;

ssk_status status_from_kind(ssk::ErrorKind kind) {
  using K = ssk::ErrorKind;
  switch (kind) {
    case K::InvalidArgument: return SSK_ERR_INVALID_ARGUMENT;
    case K::ShapeMismatch: return SSK_ERR_SHAPE_MISMATCH;
    case K::Io: return SSK_ERR_IO;
    case K::MalformedHeader: return SSK_ERR_MALFORMED_HEADER;
    case K::TruncatedPayload: return SSK_ERR_TRUNCATED_PAYLOAD;
    case K::UnsupportedDtype: return SSK_ERR_UNSUPPORTED_DTYPE;
    case K::VersionMismatch: return SSK_ERR_VERSION_MISMATCH;
    case K::Corruption: return SSK_ERR_CORRUPTION;
    case K::State: return SSK_ERR_STATE;
  }
  return SSK_ERR_UNKNOWN;
}

template <typename Fn>
ssk_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SSK_OK;
  } catch (const ssk::Error& e) {
    g_last_error = e.what();
    return status_from_kind(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SSK_ERR_UNKNOWN;
  }
}

void require(bool ok, const char* message) {
  if (!ok) ssk::fail(ssk::ErrorKind::InvalidArgument, message);
}

void check_subject_skill(const ssk::Dataset& ds, int subject, int skill, bool allow_all_skills) {
  require(subject >= 0 && subject < ds.params.subjects, "subject index out of range");
  if (skill == -1) {
    require(allow_all_skills, "skill index is required here");
    return;
  }
  require(skill >= 0 && skill < ssk::kNumSkills, "skill index out of range");
}

ssk::ArchitectureConfig arch_from(const int channels[5], int dense_units, double dropout,
                                  int with_bias, int input_size) {
  ssk::ArchitectureConfig cfg;
  cfg.input_size = input_size;
  for (int i = 0; i < 5; ++i) cfg.channels[static_cast<std::size_t>(i)] = channels[i];
  cfg.dense_units = dense_units;
  cfg.dropout = static_cast<float>(dropout);
  cfg.with_bias = with_bias != 0;
  return cfg;
}

ssk::FoldMode fold_mode_from_int(int mode) {
  require(mode == 0 || mode == 1, "fold_mode must be 0 (rotating) or 1 (strided)");
  return mode == 0 ? ssk::FoldMode::Rotating : ssk::FoldMode::Strided;
}

// collect one subject's data for a head, excluding holdout_fold when >= 0
void collect_subject(const ssk::Dataset& ds, int subject, ssk::Head head, int skill,
                     int holdout_fold, int folds, ssk::FoldMode mode, ssk::TrainSet* train,
                     ssk::TrainSet* holdout) {
  const ssk::SubjectData& subj = ds.subjects[static_cast<std::size_t>(subject)];
  const int k_lo = head == ssk::Head::Skill ? 0 : skill;
  const int k_hi = head == ssk::Head::Skill ? ssk::kNumSkills : skill + 1;
  for (int k = k_lo; k < k_hi; ++k) {
    const auto& frames = subj.frames[static_cast<std::size_t>(k)];
    const auto& forces = subj.forces[static_cast<std::size_t>(k)];
    const int n = static_cast<int>(frames.size());
    std::vector<int> train_idx, test_idx;
    if (holdout_fold >= 0) {
      auto [tr, te] = ssk::fold_partition(n, holdout_fold, folds, mode);
      train_idx = std::move(tr);
      test_idx = std::move(te);
    } else {
      train_idx.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) train_idx[static_cast<std::size_t>(i)] = i;
    }
    auto append = [&](ssk::TrainSet* set, const std::vector<int>& idx) {
      if (!set) return;
      for (int i : idx) {
        set->images.push_back(&frames[static_cast<std::size_t>(i)]);
        set->skill_labels.push_back(k);
        set->force_targets.push_back(forces[static_cast<std::size_t>(i)]);
      }
    };
    append(train, train_idx);
    append(holdout, test_idx);
  }
}

}  // namespace

extern "C" {

const char* ssk_status_name(ssk_status status) {
  switch (status) {
    case SSK_OK: return "ok";
    case SSK_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case SSK_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case SSK_ERR_IO: return "io";
    case SSK_ERR_MALFORMED_HEADER: return "malformed_header";
    case SSK_ERR_TRUNCATED_PAYLOAD: return "truncated_payload";
    case SSK_ERR_UNSUPPORTED_DTYPE: return "unsupported_dtype";
    case SSK_ERR_VERSION_MISMATCH: return "version_mismatch";
    case SSK_ERR_CORRUPTION: return "corruption";
    case SSK_ERR_STATE: return "state";
    case SSK_ERR_UNKNOWN: return "unknown";
  }
  return "unknown";
}

const char* ssk_last_error(void) { return g_last_error.c_str(); }

const char* ssk_version_string(void) { return "sonoskill 1.0.0"; }

void ssk_synth_params_defaults(ssk_synth_params* params) {
  if (!params) return;
  ssk::SynthParams d;
  params->subjects = d.subjects;
  params->frames_per_skill = d.frames_per_skill;
  params->image_size = d.image_size;
  params->segment_len = d.segment_len;
  params->peak_min = d.peak_min;
  params->peak_max = d.peak_max;
  params->noise_level = d.noise_level;
  params->seed = d.seed;
}

ssk_status ssk_synth_generate(const ssk_synth_params* params, const char* out_dir) {
  return guarded([&] {
    require(params && out_dir, "null pointer");
    ssk::SynthParams p;
    p.subjects = params->subjects;
    p.frames_per_skill = params->frames_per_skill;
    p.image_size = params->image_size;
    p.segment_len = params->segment_len;
    p.peak_min = static_cast<float>(params->peak_min);
    p.peak_max = static_cast<float>(params->peak_max);
    p.noise_level = static_cast<float>(params->noise_level);
    p.seed = params->seed;
    ssk::write_dataset(out_dir, ssk::synth_generate(p));
  });
}

ssk_status ssk_dataset_open(const char* dir, ssk_dataset** out) {
  return guarded([&] {
    require(dir && out, "null pointer");
    auto handle = std::make_unique<ssk_dataset>();
    handle->ds = ssk::load_dataset(dir);
    *out = handle.release();
  });
}

void ssk_dataset_close(ssk_dataset* dataset) { delete dataset; }

ssk_status ssk_dataset_get_info(const ssk_dataset* dataset, ssk_dataset_info* out) {
  return guarded([&] {
    require(dataset && out, "null pointer");
    const ssk::SynthParams& p = dataset->ds.params;
    out->subjects = p.subjects;
    out->frames_per_skill = p.frames_per_skill;
    out->image_size = p.image_size;
    out->segment_len = p.segment_len;
    out->peak_min = p.peak_min;
    out->peak_max = p.peak_max;
    out->noise_level = p.noise_level;
    out->seed = p.seed;
  });
}

ssk_status ssk_model_load(const char* path, ssk_model** out) {
  return guarded([&] {
    require(path && out, "null pointer");
    auto handle = std::make_unique<ssk_model>();
    handle->m = ssk::load_checkpoint(path, &handle->train_seed);
    *out = handle.release();
  });
}

ssk_status ssk_model_save(const ssk_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "null pointer");
    ssk::save_checkpoint(path, model->m, model->train_seed);
  });
}

void ssk_model_free(ssk_model* model) { delete model; }

int ssk_model_head(const ssk_model* model) {
  return model && model->m.head == ssk::Head::Force ? SSK_HEAD_FORCE : SSK_HEAD_SKILL;
}

int ssk_model_input_size(const ssk_model* model) {
  return model ? model->m.config.input_size : 0;
}

ssk_status ssk_model_param_count(const ssk_model* model, int64_t* trainable,
                                 int64_t* non_trainable) {
  return guarded([&] {
    require(model != nullptr, "null pointer");
    const ssk::ParamCount pc = ssk::count_parameters(model->m.config, model->m.head);
    if (trainable) *trainable = pc.trainable;
    if (non_trainable) *non_trainable = pc.non_trainable;
  });
}

ssk_status ssk_model_predict(const ssk_model* model, const float* pixels, float* outputs,
                             int* predicted_class) {
  return guarded([&] {
    require(model && pixels, "null pointer");
    const int s = model->m.config.input_size;
    ssk::Tensor x({s, s, 1});
    std::memcpy(x.data.data(), pixels, x.data.size() * sizeof(float));
    if (model->m.head == ssk::Head::Skill) {
      std::array<float, 5> probs;
      const int cls = ssk::predict_skill(model->m, x, &probs);
      if (outputs) std::memcpy(outputs, probs.data(), 5 * sizeof(float));
      if (predicted_class) *predicted_class = cls;
    } else {
      const float f = ssk::predict_force(model->m, x);
      if (outputs) outputs[0] = f;
      if (predicted_class) *predicted_class = 0;
    }
  });
}

void ssk_train_params_defaults(ssk_train_params* params, int head) {
  if (!params) return;
  const ssk::TrainConfig tc = head == SSK_HEAD_FORCE ? ssk::TrainConfig::force_defaults()
                                                     : ssk::TrainConfig::skill_defaults();
  params->head = head == SSK_HEAD_FORCE ? SSK_HEAD_FORCE : SSK_HEAD_SKILL;
  params->subject = 0;
  params->skill = 0;
  const ssk::ArchitectureConfig d;
  for (int i = 0; i < 5; ++i) params->channels[i] = d.channels[static_cast<std::size_t>(i)];
  params->dense_units = d.dense_units;
  params->dropout = d.dropout;
  params->with_bias = d.with_bias ? 1 : 0;
  params->epochs = tc.epochs;
  params->learning_rate = tc.lr;
  params->batch_size = tc.batch_size;
  params->holdout_fold = -1;
  params->folds = 5;
  params->fold_mode = 0;
  params->seed = 0;
}

ssk_status ssk_train_single(const ssk_dataset* dataset, const ssk_train_params* params,
                            const char* checkpoint_path, double* metric) {
  return guarded([&] {
    require(dataset && params && checkpoint_path, "null pointer");
    const ssk::Head head = params->head == SSK_HEAD_FORCE ? ssk::Head::Force : ssk::Head::Skill;
    check_subject_skill(dataset->ds, params->subject, head == ssk::Head::Force ? params->skill : -1,
                        head == ssk::Head::Skill);
    const ssk::FoldMode mode = fold_mode_from_int(params->fold_mode);

    ssk::TrainSet train, holdout;
    collect_subject(dataset->ds, params->subject, head, params->skill, params->holdout_fold,
                    params->folds, mode, &train, params->holdout_fold >= 0 ? &holdout : nullptr);

    const ssk::ArchitectureConfig arch =
        arch_from(params->channels, params->dense_units, params->dropout, params->with_bias,
                  dataset->ds.params.image_size);
    ssk::Model m = ssk::build_model(arch, head, ssk::SeededRng::derive(params->seed, {0}));
    ssk::TrainConfig tc;
    tc.epochs = params->epochs;
    tc.lr = static_cast<float>(params->learning_rate);
    tc.batch_size = params->batch_size;
    tc.seed = ssk::SeededRng::derive(params->seed, {1});
    ssk::train_model(m, train, tc);

    double metric_value = std::numeric_limits<double>::quiet_NaN();
    if (params->holdout_fold >= 0) {
      if (head == ssk::Head::Skill)
        metric_value = ssk::evaluate_skill(m, holdout.images, holdout.skill_labels).accuracy;
      else
        metric_value = ssk::evaluate_force(m, holdout.images, holdout.force_targets).rmse;
    }
    ssk::save_checkpoint(checkpoint_path, m, params->seed);
    if (metric) *metric = metric_value;
  });
}

ssk_status ssk_evaluate(const ssk_model* model, const ssk_dataset* dataset, int subject, int skill,
                        double* metric) {
  return guarded([&] {
    require(model && dataset && metric, "null pointer");
    require(model->m.config.input_size == dataset->ds.params.image_size,
            "model input size does not match dataset");
    const ssk::Head head = model->m.head;
    check_subject_skill(dataset->ds, subject, skill, head == ssk::Head::Skill);
    if (head == ssk::Head::Force)
      require(skill >= 0, "force evaluation needs a specific skill");

    ssk::TrainSet all;
    if (skill < 0)
      collect_subject(dataset->ds, subject, ssk::Head::Skill, 0, -1, 5, ssk::FoldMode::Rotating,
                      &all, nullptr);
    else
      collect_subject(dataset->ds, subject, ssk::Head::Force, skill, -1, 5,
                      ssk::FoldMode::Rotating, &all, nullptr);
    if (head == ssk::Head::Skill)
      *metric = ssk::evaluate_skill(model->m, all.images, all.skill_labels).accuracy;
    else
      *metric = ssk::evaluate_force(model->m, all.images, all.force_targets).rmse;
  });
}

void ssk_cv_params_defaults(ssk_cv_params* params) {
  if (!params) return;
  const ssk::CvConfig d;
  for (int i = 0; i < 5; ++i) params->channels[i] = d.arch.channels[static_cast<std::size_t>(i)];
  params->dense_units = d.arch.dense_units;
  params->dropout = d.arch.dropout;
  params->with_bias = d.arch.with_bias ? 1 : 0;
  params->folds = d.folds;
  params->iterations = d.iterations;
  params->fold_mode = 0;
  params->run_skill = 1;
  params->run_force = 1;
  params->skill_epochs = d.skill_train.epochs;
  params->skill_learning_rate = d.skill_train.lr;
  params->skill_batch_size = d.skill_train.batch_size;
  params->force_epochs = d.force_train.epochs;
  params->force_learning_rate = d.force_train.lr;
  params->force_batch_size = d.force_train.batch_size;
  params->seed = 0;
}

ssk_status ssk_cross_validate(const ssk_dataset* dataset, const ssk_cv_params* params,
                              const char* out_dir, ssk_cv_progress_fn progress, void* user,
                              ssk_cv_summary* summary) {
  return guarded([&] {
    require(dataset && params && out_dir, "null pointer");
    ssk::CvConfig cfg;
    cfg.arch = arch_from(params->channels, params->dense_units, params->dropout, params->with_bias,
                         dataset->ds.params.image_size);
    cfg.folds = params->folds;
    cfg.iterations = params->iterations;
    cfg.fold_mode = fold_mode_from_int(params->fold_mode);
    cfg.run_skill = params->run_skill != 0;
    cfg.run_force = params->run_force != 0;
    cfg.skill_train.epochs = params->skill_epochs;
    cfg.skill_train.lr = static_cast<float>(params->skill_learning_rate);
    cfg.skill_train.batch_size = params->skill_batch_size;
    cfg.force_train.epochs = params->force_epochs;
    cfg.force_train.lr = static_cast<float>(params->force_learning_rate);
    cfg.force_train.batch_size = params->force_batch_size;
    cfg.seed = params->seed;

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) ssk::fail(ssk::ErrorKind::Io, "cannot create " + std::string(out_dir));

    ssk::CvProgress cb;
    if (progress)
      cb = [&](const ssk::LedgerRow& row) { progress(row.run_id.c_str(), row.metric, user); };
    ssk::CvResult res = ssk::run_cross_validation(dataset->ds, cfg, cb);

    const std::string dir(out_dir);
    res.ledger.write_csv(dir + "/ledger.csv");
    res.timing.write_csv(dir + "/timing.csv");

    std::ofstream sf(dir + "/summary.txt", std::ios::trunc | std::ios::binary);
    if (!sf) ssk::fail(ssk::ErrorKind::Io, "cannot write " + dir + "/summary.txt");
    char buf[256];
    std::snprintf(buf, sizeof(buf), "skill runs: %d\n", res.skill_runs);
    sf << buf;
    if (res.skill_runs > 0) {
      std::snprintf(buf, sizeof(buf), "skill accuracy: %.2f %%  (sd %.2f)\n",
                    res.skill_accuracy_mean, res.skill_accuracy_sd);
      sf << buf;
    }
    std::snprintf(buf, sizeof(buf), "force runs: %d\n", res.force_runs);
    sf << buf;
    if (res.force_runs > 0) {
      std::snprintf(buf, sizeof(buf), "force rmse: %.4f N  (sd %.4f, %.2f %% of range)\n",
                    res.force_rmse_mean, res.force_rmse_sd,
                    ssk::percent_of_force_range(res.force_rmse_mean));
      sf << buf;
    }

    if (summary) {
      summary->skill_runs = res.skill_runs;
      summary->force_runs = res.force_runs;
      summary->skill_accuracy_mean = res.skill_accuracy_mean;
      summary->skill_accuracy_sd = res.skill_accuracy_sd;
      summary->force_rmse_mean = res.force_rmse_mean;
      summary->force_rmse_sd = res.force_rmse_sd;
    }
  });
}

ssk_status ssk_gradcam_run(const ssk_model* model, const ssk_dataset* dataset, int subject,
                           int skill, int frame, int output_index, const float* layer_weights,
                           int saliency_rule, const char* out_prefix) {
  return guarded([&] {
    require(model && dataset && out_prefix, "null pointer");
    require(model->m.config.input_size == dataset->ds.params.image_size,
            "model input size does not match dataset");
    check_subject_skill(dataset->ds, subject, skill, false);
    const auto& frames =
        dataset->ds.subjects[static_cast<std::size_t>(subject)].frames[static_cast<std::size_t>(skill)];
    require(frame >= 0 && frame < static_cast<int>(frames.size()), "frame index out of range");
    const ssk::Tensor& x = frames[static_cast<std::size_t>(frame)];

    int idx = output_index;
    if (idx < 0) idx = model->m.head == ssk::Head::Skill ? ssk::predict_skill(model->m, x) : 0;

    std::array<float, 5> weights = ssk::default_layer_weights();
    if (layer_weights)
      for (int i = 0; i < 5; ++i) weights[static_cast<std::size_t>(i)] = layer_weights[i];

    const ssk::GradCamResult cam = ssk::weighted_gradcam(model->m, x, idx, weights);
    const std::string prefix(out_prefix);
    ssk::write_npy_file(prefix + "_heat.npy", cam.combined);
    ssk::export_overlay_ppm(prefix + "_overlay.ppm", x, cam.combined);

    if (saliency_rule != SSK_SALIENCY_NONE) {
      require(saliency_rule == SSK_SALIENCY_GUIDED || saliency_rule == SSK_SALIENCY_GUIDED_PRODUCT,
              "unknown saliency rule");
      const ssk::ReluBackwardRule rule = saliency_rule == SSK_SALIENCY_GUIDED
                                             ? ssk::ReluBackwardRule::Guided
                                             : ssk::ReluBackwardRule::GuidedProduct;
      ssk::Tensor sal = ssk::guided_backprop(model->m, x, idx, rule);
      ssk::Tensor heat({sal.dim(0), sal.dim(1)});
      float mx = 0.0f;
      for (std::size_t i = 0; i < heat.data.size(); ++i) {
        heat.data[i] = std::abs(sal.data[i]);
        mx = std::max(mx, heat.data[i]);
      }
      if (mx > 0.0f)
        for (auto& v : heat.data) v /= mx;
      ssk::write_npy_file(prefix + "_saliency.npy", heat);
      ssk::export_overlay_ppm(prefix + "_saliency.ppm", x, heat);
    }
  });
}

ssk_status ssk_stream_run(const ssk_model* skill_model, const ssk_model* const force_models[5],
                          const ssk_dataset* dataset, int subject, int skill, double rate_hz,
                          int max_frames, const char* csv_path, ssk_stream_stats* stats) {
  return guarded([&] {
    require(skill_model && force_models && dataset, "null pointer");
    check_subject_skill(dataset->ds, subject, skill, false);
    require(skill_model->m.config.input_size == dataset->ds.params.image_size,
            "model input size does not match dataset");

    std::array<const ssk::Model*, 5> routed{};
    for (int k = 0; k < 5; ++k) {
      require(force_models[k] != nullptr, "all five force slots must be filled");
      routed[static_cast<std::size_t>(k)] = &force_models[k]->m;
    }

    const auto& subj = dataset->ds.subjects[static_cast<std::size_t>(subject)];
    const auto& frames = subj.frames[static_cast<std::size_t>(skill)];
    const auto& forces = subj.forces[static_cast<std::size_t>(skill)];
    ssk::StreamSource src;
    src.images.reserve(frames.size());
    for (const auto& fr : frames) src.images.push_back(&fr);
    src.skill_truth.assign(frames.size(), skill);
    src.force_truth.assign(forces.begin(), forces.end());

    ssk::StreamConfig cfg;
    cfg.rate_hz = rate_hz > 0.0 ? rate_hz : 6.3;
    cfg.max_frames = max_frames;
    const ssk::StreamReport report = ssk::run_stream(skill_model->m, routed, src, cfg);
    if (csv_path) report.write_csv(csv_path);

    if (stats) {
      stats->emitted = report.emitted;
      stats->processed = report.processed;
      stats->displaced = report.displaced;
      stats->deadline_misses = report.deadline_misses;
      stats->period_ms = report.period_ms;
      stats->mean_skill_ms = report.mean_skill_ms;
      stats->max_skill_ms = report.max_skill_ms;
      stats->mean_force_ms = report.mean_force_ms;
      stats->max_force_ms = report.max_force_ms;
      stats->duration_s = report.duration_s;
    }
  });
}

}  // extern "C"
