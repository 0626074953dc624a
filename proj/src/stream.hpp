// Streaming replay: a producer thread emits frames at a fixed rate into a
// depth-1 slot; a consumer runs the skill model and routes the frame to a
// force model chosen by the predicted class. Frames displaced before the
// consumer could take them are reported, never silently lost.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "model.hpp"

namespace ssk {

struct StreamConfig {
  double rate_hz = 6.3;
  int max_frames = 0;  // 0 = replay the whole source
};

struct StreamSource {
  std::vector<const Tensor*> images;
  std::vector<int> skill_truth;     // optional, may be empty
  std::vector<float> force_truth;   // optional, may be empty
};

struct FrameRecord {
  int index = 0;
  bool processed = false;  // false = displaced by a newer frame before pickup
  double emit_s = 0.0, start_s = 0.0, done_s = 0.0;
  int skill_pred = -1;
  float force_pred = 0.0f;
  double skill_ms = 0.0, force_ms = 0.0;
  bool deadline_met = false;  // finished within one period of emission
  int skill_truth = -1;
  float force_truth = 0.0f;
};

struct StreamReport {
  std::vector<FrameRecord> frames;
  double period_ms = 0.0;
  int emitted = 0, processed = 0, displaced = 0, deadline_misses = 0;
  double mean_skill_ms = 0.0, max_skill_ms = 0.0;
  double mean_force_ms = 0.0, max_force_ms = 0.0;
  double duration_s = 0.0;

  void write_csv(const std::string& path) const;
  std::string summary() const;
};

// force_models[k] handles frames classified as skill k; entries may repeat
// (e.g. a single shared force model) but must all be non-null force-head
// models matching the skill model's input size.
StreamReport run_stream(const Model& skill_model, const std::array<const Model*, 5>& force_models,
                        const StreamSource& source, const StreamConfig& cfg);

}  // namespace ssk
