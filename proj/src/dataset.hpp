// Synthetic forearm-phantom dataset: per (subject, skill) a stream of frames
// whose blob pattern encodes the skill and whose blob intensity follows a
// trapezoidal fingertip-force profile, labelled by simulated force sensors.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace ssk {

inline constexpr int kNumSkills = 5;

// audio cue played to subjects during a recording segment
struct CueTone {
  float offset_s;      // seconds into the segment
  int frequency_hz;
  int duration_ms;
};

struct CueSchedule {
  std::vector<CueTone> tones;
  static CueSchedule standard();  // 20/40/60/80 s at 500/750/600/550 Hz, 250 ms
};

// Trapezoidal force profile over a segment of `segment_len` frames:
// rest, ramp up, hold at the segment's peak, ramp down, rest (equal fifths).
float force_profile(float peak, int pos, int segment_len);

// Ground-truth label: mean of three simulated sensor readings, each the true
// force plus U(-0.05, 0.05) noise, clipped to [0, 4] N.
float sensor_label(float true_force, SeededRng& rng);

// base blob anchor positions for each skill, in normalized [0,1] coordinates
std::vector<std::pair<float, float>> skill_anchors(int skill);

struct SynthParams {
  int subjects = 2;
  int frames_per_skill = 2000;
  int image_size = 64;
  int segment_len = 100;       // frames per effort segment
  float peak_min = 1.0f;       // N
  float peak_max = 4.0f;       // N
  float noise_level = 0.08f;   // speckle amplitude
  std::uint64_t seed = 0;

  void validate() const;
};

struct SubjectData {
  // frames[k][i] is an [S,S,1] image; forces[k][i] its labelled force in N
  std::array<std::vector<Tensor>, kNumSkills> frames;
  std::array<std::vector<float>, kNumSkills> forces;
};

struct Dataset {
  SynthParams params;
  std::vector<SubjectData> subjects;
  // jittered anchor positions actually rendered, per subject per skill
  std::vector<std::array<std::vector<std::pair<float, float>>, kNumSkills>> anchors;
};

Dataset synth_generate(const SynthParams& p);

// Layout: <root>/manifest.json plus <root>/sNN/skillK/{frames.npy,forces.npy}.
// frames.npy is [F,S,S] float32 in [0,1] (grayscale, 8-bit quantized).
void write_dataset(const std::string& root, const Dataset& ds);
Dataset load_dataset(const std::string& root);

}  // namespace ssk
