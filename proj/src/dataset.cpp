#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "errors.hpp"
#include "npy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ssk {

CueSchedule CueSchedule::standard() {
  return {{{20.0f, 500, 250}, {40.0f, 750, 250}, {60.0f, 600, 250}, {80.0f, 550, 250}}};
}

float force_profile(float peak, int pos, int segment_len) {
  if (segment_len < 5 || segment_len % 5 != 0)
    fail(ErrorKind::InvalidArgument, "segment length must be a positive multiple of 5");
  if (pos < 0 || pos >= segment_len)
    fail(ErrorKind::InvalidArgument, "segment position out of range");
  const int q = segment_len / 5;
  if (pos < q) return 0.0f;
  if (pos < 2 * q) return peak * static_cast<float>(pos - q) / static_cast<float>(q);
  if (pos < 3 * q) return peak;
  if (pos < 4 * q) return peak * static_cast<float>(4 * q - pos) / static_cast<float>(q);
  return 0.0f;
}

float sensor_label(float true_force, SeededRng& rng) {
  double sum = 0.0;
  for (int s = 0; s < 3; ++s) {
    const float reading = true_force + rng.uniform_range(-0.05f, 0.05f);
    sum += std::clamp(reading, 0.0f, 4.0f);
  }
  return static_cast<float>(sum / 3.0);
}

std::vector<std::pair<float, float>> skill_anchors(int skill) {
  switch (skill) {
    case 0: return {{0.25f, 0.25f}, {0.75f, 0.75f}};
    case 1: return {{0.25f, 0.75f}, {0.75f, 0.25f}};
    case 2: return {{0.50f, 0.25f}, {0.50f, 0.75f}};
    case 3: return {{0.25f, 0.50f}, {0.75f, 0.50f}};
    case 4: return {{0.50f, 0.50f}};
    default: fail(ErrorKind::InvalidArgument, "skill index out of range: " + std::to_string(skill));
  }
}

void SynthParams::validate() const {
  if (subjects < 1) fail(ErrorKind::InvalidArgument, "subjects must be positive");
  if (frames_per_skill < 1) fail(ErrorKind::InvalidArgument, "frames_per_skill must be positive");
  if (image_size < 32) fail(ErrorKind::InvalidArgument, "image_size must be at least 32");
  if (segment_len < 5 || segment_len % 5 != 0)
    fail(ErrorKind::InvalidArgument, "segment_len must be a positive multiple of 5");
  if (!(peak_min > 0.0f) || peak_max < peak_min || peak_max > 4.0f)
    fail(ErrorKind::InvalidArgument, "force peaks must satisfy 0 < min <= max <= 4");
  if (!(noise_level >= 0.0f && noise_level < 0.5f))
    fail(ErrorKind::InvalidArgument, "noise_level must be in [0, 0.5)");
}

namespace {

constexpr float kBackground = 0.12f;
constexpr float kBlobBase = 0.25f;
constexpr float kBlobGain = 0.55f;
constexpr float kSigmaFrac = 0.055f;
constexpr float kAnchorJitter = 0.02f;

// combined unit-amplitude blob response for a set of anchors
std::vector<float> blob_map(const std::vector<std::pair<float, float>>& anchors, int size) {
  std::vector<float> map(static_cast<std::size_t>(size) * size, 0.0f);
  const float sigma = kSigmaFrac * static_cast<float>(size);
  const float inv2s2 = 1.0f / (2.0f * sigma * sigma);
  for (const auto& [ax, ay] : anchors) {
    const float cx = ax * static_cast<float>(size);
    const float cy = ay * static_cast<float>(size);
    for (int i = 0; i < size; ++i) {
      const float dy = static_cast<float>(i) + 0.5f - cy;
      for (int j = 0; j < size; ++j) {
        const float dx = static_cast<float>(j) + 0.5f - cx;
        map[static_cast<std::size_t>(i) * size + j] += std::exp(-(dx * dx + dy * dy) * inv2s2);
      }
    }
  }
  return map;
}

// 3x3 box smoothing with edge clamping (average over in-bounds neighbors)
void box_smooth(const std::vector<float>& in, std::vector<float>& out, int size) {
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      float sum = 0.0f;
      int count = 0;
      for (int di = -1; di <= 1; ++di) {
        const int ii = i + di;
        if (ii < 0 || ii >= size) continue;
        for (int dj = -1; dj <= 1; ++dj) {
          const int jj = j + dj;
          if (jj < 0 || jj >= size) continue;
          sum += in[static_cast<std::size_t>(ii) * size + jj];
          ++count;
        }
      }
      out[static_cast<std::size_t>(i) * size + j] = sum / static_cast<float>(count);
    }
  }
}

}  // namespace

Dataset synth_generate(const SynthParams& p) {
  p.validate();
  Dataset ds;
  ds.params = p;
  ds.subjects.resize(p.subjects);
  ds.anchors.resize(p.subjects);

  const int size = p.image_size;
  const std::size_t npix = static_cast<std::size_t>(size) * size;
  std::vector<float> raw(npix), speckle(npix);

  for (int u = 0; u < p.subjects; ++u) {
    for (int k = 0; k < kNumSkills; ++k) {
      SeededRng rng(SeededRng::derive(p.seed, {0xDA7A, static_cast<std::uint64_t>(u),
                                               static_cast<std::uint64_t>(k)}));
      auto anchors = skill_anchors(k);
      for (auto& [ax, ay] : anchors) {
        ax += rng.uniform_range(-kAnchorJitter, kAnchorJitter);
        ay += rng.uniform_range(-kAnchorJitter, kAnchorJitter);
      }
      ds.anchors[u][k] = anchors;
      const std::vector<float> blobs = blob_map(anchors, size);

      auto& frames = ds.subjects[u].frames[k];
      auto& forces = ds.subjects[u].forces[k];
      frames.reserve(p.frames_per_skill);
      forces.reserve(p.frames_per_skill);

      float peak = 0.0f;
      for (int i = 0; i < p.frames_per_skill; ++i) {
        const int pos = i % p.segment_len;
        if (pos == 0) peak = rng.uniform_range(p.peak_min, p.peak_max);
        const float f = force_profile(peak, pos, p.segment_len);
        const float amplitude = kBlobBase + kBlobGain * (f / 4.0f);

        for (std::size_t px = 0; px < npix; ++px) raw[px] = static_cast<float>(rng.uniform());
        box_smooth(raw, speckle, size);

        Tensor img({size, size, 1});
        for (std::size_t px = 0; px < npix; ++px) {
          const float v = kBackground + 2.0f * p.noise_level * (speckle[px] - 0.5f) +
                          amplitude * blobs[px];
          const long q = std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f);
          img.data[px] = static_cast<float>(q) / 255.0f;
        }
        frames.push_back(std::move(img));
        forces.push_back(sensor_label(f, rng));
      }
    }
  }
  return ds;
}

namespace {

std::string subject_dir(int u) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%02d", u);
  return buf;
}

json params_to_json(const SynthParams& p) {
  return json{{"subjects", p.subjects},
              {"frames_per_skill", p.frames_per_skill},
              {"image_size", p.image_size},
              {"segment_len", p.segment_len},
              {"peak_min", p.peak_min},
              {"peak_max", p.peak_max},
              {"noise_level", p.noise_level},
              {"seed", p.seed}};
}

SynthParams params_from_json(const json& j) {
  SynthParams p;
  p.subjects = j.at("subjects").get<int>();
  p.frames_per_skill = j.at("frames_per_skill").get<int>();
  p.image_size = j.at("image_size").get<int>();
  p.segment_len = j.at("segment_len").get<int>();
  p.peak_min = j.at("peak_min").get<float>();
  p.peak_max = j.at("peak_max").get<float>();
  p.noise_level = j.at("noise_level").get<float>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

}  // namespace

void write_dataset(const std::string& root, const Dataset& ds) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) fail(ErrorKind::Io, "cannot create dataset directory " + root + ": " + ec.message());

  json manifest;
  manifest["format"] = 1;
  manifest["normalization"] = "u8/255";
  manifest["params"] = params_to_json(ds.params);
  json anchors = json::array();
  for (const auto& subj : ds.anchors) {
    json per_subject = json::array();
    for (const auto& skill : subj) {
      json pts = json::array();
      for (const auto& [x, y] : skill) pts.push_back(json::array({x, y}));
      per_subject.push_back(pts);
    }
    anchors.push_back(per_subject);
  }
  manifest["anchors"] = anchors;

  {
    std::ofstream f(root + "/manifest.json", std::ios::trunc);
    if (!f) fail(ErrorKind::Io, "cannot write " + root + "/manifest.json");
    f << manifest.dump(2) << "\n";
  }

  const int size = ds.params.image_size;
  for (int u = 0; u < ds.params.subjects; ++u) {
    for (int k = 0; k < kNumSkills; ++k) {
      const fs::path dir = fs::path(root) / subject_dir(u) / ("skill" + std::to_string(k));
      fs::create_directories(dir, ec);
      if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

      const auto& frames = ds.subjects[u].frames[k];
      const int n = static_cast<int>(frames.size());
      Tensor stack({n, size, size});
      const std::size_t per = static_cast<std::size_t>(size) * size;
      for (int i = 0; i < n; ++i)
        std::copy(frames[i].data.begin(), frames[i].data.end(), stack.data.begin() + i * per);
      write_npy_file((dir / "frames.npy").string(), stack);

      Tensor forces({n});
      std::copy(ds.subjects[u].forces[k].begin(), ds.subjects[u].forces[k].end(),
                forces.data.begin());
      write_npy_file((dir / "forces.npy").string(), forces);
    }
  }
}

Dataset load_dataset(const std::string& root) {
  std::ifstream f(root + "/manifest.json");
  if (!f) fail(ErrorKind::Io, "cannot open " + root + "/manifest.json");
  json manifest;
  try {
    f >> manifest;
  } catch (const json::exception& e) {
    fail(ErrorKind::MalformedHeader, std::string("bad manifest.json: ") + e.what());
  }
  if (manifest.value("format", 0) != 1)
    fail(ErrorKind::VersionMismatch, "unsupported dataset format " +
                                         std::to_string(manifest.value("format", 0)));

  Dataset ds;
  try {
    ds.params = params_from_json(manifest.at("params"));
    for (const auto& subj : manifest.at("anchors")) {
      std::array<std::vector<std::pair<float, float>>, kNumSkills> per_subject;
      int k = 0;
      for (const auto& skill : subj) {
        for (const auto& pt : skill)
          per_subject[k].emplace_back(pt.at(0).get<float>(), pt.at(1).get<float>());
        ++k;
      }
      ds.anchors.push_back(std::move(per_subject));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::MalformedHeader, std::string("bad manifest.json: ") + e.what());
  }

  const int size = ds.params.image_size;
  ds.subjects.resize(ds.params.subjects);
  for (int u = 0; u < ds.params.subjects; ++u) {
    for (int k = 0; k < kNumSkills; ++k) {
      const fs::path dir = fs::path(root) / subject_dir(u) / ("skill" + std::to_string(k));
      Tensor stack = read_npy_file((dir / "frames.npy").string());
      if (stack.rank() != 3 || stack.dim(1) != size || stack.dim(2) != size)
        fail(ErrorKind::Corruption, "frames array in " + dir.string() +
                                        " has unexpected shape " + shape_str(stack.shape));
      Tensor forces = read_npy_file((dir / "forces.npy").string());
      if (forces.rank() != 1 || forces.dim(0) != stack.dim(0))
        fail(ErrorKind::Corruption, "forces array in " + dir.string() +
                                        " does not match frame count");

      const int n = stack.dim(0);
      const std::size_t per = static_cast<std::size_t>(size) * size;
      auto& frames = ds.subjects[u].frames[k];
      frames.reserve(n);
      for (int i = 0; i < n; ++i) {
        Tensor img({size, size, 1});
        std::copy(stack.data.begin() + i * per, stack.data.begin() + (i + 1) * per,
                  img.data.begin());
        frames.push_back(std::move(img));
      }
      ds.subjects[u].forces[k].assign(forces.data.begin(), forces.data.end());
    }
  }
  return ds;
}

}  // namespace ssk
