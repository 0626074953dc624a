#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "npy.hpp"
#include "rng.hpp"

using namespace ssk;
namespace fs = std::filesystem;

namespace {

Tensor rnd(const std::vector<int>& shape, SeededRng& g, float lo = -1.f, float hi = 1.f) {
  Tensor t(shape);
  for (auto& v : t.data) v = g.uniform_range(lo, hi);
  return t;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an ssk::Error");
  return ErrorKind::InvalidArgument;
}

fs::path scratch_dir() {
  fs::path d = fs::temp_directory_path() / "ssk_data_io_test";
  fs::create_directories(d);
  return d;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), (std::streamsize)bytes.size());
  REQUIRE(f.good());
}

// hand-built NPY bytes so the reader's rejections are exercised independently
// of the writer
std::string make_npy(std::string dict, const std::vector<float>& payload, char vmaj = 1,
                     char vmin = 0, bool align = true) {
  if (align) {
    const std::size_t total = 10 + dict.size() + 1;
    dict.append((64 - total % 64) % 64, ' ');
  }
  dict.push_back('\n');
  std::string out;
  const char magic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
  out.append(magic, 6);
  out.push_back(vmaj);
  out.push_back(vmin);
  out.push_back((char)(dict.size() & 0xFF));
  out.push_back((char)((dict.size() >> 8) & 0xFF));
  out += dict;
  out.append(reinterpret_cast<const char*>(payload.data()), payload.size() * sizeof(float));
  return out;
}

Tensor parse_npy(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_npy(in);
}

}  // namespace

TEST_CASE("npy round-trips every rank bitwise") {
  SeededRng gen(3);
  for (const auto& shape :
       {std::vector<int>{7}, {3, 4}, {2, 5, 3}, {2, 3, 2, 4}, {1}, {4, 1, 1}}) {
    Tensor t = rnd(shape, gen, -100.f, 100.f);
    t.data[0] = 0.f;  // include exact zero and denormal-ish values
    if (t.data.size() > 1) t.data[1] = 1e-38f;
    std::ostringstream out(std::ios::binary);
    write_npy(out, t);
    const std::string bytes = out.str();
    // magic, version, 64-byte header alignment
    REQUIRE(bytes.size() > 10);
    CHECK(std::memcmp(bytes.data(), "\x93NUMPY", 6) == 0);
    CHECK(bytes[6] == 1);
    CHECK(bytes[7] == 0);
    const std::size_t hlen = (unsigned char)bytes[8] | ((unsigned char)bytes[9] << 8);
    CHECK((10 + hlen) % 64 == 0);
    const std::string header = bytes.substr(10, hlen);
    CHECK(header.find("'descr': '<f4'") != std::string::npos);
    CHECK(header.find("'fortran_order': False") != std::string::npos);
    CHECK(bytes.size() == 10 + hlen + t.data.size() * sizeof(float));

    Tensor back = parse_npy(bytes);
    CHECK(back.shape == t.shape);
    CHECK(back.data == t.data);
  }
}

TEST_CASE("npy one-dimensional shape uses the single-element tuple form") {
  Tensor t({5});
  for (int i = 0; i < 5; ++i) t.data[i] = (float)i;
  std::ostringstream out(std::ios::binary);
  write_npy(out, t);
  CHECK(out.str().find("'shape': (5,)") != std::string::npos);
}

TEST_CASE("npy arrays embed back to back in one stream") {
  SeededRng gen(8);
  Tensor a = rnd({3, 3}, gen), b = rnd({2, 4, 2}, gen);
  std::ostringstream out(std::ios::binary);
  write_npy(out, a);
  write_npy(out, b);
  std::istringstream in(out.str());
  Tensor ra = read_npy(in);
  Tensor rb = read_npy(in);
  CHECK(ra.data == a.data);
  CHECK(rb.data == b.data);
  CHECK(rb.shape == b.shape);
  CHECK(in.peek() == std::istringstream::traits_type::eof());
}

TEST_CASE("npy reader rejects damaged input") {
  const std::vector<float> four = {1.f, 2.f, 3.f, 4.f};
  const std::string good_dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (4,), }";
  const std::string good = make_npy(good_dict, four);
  CHECK(parse_npy(good).data == four);

  // bad magic
  std::string bad = good;
  bad[0] = 'X';
  CHECK(kind_of([&] { parse_npy(bad); }) == ErrorKind::MalformedHeader);

  // unsupported version 2.0
  CHECK(kind_of([&] { parse_npy(make_npy(good_dict, four, 2, 0)); }) ==
        ErrorKind::MalformedHeader);

  // double precision and fortran order are unsupported, not malformed
  CHECK(kind_of([&] {
          parse_npy(make_npy("{'descr': '<f8', 'fortran_order': False, 'shape': (4,), }", four));
        }) == ErrorKind::UnsupportedDtype);
  CHECK(kind_of([&] {
          parse_npy(make_npy("{'descr': '<f4', 'fortran_order': True, 'shape': (4,), }", four));
        }) == ErrorKind::UnsupportedDtype);

  // truncated payload
  std::string chopped = good;
  chopped.resize(chopped.size() - 6);
  CHECK(kind_of([&] { parse_npy(chopped); }) == ErrorKind::TruncatedPayload);

  // garbage dictionary
  CHECK(kind_of([&] { parse_npy(make_npy("{'nonsense': 12 }", four)); }) ==
        ErrorKind::MalformedHeader);
  CHECK(kind_of([&] {
          parse_npy(make_npy("{'descr': '<f4', 'fortran_order': maybe, 'shape': (4,), }", four));
        }) == ErrorKind::MalformedHeader);
  CHECK(kind_of([&] {
          parse_npy(make_npy("{'descr': '<f4', 'fortran_order': False, 'shape': (x,), }", four));
        }) == ErrorKind::MalformedHeader);

  // header not padded to the 64-byte rule
  CHECK(kind_of([&] { parse_npy(make_npy(good_dict, four, 1, 0, false)); }) ==
        ErrorKind::MalformedHeader);

  // empty stream
  CHECK(kind_of([&] { parse_npy(""); }) == ErrorKind::MalformedHeader);

  CHECK(kind_of([&] { read_npy_file((scratch_dir() / "absent.npy").string()); }) == ErrorKind::Io);
}

TEST_CASE("npy zero-dimensional array reads as a single value") {
  const std::string bytes =
      make_npy("{'descr': '<f4', 'fortran_order': False, 'shape': (), }", {3.5f});
  Tensor t = parse_npy(bytes);
  CHECK(t.shape == std::vector<int>{1});
  CHECK(t.data[0] == 3.5f);
}

TEST_CASE("standard cue schedule") {
  CueSchedule s = CueSchedule::standard();
  REQUIRE(s.tones.size() == 4);
  const float offsets[4] = {20.f, 40.f, 60.f, 80.f};
  const int freqs[4] = {500, 750, 600, 550};
  for (int i = 0; i < 4; ++i) {
    CHECK(s.tones[i].offset_s == offsets[i]);
    CHECK(s.tones[i].frequency_hz == freqs[i]);
    CHECK(s.tones[i].duration_ms == 250);
  }
}

TEST_CASE("trapezoidal force profile hits its pinned values") {
  const float peak = 3.2f;
  // segment of 100: fifths at 20/40/60/80
  CHECK(force_profile(peak, 0, 100) == 0.f);
  CHECK(force_profile(peak, 19, 100) == 0.f);
  CHECK(force_profile(peak, 20, 100) == 0.f);  // ramp starts from zero
  CHECK(force_profile(peak, 30, 100) == doctest::Approx(peak / 2).epsilon(1e-6));
  CHECK(force_profile(peak, 39, 100) == doctest::Approx(peak * 19 / 20).epsilon(1e-6));
  CHECK(force_profile(peak, 40, 100) == peak);
  CHECK(force_profile(peak, 59, 100) == peak);
  CHECK(force_profile(peak, 60, 100) == peak);  // ramp down leaves the plateau
  CHECK(force_profile(peak, 70, 100) == doctest::Approx(peak / 2).epsilon(1e-6));
  CHECK(force_profile(peak, 79, 100) == doctest::Approx(peak / 20).epsilon(1e-6));
  CHECK(force_profile(peak, 80, 100) == 0.f);
  CHECK(force_profile(peak, 99, 100) == 0.f);

  // ramps mirror each other
  for (int i = 0; i <= 20; ++i)
    CHECK(force_profile(peak, 20 + i, 100) ==
          doctest::Approx(force_profile(peak, 80 - i, 100)).epsilon(1e-6));

  // a short segment keeps the same fifths
  CHECK(force_profile(2.f, 4, 25) == 0.f);
  CHECK(force_profile(2.f, 5, 25) == 0.f);
  CHECK(force_profile(2.f, 8, 25) == doctest::Approx(2.f * 3 / 5).epsilon(1e-6));
  CHECK(force_profile(2.f, 12, 25) == 2.f);
  CHECK(force_profile(2.f, 17, 25) == doctest::Approx(2.f * 3 / 5).epsilon(1e-6));
  CHECK(force_profile(2.f, 20, 25) == 0.f);

  CHECK_THROWS_AS(force_profile(1.f, 0, 0), Error);
  CHECK_THROWS_AS(force_profile(1.f, 0, 7), Error);
  CHECK_THROWS_AS(force_profile(1.f, -1, 100), Error);
  CHECK_THROWS_AS(force_profile(1.f, 100, 100), Error);
}

TEST_CASE("sensor labels stay within the sensor noise band") {
  SeededRng rng(77);
  for (float f : {0.f, 0.4f, 1.7f, 3.95f, 4.f}) {
    for (int rep = 0; rep < 50; ++rep) {
      const float label = sensor_label(f, rng);
      CHECK(label >= 0.f);
      CHECK(label <= 4.f);
      CHECK(std::abs(label - f) <= 0.05f + 1e-6f);
    }
  }
  // same stream, same labels
  SeededRng a(5), b(5);
  for (int rep = 0; rep < 10; ++rep) CHECK(sensor_label(2.f, a) == sensor_label(2.f, b));
}

TEST_CASE("skill anchor table") {
  using P = std::pair<float, float>;
  CHECK(skill_anchors(0) == std::vector<P>{{0.25f, 0.25f}, {0.75f, 0.75f}});
  CHECK(skill_anchors(1) == std::vector<P>{{0.25f, 0.75f}, {0.75f, 0.25f}});
  CHECK(skill_anchors(2) == std::vector<P>{{0.50f, 0.25f}, {0.50f, 0.75f}});
  CHECK(skill_anchors(3) == std::vector<P>{{0.25f, 0.50f}, {0.75f, 0.50f}});
  CHECK(skill_anchors(4) == std::vector<P>{{0.50f, 0.50f}});
  CHECK_THROWS_AS(skill_anchors(5), Error);
  CHECK_THROWS_AS(skill_anchors(-1), Error);
}

TEST_CASE("synthetic generation is deterministic and quantized") {
  SynthParams p;
  p.subjects = 1;
  p.frames_per_skill = 60;
  p.image_size = 32;
  p.segment_len = 20;
  p.seed = 11;

  Dataset a = synth_generate(p);
  Dataset b = synth_generate(p);
  REQUIRE(a.subjects.size() == 1);
  REQUIRE(a.anchors.size() == 1);
  for (int k = 0; k < kNumSkills; ++k) {
    REQUIRE(a.subjects[0].frames[k].size() == 60);
    REQUIRE(a.subjects[0].forces[k].size() == 60);
    CHECK(a.subjects[0].forces[k] == b.subjects[0].forces[k]);
    CHECK(a.anchors[0][k] == b.anchors[0][k]);
    for (int i = 0; i < 60; ++i)
      CHECK(a.subjects[0].frames[k][i].data == b.subjects[0].frames[k][i].data);

    // anchors are the base table plus bounded jitter
    const auto base = skill_anchors(k);
    REQUIRE(a.anchors[0][k].size() == base.size());
    for (std::size_t j = 0; j < base.size(); ++j) {
      CHECK(std::abs(a.anchors[0][k][j].first - base[j].first) <= 0.02f + 1e-6f);
      CHECK(std::abs(a.anchors[0][k][j].second - base[j].second) <= 0.02f + 1e-6f);
    }

    // pixels are 8-bit quantized values scaled back to [0,1]
    for (float v : a.subjects[0].frames[k][0].data) {
      CHECK(v >= 0.f);
      CHECK(v <= 1.f);
      const float steps = v * 255.f;
      CHECK(std::abs(steps - std::round(steps)) < 1e-3f);
    }

    // rest frames carry only sensor noise
    for (int i = 0; i < 60; ++i) {
      const int pos = i % 20;
      if (pos < 4 || pos >= 16) CHECK(a.subjects[0].forces[k][i] <= 0.05f + 1e-6f);
    }
  }

  SynthParams other = p;
  other.seed = 12;
  Dataset c = synth_generate(other);
  CHECK(c.subjects[0].frames[0][0].data != a.subjects[0].frames[0][0].data);
}

TEST_CASE("skills separate under a nearest-centroid probe") {
  SynthParams p;
  p.subjects = 1;
  p.frames_per_skill = 100;
  p.image_size = 32;
  p.segment_len = 20;
  p.seed = 2;
  Dataset ds = synth_generate(p);

  const std::size_t npix = 32 * 32;
  std::array<std::vector<double>, kNumSkills> centroid;
  for (int k = 0; k < kNumSkills; ++k) {
    centroid[k].assign(npix, 0.0);
    for (const Tensor& f : ds.subjects[0].frames[k])
      for (std::size_t i = 0; i < npix; ++i) centroid[k][i] += f.data[i];
    for (auto& v : centroid[k]) v /= p.frames_per_skill;
  }
  int hits = 0, total = 0;
  for (int k = 0; k < kNumSkills; ++k)
    for (const Tensor& f : ds.subjects[0].frames[k]) {
      int best = -1;
      double best_d = 0;
      for (int c = 0; c < kNumSkills; ++c) {
        double d = 0;
        for (std::size_t i = 0; i < npix; ++i) {
          const double e = f.data[i] - centroid[c][i];
          d += e * e;
        }
        if (best < 0 || d < best_d) {
          best = c;
          best_d = d;
        }
      }
      hits += best == k;
      ++total;
    }
  CHECK(total == kNumSkills * p.frames_per_skill);
  CHECK((double)hits / total > 0.9);
}

TEST_CASE("synthetic parameter validation") {
  auto bad = [](auto mutate) {
    SynthParams p;
    mutate(p);
    return kind_of([&] { synth_generate(p); }) == ErrorKind::InvalidArgument;
  };
  CHECK(bad([](SynthParams& p) { p.subjects = 0; }));
  CHECK(bad([](SynthParams& p) { p.frames_per_skill = 0; }));
  CHECK(bad([](SynthParams& p) { p.image_size = 31; }));
  CHECK(bad([](SynthParams& p) { p.segment_len = 7; }));
  CHECK(bad([](SynthParams& p) { p.segment_len = 0; }));
  CHECK(bad([](SynthParams& p) { p.peak_min = 0.f; }));
  CHECK(bad([](SynthParams& p) { p.peak_max = 5.f; }));
  CHECK(bad([](SynthParams& p) { p.peak_min = 3.f; p.peak_max = 2.f; }));
  CHECK(bad([](SynthParams& p) { p.noise_level = 0.5f; }));
}

TEST_CASE("dataset write and load round-trip") {
  SynthParams p;
  p.subjects = 2;
  p.frames_per_skill = 20;
  p.image_size = 32;
  p.segment_len = 20;
  p.seed = 4;
  Dataset ds = synth_generate(p);

  const fs::path root = scratch_dir() / "roundtrip";
  fs::remove_all(root);
  write_dataset(root.string(), ds);
  CHECK(fs::exists(root / "manifest.json"));
  CHECK(fs::exists(root / "s00" / "skill0" / "frames.npy"));
  CHECK(fs::exists(root / "s01" / "skill4" / "forces.npy"));

  Dataset back = load_dataset(root.string());
  CHECK(back.params.subjects == p.subjects);
  CHECK(back.params.frames_per_skill == p.frames_per_skill);
  CHECK(back.params.image_size == p.image_size);
  CHECK(back.params.segment_len == p.segment_len);
  CHECK(back.params.seed == p.seed);
  REQUIRE(back.subjects.size() == 2);
  REQUIRE(back.anchors.size() == 2);
  for (int u = 0; u < 2; ++u)
    for (int k = 0; k < kNumSkills; ++k) {
      REQUIRE(back.subjects[u].frames[k].size() == ds.subjects[u].frames[k].size());
      for (std::size_t i = 0; i < ds.subjects[u].frames[k].size(); ++i) {
        CHECK(back.subjects[u].frames[k][i].shape == ds.subjects[u].frames[k][i].shape);
        CHECK(back.subjects[u].frames[k][i].data == ds.subjects[u].frames[k][i].data);
      }
      CHECK(back.subjects[u].forces[k] == ds.subjects[u].forces[k]);
      CHECK(back.anchors[u][k] == ds.anchors[u][k]);
    }
}

TEST_CASE("dataset loader rejects damage") {
  SynthParams p;
  p.subjects = 1;
  p.frames_per_skill = 20;
  p.image_size = 32;
  p.segment_len = 20;
  Dataset ds = synth_generate(p);
  const fs::path root = scratch_dir() / "damage";

  CHECK(kind_of([&] { load_dataset((scratch_dir() / "nowhere").string()); }) == ErrorKind::Io);

  auto fresh = [&] {
    fs::remove_all(root);
    write_dataset(root.string(), ds);
  };

  fresh();
  write_bytes(root / "manifest.json", "{ this is not json");
  CHECK(kind_of([&] { load_dataset(root.string()); }) == ErrorKind::MalformedHeader);

  fresh();
  write_bytes(root / "manifest.json", "{\"format\": 2}\n");
  CHECK(kind_of([&] { load_dataset(root.string()); }) == ErrorKind::VersionMismatch);

  fresh();
  // valid json but the params block is missing
  write_bytes(root / "manifest.json", "{\"format\": 1, \"anchors\": []}\n");
  CHECK(kind_of([&] { load_dataset(root.string()); }) == ErrorKind::MalformedHeader);

  fresh();
  // truncate a frames array mid-payload
  {
    std::string bytes = read_bytes(root / "s00" / "skill2" / "frames.npy");
    bytes.resize(bytes.size() / 2);
    write_bytes(root / "s00" / "skill2" / "frames.npy", bytes);
  }
  CHECK(kind_of([&] { load_dataset(root.string()); }) == ErrorKind::TruncatedPayload);

  fresh();
  // forces count that disagrees with the frame count
  write_npy_file((root / "s00" / "skill1" / "forces.npy").string(), Tensor({3}));
  CHECK(kind_of([&] { load_dataset(root.string()); }) == ErrorKind::Corruption);

  fresh();
  // frames with the wrong spatial shape
  write_npy_file((root / "s00" / "skill0" / "frames.npy").string(), Tensor({20, 16, 16}));
  CHECK(kind_of([&] { load_dataset(root.string()); }) == ErrorKind::Corruption);

  fresh();
  fs::remove(root / "s00" / "skill3" / "frames.npy");
  CHECK(kind_of([&] { load_dataset(root.string()); }) == ErrorKind::Io);
}

TEST_CASE("checkpoint round-trip preserves weights, config, and bytes") {
  ArchitectureConfig cfg;
  cfg.input_size = 32;
  cfg.channels = {2, 4, 4, 8, 8};
  Model m = build_model(cfg, Head::Force, 19);
  // make the state distinctive: touch weights and running stats
  SeededRng gen(6);
  for (Tensor* t : m.trainable_refs())
    for (auto& v : t->data) v += gen.uniform_range(-0.2f, 0.2f);
  for (Tensor* t : m.running_stat_refs())
    for (auto& v : t->data) v += gen.uniform_range(0.f, 0.3f);

  const fs::path p1 = scratch_dir() / "model_a.ckpt";
  const fs::path p2 = scratch_dir() / "model_b.ckpt";
  save_checkpoint(p1.string(), m, 0xFEEDu);

  std::uint64_t seed = 0;
  Model back = load_checkpoint(p1.string(), &seed);
  CHECK(seed == 0xFEEDu);
  CHECK(back.head == Head::Force);
  CHECK(back.config.input_size == cfg.input_size);
  CHECK(back.config.channels == cfg.channels);
  CHECK(back.config.dense_units == cfg.dense_units);

  auto ra = m.trainable_refs(), rb = back.trainable_refs();
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) CHECK(ra[i]->data == rb[i]->data);
  auto sa = m.running_stat_refs(), sb = back.running_stat_refs();
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i]->data == sb[i]->data);

  // save(load(x)) reproduces the file byte for byte
  save_checkpoint(p2.string(), back, seed);
  CHECK(read_bytes(p1) == read_bytes(p2));

  // inference is unchanged by the round trip
  Tensor x = rnd({32, 32, 1}, gen, 0.f, 1.f);
  CHECK(forward_sample(m, x).data == forward_sample(back, x).data);
}

TEST_CASE("checkpoint loader rejects damage") {
  ArchitectureConfig cfg;
  cfg.input_size = 32;
  cfg.channels = {2, 2, 2, 2, 2};
  Model m = build_model(cfg, Head::Skill, 3);
  const fs::path good = scratch_dir() / "good.ckpt";
  save_checkpoint(good.string(), m, 1);
  const std::string bytes = read_bytes(good);
  const fs::path p = scratch_dir() / "bad.ckpt";

  CHECK(kind_of([&] { load_checkpoint((scratch_dir() / "nope.ckpt").string()); }) == ErrorKind::Io);

  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  write_bytes(p, wrong_magic);
  CHECK(kind_of([&] { load_checkpoint(p.string()); }) == ErrorKind::MalformedHeader);

  std::string version_bump = bytes;
  version_bump[8] = 2;  // little-endian u32 version right after the magic
  write_bytes(p, version_bump);
  CHECK(kind_of([&] { load_checkpoint(p.string()); }) == ErrorKind::VersionMismatch);

  // a chop inside the final tensor payload
  std::string truncated = bytes.substr(0, bytes.size() - 4);
  write_bytes(p, truncated);
  CHECK(kind_of([&] { load_checkpoint(p.string()); }) == ErrorKind::TruncatedPayload);

  // a chop before the header length field
  write_bytes(p, bytes.substr(0, 10));
  CHECK(kind_of([&] { load_checkpoint(p.string()); }) == ErrorKind::TruncatedPayload);

  // a chop that beheads an embedded tensor
  write_bytes(p, bytes.substr(0, bytes.size() - 100));
  const ErrorKind mid = kind_of([&] { load_checkpoint(p.string()); });
  CHECK((mid == ErrorKind::TruncatedPayload || mid == ErrorKind::MalformedHeader));

  std::string trailing = bytes + "extra";
  write_bytes(p, trailing);
  CHECK(kind_of([&] { load_checkpoint(p.string()); }) == ErrorKind::Corruption);

  // corrupt the JSON header in place
  std::string bad_json = bytes;
  const std::size_t hstart = 16;
  bad_json[hstart] = '?';
  write_bytes(p, bad_json);
  CHECK(kind_of([&] { load_checkpoint(p.string()); }) == ErrorKind::Corruption);
}
