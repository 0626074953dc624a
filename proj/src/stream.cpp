#include "stream.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "errors.hpp"

namespace ssk {

StreamReport run_stream(const Model& skill_model, const std::array<const Model*, 5>& force_models,
                        const StreamSource& source, const StreamConfig& cfg) {
  if (skill_model.head != Head::Skill)
    fail(ErrorKind::InvalidArgument, "stream: first model must be a skill model");
  for (const Model* fm : force_models) {
    if (!fm) fail(ErrorKind::InvalidArgument, "stream: all five force slots must be filled");
    if (fm->head != Head::Force)
      fail(ErrorKind::InvalidArgument, "stream: routed model is not a force model");
    if (fm->config.input_size != skill_model.config.input_size)
      fail(ErrorKind::InvalidArgument, "stream: force model input size differs from skill model");
  }
  if (source.images.empty()) fail(ErrorKind::InvalidArgument, "stream: empty source");
  if (!(cfg.rate_hz > 0.0)) fail(ErrorKind::InvalidArgument, "stream: rate must be positive");
  if (!source.skill_truth.empty() && source.skill_truth.size() != source.images.size())
    fail(ErrorKind::InvalidArgument, "stream: skill truth count does not match frames");
  if (!source.force_truth.empty() && source.force_truth.size() != source.images.size())
    fail(ErrorKind::InvalidArgument, "stream: force truth count does not match frames");

  const int n = cfg.max_frames > 0
                    ? std::min<int>(cfg.max_frames, static_cast<int>(source.images.size()))
                    : static_cast<int>(source.images.size());
  const double period_s = 1.0 / cfg.rate_hz;

  StreamReport report;
  report.period_ms = period_s * 1000.0;
  report.frames.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& r = report.frames[static_cast<std::size_t>(i)];
    r.index = i;
    if (!source.skill_truth.empty()) r.skill_truth = source.skill_truth[static_cast<std::size_t>(i)];
    if (!source.force_truth.empty()) r.force_truth = source.force_truth[static_cast<std::size_t>(i)];
  }

  std::mutex mu;
  std::condition_variable cv;
  int slot = -1;  // depth-1 queue: index of the emitted frame awaiting pickup
  bool done_emitting = false;

  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto since_start = [&t0](clock::time_point t) {
    return std::chrono::duration<double>(t - t0).count();
  };

  std::thread producer([&] {
    for (int i = 0; i < n; ++i) {
      std::this_thread::sleep_until(t0 + std::chrono::duration<double>(i * period_s));
      std::lock_guard<std::mutex> lk(mu);
      report.frames[static_cast<std::size_t>(i)].emit_s = since_start(clock::now());
      slot = i;  // displaces any unconsumed frame; it stays processed=false
      cv.notify_one();
    }
    std::lock_guard<std::mutex> lk(mu);
    done_emitting = true;
    cv.notify_one();
  });

  for (;;) {
    int idx;
    {
      std::unique_lock<std::mutex> lk(mu);
      cv.wait(lk, [&] { return slot >= 0 || done_emitting; });
      if (slot < 0) break;
      idx = slot;
      slot = -1;
    }
    auto& rec = report.frames[static_cast<std::size_t>(idx)];
    const auto ts = clock::now();
    rec.start_s = since_start(ts);

    rec.skill_pred = predict_skill(skill_model, *source.images[static_cast<std::size_t>(idx)]);
    const auto tm = clock::now();
    rec.skill_ms = std::chrono::duration<double, std::milli>(tm - ts).count();

    const Model* fm = force_models[static_cast<std::size_t>(rec.skill_pred)];
    rec.force_pred = predict_force(*fm, *source.images[static_cast<std::size_t>(idx)]);
    const auto td = clock::now();
    rec.force_ms = std::chrono::duration<double, std::milli>(td - tm).count();

    rec.done_s = since_start(td);
    rec.deadline_met = (rec.done_s - rec.emit_s) <= period_s;
    rec.processed = true;
  }
  producer.join();
  report.duration_s = since_start(clock::now());

  report.emitted = n;
  double skill_sum = 0.0, force_sum = 0.0;
  for (const auto& r : report.frames) {
    if (!r.processed) {
      ++report.displaced;
      continue;
    }
    ++report.processed;
    if (!r.deadline_met) ++report.deadline_misses;
    skill_sum += r.skill_ms;
    force_sum += r.force_ms;
    report.max_skill_ms = std::max(report.max_skill_ms, r.skill_ms);
    report.max_force_ms = std::max(report.max_force_ms, r.force_ms);
  }
  if (report.processed > 0) {
    report.mean_skill_ms = skill_sum / report.processed;
    report.mean_force_ms = force_sum / report.processed;
  }
  return report;
}

void StreamReport::write_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f << "frame,processed,emit_s,start_s,done_s,skill_pred,skill_truth,skill_ms,"
       "force_pred,force_truth,force_ms,deadline_met\n";
  char buf[256];
  for (const auto& r : frames) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f,%.6f,%d,%d,%.3f,%.4f,%.4f,%.3f,%d\n", r.index,
                  r.processed ? 1 : 0, r.emit_s, r.start_s, r.done_s, r.skill_pred, r.skill_truth,
                  r.skill_ms, static_cast<double>(r.force_pred), static_cast<double>(r.force_truth),
                  r.force_ms, r.deadline_met ? 1 : 0);
    f << buf;
  }
}

std::string StreamReport::summary() const {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "frames emitted:    %d (period %.1f ms)\n", emitted, period_ms);
  os << buf;
  std::snprintf(buf, sizeof(buf), "frames processed:  %d\n", processed);
  os << buf;
  std::snprintf(buf, sizeof(buf), "frames displaced:  %d\n", displaced);
  os << buf;
  std::snprintf(buf, sizeof(buf), "deadline misses:   %d\n", deadline_misses);
  os << buf;
  std::snprintf(buf, sizeof(buf), "skill latency ms:  mean %.2f  max %.2f\n", mean_skill_ms,
                max_skill_ms);
  os << buf;
  std::snprintf(buf, sizeof(buf), "force latency ms:  mean %.2f  max %.2f\n", mean_force_ms,
                max_force_ms);
  os << buf;
  std::snprintf(buf, sizeof(buf), "wall time:         %.2f s\n", duration_s);
  os << buf;
  return os.str();
}

}  // namespace ssk
