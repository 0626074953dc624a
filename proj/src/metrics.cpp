#include "metrics.hpp"

#include <cmath>

#include "errors.hpp"

namespace ssk {

double accuracy_percent(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || predicted.empty())
    fail(ErrorKind::InvalidArgument, "accuracy: prediction/label counts differ or are empty");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == truth[i]) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double rmse(const std::vector<float>& predicted, const std::vector<float>& truth) {
  if (predicted.size() != truth.size() || predicted.empty())
    fail(ErrorKind::InvalidArgument, "rmse: prediction/target counts differ or are empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = static_cast<double>(predicted[i]) - truth[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(predicted.size()));
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) fail(ErrorKind::InvalidArgument, "mean of empty sequence");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double stddev(const std::vector<double>& xs, bool sample) {
  if (xs.empty() || (sample && xs.size() < 2))
    fail(ErrorKind::InvalidArgument, "stddev needs enough values");
  const double mu = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(xs.size() - (sample ? 1 : 0)));
}

SkillEval evaluate_skill(const Model& m, const std::vector<const Tensor*>& images,
                         const std::vector<int>& labels) {
  if (images.size() != labels.size() || images.empty())
    fail(ErrorKind::InvalidArgument, "evaluate_skill: image/label counts differ or are empty");
  SkillEval ev;
  ev.predictions.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const int p = predict_skill(m, *images[i]);
    ev.predictions.push_back(p);
    if (labels[i] < 0 || labels[i] >= 5)
      fail(ErrorKind::InvalidArgument, "evaluate_skill: label out of range");
    ++ev.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(p)];
  }
  ev.accuracy = accuracy_percent(ev.predictions, labels);
  return ev;
}

ForceEval evaluate_force(const Model& m, const std::vector<const Tensor*>& images,
                         const std::vector<float>& targets) {
  if (images.size() != targets.size() || images.empty())
    fail(ErrorKind::InvalidArgument, "evaluate_force: image/target counts differ or are empty");
  ForceEval ev;
  ev.predictions.reserve(images.size());
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const float p = predict_force(m, *images[i]);
    ev.predictions.push_back(p);
    abs_sum += std::abs(static_cast<double>(p) - targets[i]);
  }
  ev.rmse = rmse(ev.predictions, targets);
  ev.mae = abs_sum / static_cast<double>(images.size());
  return ev;
}

}  // namespace ssk
