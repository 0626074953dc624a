#pragma once

#include <array>
#include <vector>

#include "model.hpp"

namespace ssk {

double accuracy_percent(const std::vector<int>& predicted, const std::vector<int>& truth);
double rmse(const std::vector<float>& predicted, const std::vector<float>& truth);

double mean(const std::vector<double>& xs);
// population standard deviation by default; sample (n-1) when sample=true
double stddev(const std::vector<double>& xs, bool sample = false);

// RMSE expressed as a percentage of the 0..4 N sensor range
inline double percent_of_force_range(double rmse_newtons) { return rmse_newtons / 4.0 * 100.0; }

struct SkillEval {
  double accuracy = 0.0;  // percent
  std::vector<int> predictions;
  std::array<std::array<int, 5>, 5> confusion{};  // [truth][predicted]
};

struct ForceEval {
  double rmse = 0.0;  // newtons
  double mae = 0.0;
  std::vector<float> predictions;
};

SkillEval evaluate_skill(const Model& m, const std::vector<const Tensor*>& images,
                         const std::vector<int>& labels);
ForceEval evaluate_force(const Model& m, const std::vector<const Tensor*>& images,
                         const std::vector<float>& targets);

}  // namespace ssk
