#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cate/rnn.hpp"

namespace cate {

struct CalibrationParams {
  double temperature = 1.0;
  std::size_t fitted_on = 0;  // validation nodes
  double nll_before = 0.0;    // mean NLL at T = 1
  double nll_after = 0.0;     // mean NLL at the fitted T

  bool operator==(const CalibrationParams&) const = default;
};

enum class SoftmaxForm {
  // exp(x_i / T) / sum_j exp(x_j / T)
  Standard,
  // exp(x_i) / sum_j exp(x_j / T): the temperature only in the denominator.
  // Not a distribution for T != 1; kept for side-by-side comparison.
  DenominatorOnly,
};

/// Temperature-scaled softmax with max subtraction. Throws
/// NonPositiveTemperature for T <= 0.
Eigen::VectorXd calibrated_softmax(const Eigen::VectorXd& logits, double temperature,
                                   SoftmaxForm form = SoftmaxForm::Standard);

// log of the largest calibrated probability, computed without forming the
// probabilities.
double log_max_prob(const Eigen::VectorXd& logits, double temperature);

double mean_nll(std::span<const Eigen::VectorXd> logits, std::span<const int> labels,
                double temperature);

inline constexpr double kMinTemperature = 0.05;
inline constexpr double kMaxTemperature = 10.0;
inline constexpr double kTemperatureTolerance = 1e-4;

/// Golden-section search for the T in [0.05, 10] minimizing mean NLL. The
/// result never has a higher NLL than T = 1.
CalibrationParams fit_temperature(std::span<const Eigen::VectorXd> logits,
                                  std::span<const int> labels);
// Collects logits at every internal node of the validation trees via the
// gold-structure forward pass.
CalibrationParams fit_temperature(const ModelParams& params,
                                  std::span<const ParseTree> validation);

struct ScoredPrediction {
  Eigen::VectorXd probs;
  int gold = 0;
};

// Equal-width confidence bins over the predicted-class probability.
double expected_calibration_error(std::span<const ScoredPrediction> predictions, int bins);

}  // namespace cate
