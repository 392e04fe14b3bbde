#include "cate/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "cate/error.hpp"

namespace cate {

namespace {

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw Error(ErrorCode::NonPositiveTemperature, "temperature must be positive and finite");
}

// log sum_j exp(x_j / T)
double log_partition(const Eigen::VectorXd& logits, double temperature) {
  const double m = logits.maxCoeff() / temperature;
  return m + std::log(((logits.array() / temperature) - m).exp().sum());
}

}  // namespace

Eigen::VectorXd calibrated_softmax(const Eigen::VectorXd& logits, double temperature,
                                   SoftmaxForm form) {
  check_temperature(temperature);
  if (logits.size() == 0) throw Error(ErrorCode::EmptyInput, "no logits");
  if (form == SoftmaxForm::DenominatorOnly) {
    return (logits.array() - log_partition(logits, temperature)).exp();
  }
  Eigen::ArrayXd scaled = logits.array() / temperature;
  Eigen::ArrayXd e = (scaled - scaled.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

double log_max_prob(const Eigen::VectorXd& logits, double temperature) {
  check_temperature(temperature);
  const double m = logits.maxCoeff();
  // The max term contributes exp(0) = 1, so the sum is at least 1.
  return -std::log(((logits.array() - m) / temperature).exp().sum());
}

double mean_nll(std::span<const Eigen::VectorXd> logits, std::span<const int> labels,
                double temperature) {
  check_temperature(temperature);
  if (logits.empty() || logits.size() != labels.size())
    throw Error(ErrorCode::EmptyInput, "need one label per logit vector");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    total += log_partition(logits[i], temperature) -
             logits[i][labels[i]] / temperature;
  }
  return total / static_cast<double>(logits.size());
}

CalibrationParams fit_temperature(std::span<const Eigen::VectorXd> logits,
                                  std::span<const int> labels) {
  if (logits.empty()) throw Error(ErrorCode::EmptyValidation, "no validation nodes");
  auto nll = [&](double t) { return mean_nll(logits, labels, t); };

  // NLL is convex in 1/T, hence unimodal in T on the bracket.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = kMinTemperature;
  double b = kMaxTemperature;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = nll(c);
  double fd = nll(d);
  while (b - a > kTemperatureTolerance) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = nll(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = nll(d);
    }
  }
  CalibrationParams out;
  out.fitted_on = logits.size();
  out.nll_before = nll(1.0);
  out.temperature = (a + b) / 2.0;
  out.nll_after = nll(out.temperature);
  if (out.nll_after > out.nll_before) {
    out.temperature = 1.0;
    out.nll_after = out.nll_before;
  }
  return out;
}

CalibrationParams fit_temperature(const ModelParams& params,
                                  std::span<const ParseTree> validation) {
  if (validation.empty()) throw Error(ErrorCode::EmptyValidation, "validation split is empty");
  std::vector<Eigen::VectorXd> logits;
  std::vector<int> labels;
  for (const ParseTree& tree : validation) {
    const AnnotatedTree annotated = forward_gold_tree(params, tree);
    for (int i : tree.internal_nodes()) {
      logits.push_back(annotated.scores[static_cast<std::size_t>(i)]->logits);
      labels.push_back(tree.node(i).label);
    }
  }
  if (logits.empty())
    throw Error(ErrorCode::EmptyValidation, "validation trees have no internal nodes");
  return fit_temperature(logits, labels);
}

double expected_calibration_error(std::span<const ScoredPrediction> predictions, int bins) {
  if (predictions.empty()) throw Error(ErrorCode::EmptyInput, "no predictions");
  if (bins < 1) throw Error(ErrorCode::InvalidArgument, "bins must be at least 1");
  std::vector<double> confidence(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> correct(static_cast<std::size_t>(bins), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
  for (const auto& p : predictions) {
    const int predicted = argmax(p.probs);
    const double conf = p.probs[predicted];
    const auto bin = static_cast<std::size_t>(
        std::clamp(static_cast<int>(conf * bins), 0, bins - 1));
    confidence[bin] += conf;
    correct[bin] += predicted == p.gold ? 1.0 : 0.0;
    ++count[bin];
  }
  const auto n = static_cast<double>(predictions.size());
  double ece = 0.0;
  for (std::size_t k = 0; k < count.size(); ++k) {
    if (count[k] == 0) continue;
    ece += std::abs(correct[k] - confidence[k]) / n;
  }
  return ece;
}

}  // namespace cate
