#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "cate/calibration.hpp"
#include "cate/rnn.hpp"
#include "cate/treebank.hpp"

namespace cate {

struct ParseConfig {
  int beam_width = 1;
  bool use_temperature = false;
  // Model-selection keys; the parser itself only checks beam_width.
  BranchingMode branching = BranchingMode::Left;
  std::string embedding_variant = "random";

  void validate() const;
};

struct MergeScore {
  Eigen::VectorXd hidden;  // composed parent vector
  ClassScores scores;  // probs are the calibrated distribution
  double logprob = 0.0;  // log of the top class probability
};

/// Scores the candidate parent of two adjacent nodes. `temperature` is the
/// fitted T when the caller enables temperature scaling, 1 otherwise.
MergeScore score_merge(const ModelParams& params, double temperature,
                       const Eigen::VectorXd& left_hidden, const Eigen::VectorXd& right_hidden);

MergeScore score_merge(const ModelParams& params, const std::optional<CalibrationParams>& calibration,
                       const Eigen::VectorXd& left_hidden, const Eigen::VectorXd& right_hidden,
                       bool use_temperature);

// Temperature a parse runs with: the fitted one if requested and available.
double effective_temperature(const std::optional<CalibrationParams>& calibration,
                             bool use_temperature);

// Optional bookkeeping of the work a parse performs.
struct ParseTrace {
  int merges = 0;
  std::vector<int> pairs_scored;  // per stage
};

/// Repeatedly merges the adjacent pair with the highest posterior (leftmost
/// on ties) until one root remains.
AnnotatedTree parse_greedy(const ModelParams& params,
                           const std::optional<CalibrationParams>& calibration,
                           std::span<const Token> tokens, const ParseConfig& config,
                           ParseTrace* trace = nullptr);
AnnotatedTree parse_greedy(const ModelParams& params,
                           const std::optional<CalibrationParams>& calibration,
                           std::span<const Token> tokens,
                           std::span<const Eigen::VectorXd> leaf_vectors,
                           const ParseConfig& config, ParseTrace* trace = nullptr);

/// Beam search over partial forests. Each stage expands every kept forest by
/// each of its adjacent merges, drops duplicate forests and keeps the
/// beam_width best by summed merge log-probability.
AnnotatedTree parse_beam(const ModelParams& params,
                         const std::optional<CalibrationParams>& calibration,
                         std::span<const Token> tokens, const ParseConfig& config,
                         ParseTrace* trace = nullptr);
AnnotatedTree parse_beam(const ModelParams& params,
                         const std::optional<CalibrationParams>& calibration,
                         std::span<const Token> tokens,
                         std::span<const Eigen::VectorXd> leaf_vectors,
                         const ParseConfig& config, ParseTrace* trace = nullptr);

// Greedy for beam_width 1, beam search otherwise.
AnnotatedTree parse(const ModelParams& params, const std::optional<CalibrationParams>& calibration,
                    std::span<const Token> tokens, const ParseConfig& config);
AnnotatedTree parse(const ModelParams& params, const std::optional<CalibrationParams>& calibration,
                    std::span<const Token> tokens, std::span<const Eigen::VectorXd> leaf_vectors,
                    const ParseConfig& config);

// {label, span, prob, children} for internal nodes, {token, span} for leaves.
nlohmann::json tree_to_json(const AnnotatedTree& tree, const LabelVocabulary& vocabulary);

// Indented rendering, one node per line.
std::string render_ascii(const AnnotatedTree& tree, const LabelVocabulary& vocabulary);

}  // namespace cate
