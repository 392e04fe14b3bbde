#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cate/calibration.hpp"
#include "cate/inference.hpp"
#include "cate/rnn.hpp"
#include "cate/treebank.hpp"

namespace cate {

struct LabeledBracket {
  int label = 0;
  Span span;

  auto operator<=>(const LabeledBracket&) const = default;
};

// One bracket per internal node, sorted.
std::vector<LabeledBracket> labeled_brackets(const ParseTree& tree);

struct BracketScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int matched = 0;
  int gold = 0;
  int predicted = 0;
};

// Multiset intersection over (label, span). With no brackets on either side
// (single-token trees) precision and recall are 1. Throws TokenMismatch.
BracketScore bracket_f1(const ParseTree& gold, const ParseTree& predicted);

struct SentenceRecord {
  std::string sentence;
  ParseTree gold;
  ParseTree predicted;
  double cum_logprob = 0.0;
  bool exact_match = false;
  BracketScore brackets;
};

// Micro-averaged over all brackets/nodes of the split.
struct EvalReport {
  double labeled_precision = 0.0;
  double labeled_recall = 0.0;
  double labeled_f1 = 0.0;
  double exact_match = 0.0;
  double node_accuracy = 0.0;  // labels on the gold structure
  std::size_t corpus_size = 0;
  std::vector<SentenceRecord> sentences;

  nlohmann::json to_json(const LabelVocabulary& vocabulary) const;
  std::string to_table() const;
};

EvalReport evaluate_corpus(const ModelParams& params,
                           const std::optional<CalibrationParams>& calibration,
                           std::span<const ParseTree> split, const ParseConfig& config);

}  // namespace cate
