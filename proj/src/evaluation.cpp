#include "cate/evaluation.hpp"

#include <algorithm>
#include <cstdio>

#include "cate/error.hpp"
#include "cate/training.hpp"

namespace cate {

std::vector<LabeledBracket> labeled_brackets(const ParseTree& tree) {
  std::vector<LabeledBracket> out;
  for (const auto& n : tree.nodes())
    if (!n.is_leaf()) out.push_back({n.label, n.span});
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

double ratio(int num, int den, bool both_empty) {
  if (den == 0) return both_empty ? 1.0 : 0.0;
  return static_cast<double>(num) / den;
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

int multiset_overlap(const std::vector<LabeledBracket>& a, const std::vector<LabeledBracket>& b) {
  std::vector<LabeledBracket> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return static_cast<int>(common.size());
}

}  // namespace

BracketScore bracket_f1(const ParseTree& gold, const ParseTree& predicted) {
  if (gold.leaf_tokens() != predicted.leaf_tokens())
    throw Error(ErrorCode::TokenMismatch, "gold and predicted trees cover different tokens");
  const auto g = labeled_brackets(gold);
  const auto p = labeled_brackets(predicted);
  BracketScore s;
  s.gold = static_cast<int>(g.size());
  s.predicted = static_cast<int>(p.size());
  s.matched = multiset_overlap(g, p);
  const bool both_empty = g.empty() && p.empty();
  s.precision = ratio(s.matched, s.predicted, both_empty);
  s.recall = ratio(s.matched, s.gold, both_empty);
  s.f1 = harmonic(s.precision, s.recall);
  return s;
}

EvalReport evaluate_corpus(const ModelParams& params,
                           const std::optional<CalibrationParams>& calibration,
                           std::span<const ParseTree> split, const ParseConfig& config) {
  if (split.empty()) throw Error(ErrorCode::EmptySplit, "nothing to evaluate");
  EvalReport report;
  report.corpus_size = split.size();
  int matched = 0, gold = 0, predicted = 0, exact = 0;
  for (const ParseTree& tree : split) {
    const std::vector<Token> tokens = tree.tokens();
    AnnotatedTree parsed = parse(params, calibration, tokens, config);
    SentenceRecord record;
    for (const Token& t : tokens) {
      if (!record.sentence.empty()) record.sentence += ' ';
      record.sentence += t.text;
    }
    record.gold = tree;
    record.predicted = std::move(parsed.tree);
    record.cum_logprob = parsed.cum_logprob;
    record.exact_match = record.gold == record.predicted;
    record.brackets = bracket_f1(record.gold, record.predicted);
    matched += record.brackets.matched;
    gold += record.brackets.gold;
    predicted += record.brackets.predicted;
    exact += record.exact_match;
    report.sentences.push_back(std::move(record));
  }
  const bool both_empty = gold == 0 && predicted == 0;
  report.labeled_precision = ratio(matched, predicted, both_empty);
  report.labeled_recall = ratio(matched, gold, both_empty);
  report.labeled_f1 = harmonic(report.labeled_precision, report.labeled_recall);
  report.exact_match = static_cast<double>(exact) / static_cast<double>(split.size());
  report.node_accuracy = node_accuracy(params, split);
  return report;
}

nlohmann::json EvalReport::to_json(const LabelVocabulary& vocabulary) const {
  nlohmann::json j;
  j["averaging"] = "micro";
  j["corpus_size"] = corpus_size;
  j["labeled_precision"] = labeled_precision;
  j["labeled_recall"] = labeled_recall;
  j["labeled_f1"] = labeled_f1;
  j["exact_match"] = exact_match;
  j["node_accuracy"] = node_accuracy;
  auto& records = j["sentences"] = nlohmann::json::array();
  for (const auto& r : sentences) {
    records.push_back({{"sentence", r.sentence},
                       {"gold", serialize_tree(r.gold, vocabulary)},
                       {"predicted", serialize_tree(r.predicted, vocabulary)},
                       {"cum_logprob", r.cum_logprob},
                       {"exact_match", r.exact_match},
                       {"precision", r.brackets.precision},
                       {"recall", r.brackets.recall},
                       {"f1", r.brackets.f1}});
  }
  return j;
}

std::string EvalReport::to_table() const {
  char buffer[256];
  std::string out = "metric (micro-averaged)   value\n";
  out += "------------------------  --------\n";
  auto row = [&](const char* name, double value) {
    std::snprintf(buffer, sizeof buffer, "%-24s  %8.4f\n", name, value);
    out += buffer;
  };
  std::snprintf(buffer, sizeof buffer, "%-24s  %8zu\n", "sentences", corpus_size);
  out += buffer;
  row("labeled precision", labeled_precision);
  row("labeled recall", labeled_recall);
  row("labeled F1", labeled_f1);
  row("exact match", exact_match);
  row("node accuracy", node_accuracy);
  return out;
}

}  // namespace cate
