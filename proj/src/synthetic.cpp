// Synthetic causal-requirement corpus.
//
// Sentences follow
//   If <variable> <condition> [and|or <variable> <condition>] , then
//   <variable> <action> [and <variable> <action>] .
// and are labeled so that every segment label is determined by the words it
// covers, which keeps the corpus learnable by a bottom-up composition model.

#include <random>
#include <string>
#include <vector>

#include "cate/error.hpp"
#include "cate/treebank.hpp"

namespace cate {
namespace {

const std::vector<std::string> kCauseNouns = {
    "button", "sensor", "door", "user", "light", "valve", "timer", "battery"};
const std::vector<std::string> kModifiers = {"red", "main", "backup", "emergency"};
const std::vector<std::string> kStates = {"pressed", "active", "open",     "closed",
                                          "empty",   "full",   "detected", "enabled"};
const std::vector<std::string> kEffectNouns = {"system", "display", "controller", "app",
                                               "alarm",  "window"};
const std::vector<std::string> kVerbs = {"restart", "stop", "beep", "reboot"};
const std::vector<std::string> kParticiples = {"shown", "locked", "disabled", "saved"};

class CorpusBuilder {
 public:
  CorpusBuilder(std::uint64_t seed, BranchingMode mode)
      : rng_(seed), mode_(mode), vocabulary_(LabelVocabulary::default_vocabulary()) {}

  ParseTree sentence() {
    next_ = 0;
    std::vector<ParseTree> parts;
    parts.push_back(if_clause());
    parts.push_back(word(","));
    parts.push_back(then_clause());
    parts.push_back(word("."));
    return segment("Sentence", parts);
  }

 private:
  ParseTree word(const std::string& text) { return ParseTree::leaf(text, next_++); }

  ParseTree segment(const char* label, const std::vector<ParseTree>& parts) {
    return binarize(parts, vocabulary_.id(label), mode_);
  }

  const std::string& pick(const std::vector<std::string>& options) {
    std::uniform_int_distribution<std::size_t> dist(0, options.size() - 1);
    return options[dist(rng_)];
  }

  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }

  ParseTree variable(const std::vector<std::string>& nouns, bool allow_modifier) {
    std::vector<ParseTree> parts;
    parts.push_back(word("the"));
    if (allow_modifier && chance(0.3)) parts.push_back(word(pick(kModifiers)));
    parts.push_back(word(pick(nouns)));
    return segment("Variable", parts);
  }

  ParseTree condition() {
    std::vector<ParseTree> parts;
    parts.push_back(word("is"));
    if (chance(0.2)) {
      std::vector<ParseTree> negated;
      negated.push_back(word("not"));
      negated.push_back(word(pick(kStates)));
      parts.push_back(segment("Negation", negated));
    } else {
      parts.push_back(word(pick(kStates)));
    }
    return segment("Condition", parts);
  }

  ParseTree action() {
    std::vector<ParseTree> parts;
    parts.push_back(word("shall"));
    if (chance(0.5)) {
      parts.push_back(word(pick(kVerbs)));
    } else {
      parts.push_back(word("be"));
      parts.push_back(word(pick(kParticiples)));
    }
    return segment("Action", parts);
  }

  ParseTree cause() {
    std::vector<ParseTree> parts;
    parts.push_back(variable(kCauseNouns, true));
    parts.push_back(condition());
    return segment("Cause1", parts);
  }

  ParseTree effect() {
    std::vector<ParseTree> parts;
    parts.push_back(variable(kEffectNouns, false));
    parts.push_back(action());
    return segment("Effect1", parts);
  }

  ParseTree if_clause() {
    std::vector<ParseTree> parts;
    parts.push_back(word("If"));
    ParseTree first = cause();
    if (chance(0.5)) {
      parts.push_back(std::move(first));
    } else {
      const bool conjunction = chance(0.5);
      std::vector<ParseTree> group;
      group.push_back(std::move(first));
      group.push_back(word(conjunction ? "and" : "or"));
      group.push_back(cause());
      parts.push_back(segment(conjunction ? "Conjunction" : "Disjunction", group));
    }
    return segment("IfClause", parts);
  }

  ParseTree then_clause() {
    std::vector<ParseTree> parts;
    parts.push_back(word("then"));
    ParseTree first = effect();
    if (chance(0.7)) {
      parts.push_back(std::move(first));
    } else {
      std::vector<ParseTree> group;
      group.push_back(std::move(first));
      group.push_back(word("and"));
      group.push_back(effect());
      parts.push_back(segment("Conjunction", group));
    }
    return segment("ThenClause", parts);
  }

  std::mt19937_64 rng_;
  BranchingMode mode_;
  const LabelVocabulary& vocabulary_;
  int next_ = 0;
};

}  // namespace

Treebank generate_synthetic_corpus(std::uint64_t seed, int n, BranchingMode mode) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "corpus size must be at least 1");
  CorpusBuilder builder(seed, mode);
  Treebank bank;
  bank.trees.reserve(static_cast<std::size_t>(n));
  const int n_validation = n / 10;
  const int n_test = n / 10;
  const int n_train = n - n_validation - n_test;
  for (int i = 0; i < n; ++i) {
    bank.trees.push_back(builder.sentence());
    bank.splits.push_back(i < n_train                  ? Split::Train
                          : i < n_train + n_validation ? Split::Validation
                                                       : Split::Test);
  }
  return bank;
}

}  // namespace cate
