#include <gtest/gtest.h>

#include "cate/evaluation.hpp"
#include "cate/training.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace cate {
namespace {

using testing::expect_code;

const LabelVocabulary& vocab() { return LabelVocabulary::default_vocabulary(); }

ParseTree read(const std::string& s) { return parse_tree(s, vocab()); }

TEST(LabeledBrackets, LeafHasNone) { EXPECT_TRUE(labeled_brackets(ParseTree::leaf("a", 0)).empty()); }

TEST(LabeledBrackets, LeftBranchingCondition) {
  const ParseTree t = read("(Condition (Condition (W set) (W to)) (W true))");
  const int cond = vocab().id("Condition");
  EXPECT_EQ(labeled_brackets(t), (std::vector<LabeledBracket>{{cond, {0, 2}}, {cond, {0, 3}}}));
}

TEST(BracketF1, Identical) {
  const ParseTree t = read("(Clause (Clause (W a) (W b)) (W c))");
  const BracketScore s = bracket_f1(t, t);
  EXPECT_EQ(s.precision, 1.0);
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_EQ(s.f1, 1.0);
}

TEST(BracketF1, Disjoint) {
  const ParseTree gold = read("(Clause (Clause (W a) (W b)) (W c))");
  const ParseTree pred = read("(State (W a) (State (W b) (W c)))");
  const BracketScore s = bracket_f1(gold, pred);
  EXPECT_EQ(s.precision, 0.0);
  EXPECT_EQ(s.recall, 0.0);
  EXPECT_EQ(s.f1, 0.0);
}

TEST(BracketF1, HalfOverlapOnFiveTokens) {
  const ParseTree gold = read("(Clause (Clause (Clause (Clause (W a) (W b)) (W c)) (W d)) (W e))");
  const ParseTree pred = read("(Clause (Clause (W a) (W b)) (Clause (W c) (Clause (W d) (W e))))");
  const BracketScore s = bracket_f1(gold, pred);
  EXPECT_EQ(s.gold, 4);
  EXPECT_EQ(s.predicted, 4);
  EXPECT_EQ(s.matched, 2);
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  EXPECT_DOUBLE_EQ(s.f1, 0.5);
}

TEST(BracketF1, LabelsMatter) {
  const ParseTree gold = read("(Clause (W a) (W b))");
  const ParseTree pred = read("(State (W a) (W b))");
  EXPECT_EQ(bracket_f1(gold, pred).matched, 0);
}

TEST(BracketF1, SingleLeaves) {
  const BracketScore s = bracket_f1(ParseTree::leaf("a", 0), ParseTree::leaf("a", 0));
  EXPECT_EQ(s.f1, 1.0);
}

TEST(BracketF1, TokenMismatch) {
  expect_code(ErrorCode::TokenMismatch,
              [] { bracket_f1(read("(Clause (W a) (W b))"), read("(Clause (W a) (W c))")); });
  expect_code(ErrorCode::TokenMismatch,
              [] { bracket_f1(read("(Clause (W a) (W b))"), read("(Clause (Clause (W a) (W b)) (W c))")); });
}

class Corpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    bank_ = new Treebank(generate_synthetic_corpus(31, 40, BranchingMode::Left));
    TrainingConfig c;
    c.dim = 12;
    c.epochs = 60;
    c.patience = 60;
    model_ = new ModelParams(train(*bank_, c, init_random_table(12, 1)).params);
  }
  static void TearDownTestSuite() {
    delete bank_;
    delete model_;
  }
  static Treebank* bank_;
  static ModelParams* model_;
};

Treebank* Corpus::bank_ = nullptr;
ModelParams* Corpus::model_ = nullptr;

TEST_F(Corpus, OverfitModelOnTrainSplit) {
  const auto train_split = bank_->split(Split::Train);
  const EvalReport r = evaluate_corpus(*model_, std::nullopt, train_split, ParseConfig{});
  EXPECT_EQ(r.corpus_size, train_split.size());
  EXPECT_GE(r.exact_match, 0.95);
  EXPECT_GE(r.labeled_f1, 0.95);
  EXPECT_DOUBLE_EQ(r.node_accuracy, node_accuracy(*model_, train_split));
}

TEST_F(Corpus, MicroAveragesMatchSentenceRecords) {
  const ModelParams noisy = testing::random_model(12, 3, bank_->trees, 2.0);
  const auto test = bank_->trees;
  const EvalReport r = evaluate_corpus(noisy, std::nullopt, test, ParseConfig{});
  int matched = 0, gold = 0, predicted = 0, exact = 0;
  for (const auto& s : r.sentences) {
    matched += s.brackets.matched;
    gold += s.brackets.gold;
    predicted += s.brackets.predicted;
    exact += s.exact_match;
    EXPECT_EQ(s.exact_match, s.gold == s.predicted);
  }
  EXPECT_DOUBLE_EQ(r.labeled_precision, static_cast<double>(matched) / predicted);
  EXPECT_DOUBLE_EQ(r.labeled_recall, static_cast<double>(matched) / gold);
  EXPECT_DOUBLE_EQ(r.exact_match, static_cast<double>(exact) / static_cast<double>(test.size()));
  EXPECT_LT(r.labeled_f1, 0.9);
}

TEST_F(Corpus, Deterministic) {
  const auto split = bank_->split(Split::Test);
  ParseConfig c;
  c.beam_width = 3;
  const EvalReport a = evaluate_corpus(*model_, std::nullopt, split, c);
  const EvalReport b = evaluate_corpus(*model_, std::nullopt, split, c);
  EXPECT_EQ(a.to_json(model_->vocabulary), b.to_json(model_->vocabulary));
  EXPECT_EQ(a.to_table(), b.to_table());
}

TEST_F(Corpus, JsonReport) {
  const EvalReport r = evaluate_corpus(*model_, std::nullopt, bank_->split(Split::Test), ParseConfig{});
  const nlohmann::json j = r.to_json(model_->vocabulary);
  EXPECT_EQ(j["averaging"], "micro");
  EXPECT_EQ(j["corpus_size"], r.corpus_size);
  EXPECT_EQ(j["sentences"].size(), r.corpus_size);
  EXPECT_TRUE(j["sentences"][0].contains("predicted"));
  EXPECT_NE(r.to_table().find("labeled F1"), std::string::npos);
}

TEST_F(Corpus, EmptySplit) {
  expect_code(ErrorCode::EmptySplit, [&] { evaluate_corpus(*model_, std::nullopt, {}, ParseConfig{}); });
}

}  // namespace
}  // namespace cate
