// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "cate/calibration.hpp"
#include "cate/checkpoint.hpp"
#include "cate/error.hpp"
#include "cate/evaluation.hpp"
#include "cate/inference.hpp"
#include "cate/service.hpp"
#include "cate/training.hpp"
#include "oracles.hpp"

#include "httplib.h"

namespace cate {
namespace {

// Pinned tolerances and sizes.
constexpr double kGradEps = 1e-5;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 30.0;
constexpr double kOverfitSeconds = 120.0;
constexpr double kNodeAccuracyMin = 0.99;
constexpr double kExactMatchMin = 0.95;
constexpr double kBruteForceTol = 1e-9;
constexpr double kSoftmaxSumTol = 1e-9;
constexpr double kTemperatureTol = 0.2;
constexpr double kMonotoneSlack = 1e-12;

constexpr std::uint64_t kCorpusSeed = 20240601;
constexpr int kOverfitTrees = 50;
constexpr const char* kWarningSentence = "If the system detects an error, a warning window shall be shown.";

struct Result {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buffer[256];
  std::snprintf(buffer, sizeof buffer, f, args...);
  return buffer;
}

// Overfit run shared by the parsing criteria.
struct Fixture {
  Treebank bank;
  TrainingResult trained{init_params(init_random_table(1, 0), 0), {}};
  double train_seconds = 0.0;
};

Fixture& fixture() {
  static Fixture f = [] {
    Fixture x;
    x.bank = generate_synthetic_corpus(kCorpusSeed, kOverfitTrees, BranchingMode::Left);
    TrainingConfig c;
    c.dim = 25;
    c.learning_rate = 0.05;
    c.epochs = 300;
    c.patience = 30;
    c.seed = 1;
    const auto start = std::chrono::steady_clock::now();
    x.trained = train(x.bank, c, init_random_table(c.dim, c.seed));
    x.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return x;
  }();
  return f;
}

const ModelParams& model() { return fixture().trained.params; }

ParseConfig width(int w) {
  ParseConfig c;
  c.beam_width = w;
  return c;
}

Result gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  const Treebank bank = generate_synthetic_corpus(kCorpusSeed + 1, 20, BranchingMode::Left);
  const ModelParams p = testing::random_model(8, kCorpusSeed, bank.trees);
  double worst = 0.0;
  std::string where;
  long components = 0;
  for (double negative_weight : {0.0, 1.0}) {
    GradientOptions options;
    options.negative_weight = negative_weight;
    for (const ParseTree& t : bank.trees) {
      const auto check = testing::check_gradients(p, t, options, kGradEps);
      components += check.components;
      if (check.max_relative_error > worst) {
        worst = check.max_relative_error;
        where = check.worst;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst < kGradRelTol && secs < kGradSeconds,
          fmt("%ld components, max rel err %.2e at %s, %.1f s", components, worst, where.c_str(), secs)};
}

Result overfit() {
  const Fixture& f = fixture();
  const auto train_split = f.bank.split(Split::Train);
  const double accuracy = node_accuracy(model(), train_split);
  const EvalReport report = evaluate_corpus(model(), std::nullopt, train_split, width(1));
  const int epochs = static_cast<int>(f.trained.report.epochs.size());
  return {accuracy >= kNodeAccuracyMin && report.exact_match >= kExactMatchMin && epochs <= 300 &&
              f.train_seconds < kOverfitSeconds,
          fmt("node acc %.4f, exact match %.4f on %zu train trees, %d epochs, %.1f s", accuracy,
              report.exact_match, train_split.size(), epochs, f.train_seconds)};
}

Result greedy_is_beam_one() {
  const Treebank sample = generate_synthetic_corpus(kCorpusSeed + 2, 100, BranchingMode::Left);
  int mismatches = 0;
  for (const ParseTree& t : sample.trees) {
    const auto tokens = t.tokens();
    const AnnotatedTree g = parse_greedy(model(), std::nullopt, tokens, width(1));
    const AnnotatedTree b = parse_beam(model(), std::nullopt, tokens, width(1));
    mismatches += !(g.tree == b.tree);
  }
  return {mismatches == 0, fmt("%d mismatches on %zu sentences", mismatches, sample.trees.size())};
}

Result exhaustive_beam() {
  const Treebank source = generate_synthetic_corpus(kCorpusSeed + 3, 50, BranchingMode::Left);
  const auto sample = testing::short_sentences(source.trees, 50, 1, 6, kCorpusSeed);
  int score_mismatch = 0;
  int tree_mismatch = 0;
  int unique = 0;
  double worst = 0.0;
  for (const auto& tokens : sample) {
    const auto all = testing::enumerate_bracketings(model(), 1.0, tokens);
    double best = -std::numeric_limits<double>::infinity();
    double second = best;
    const ParseTree* best_tree = nullptr;
    for (const auto& b : all) {
      if (b.logprob > best) {
        second = best;
        best = b.logprob;
        best_tree = &b.tree;
      } else if (b.logprob > second) {
        second = b.logprob;
      }
    }
    const AnnotatedTree t = parse_beam(model(), std::nullopt, tokens, width(42));
    const double gap = std::abs(t.cum_logprob - best);
    worst = std::max(worst, gap);
    score_mismatch += gap > kBruteForceTol;
    if (best - second > kBruteForceTol) {
      ++unique;
      tree_mismatch += !(t.tree == *best_tree);
    }
  }
  return {score_mismatch == 0 && tree_mismatch == 0,
          fmt("%zu sentences, max |dlogprob| %.1e, %d/%d unique optima matched", sample.size(), worst,
              unique - tree_mismatch, unique)};
}

Result beam_monotone() {
  const Treebank sample = generate_synthetic_corpus(kCorpusSeed + 4, 50, BranchingMode::Left);
  int violations = 0;
  double worst = 0.0;
  for (const ParseTree& t : sample.trees) {
    const auto tokens = t.tokens();
    double previous = -std::numeric_limits<double>::infinity();
    for (int w : {1, 2, 4, 8}) {
      const double score = parse(model(), std::nullopt, tokens, width(w)).cum_logprob;
      if (score < previous - kMonotoneSlack) {
        ++violations;
        worst = std::max(worst, previous - score);
      }
      previous = score;
    }
  }
  return {violations == 0,
          fmt("%d decreases over widths {1,2,4,8} on %zu sentences (largest %.3g)", violations,
              sample.trees.size(), worst)};
}

Result calibration() {
  std::mt19937_64 rng(kCorpusSeed);
  std::normal_distribution<double> normal(0.0, 3.0);
  double worst_sum = 0.0;
  int argmax_changes = 0;
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd x(kNumLabels);
    for (int k = 0; k < kNumLabels; ++k) x[k] = normal(rng);
    for (double t : {0.1, 1.0, 2.0, 10.0}) {
      const Eigen::VectorXd p = calibrated_softmax(x, t);
      worst_sum = std::max(worst_sum, std::abs(p.sum() - 1.0));
      argmax_changes += argmax(p) != argmax(x);
    }
  }

  // Labels drawn from softmax(z), logits reported as 5z.
  auto synthetic = [&](int n, double scale, std::uint64_t seed, std::vector<Eigen::VectorXd>& logits,
                       std::vector<int>& labels) {
    std::mt19937_64 r(seed);
    std::normal_distribution<double> z(0.0, 2.0);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd v(kNumLabels);
      for (int k = 0; k < kNumLabels; ++k) v[k] = z(r);
      const Eigen::VectorXd p = calibrated_softmax(v, 1.0);
      std::discrete_distribution<int> draw(p.data(), p.data() + p.size());
      labels.push_back(draw(r));
      logits.push_back(scale * v);
    }
  };
  std::vector<Eigen::VectorXd> logits;
  std::vector<int> labels;
  synthetic(5000, 5.0, kCorpusSeed + 5, logits, labels);
  const CalibrationParams fitted = fit_temperature(logits, labels);

  int nll_increases = fitted.nll_after > fitted.nll_before;
  int fits = 1;
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::vector<Eigen::VectorXd> l;
    std::vector<int> y;
    synthetic(2 + static_cast<int>(s % 7), 0.1 + 0.2 * static_cast<double>(s), kCorpusSeed + 100 + s, l, y);
    const CalibrationParams c = fit_temperature(l, y);
    nll_increases += c.nll_after > c.nll_before;
    ++fits;
  }
  const auto validation = fixture().bank.split(Split::Validation);
  const CalibrationParams on_model = fit_temperature(model(), validation);
  nll_increases += on_model.nll_after > on_model.nll_before;
  ++fits;

  const bool pass = worst_sum <= kSoftmaxSumTol && argmax_changes == 0 &&
                    std::abs(fitted.temperature - 5.0) <= kTemperatureTol && nll_increases == 0;
  return {pass, fmt("max |sum-1| %.1e, %d argmax changes, scale-x5 T=%.4f, NLL increased in %d/%d fits",
                    worst_sum, argmax_changes, fitted.temperature, nll_increases, fits)};
}

Result twenty_seven_classes() {
  std::vector<std::string> failures;
  auto require = [&](bool ok, const char* what) {
    if (!ok) failures.push_back(what);
  };
  require(LabelVocabulary::default_vocabulary().size() == 27, "default vocabulary");
  for (int n : {26, 28}) {
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("L" + std::to_string(i));
    bool rejected = false;
    try {
      LabelVocabulary v(names);
    } catch (const Error& e) {
      rejected = e.code() == ErrorCode::VocabularyMismatch;
    }
    require(rejected, "vocabulary size check");
  }
  const ModelParams& p = model();
  require(p.Ws.rows() == 27 && p.bs.size() == 27 && p.vocabulary.size() == 27, "model shapes");
  const AnnotatedTree t = parse(p, std::nullopt, tokenize(kWarningSentence), width(3));
  for (const auto& s : t.scores)
    if (s) require(s->logits.size() == 27 && s->probs.size() == 27, "score size");

  nlohmann::json j = checkpoint_to_json({p, std::nullopt});
  require(j["Ws"].size() == static_cast<std::size_t>(27 * p.dim()) && j["bs"].size() == 27 &&
              j["vocabulary"].size() == 27,
          "checkpoint sizes");
  auto bs = j["bs"].get<std::vector<double>>();
  bs.pop_back();
  j["bs"] = bs;
  bool rejected = false;
  try {
    checkpoint_from_json(j);
  } catch (const Error& e) {
    rejected = e.code() == ErrorCode::InvalidCheckpoint;
  }
  require(rejected, "checkpoint with 26 biases accepted");
  ModelParams shrunk = p;
  shrunk.Ws.conservativeResize(26, p.dim());
  rejected = false;
  try {
    shrunk.validate();
  } catch (const Error&) {
    rejected = true;
  }
  require(rejected, "26-row classifier accepted");

  std::string detail = "vocabulary, classifier, scores and checkpoint held to 27";
  if (!failures.empty()) {
    detail = "failed:";
    for (const auto& f : failures) detail += " " + f + ";";
  }
  return {failures.empty(), detail};
}

Result round_trips() {
  const Treebank bank = generate_synthetic_corpus(kCorpusSeed + 6, 200, BranchingMode::Right);
  const std::string text = serialize_treebank(bank);
  std::istringstream in(text);
  const Treebank again = parse_treebank(in);
  int tree_mismatches = 0;
  for (std::size_t i = 0; i < bank.trees.size(); ++i) tree_mismatches += !(again.trees.at(i) == bank.trees[i]);
  const bool treebank_ok = again.trees.size() == 200 && tree_mismatches == 0 && serialize_treebank(again) == text;

  const auto dir = std::filesystem::temp_directory_path() / "cate_acceptance";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.json";
  Checkpoint original{model(), fit_temperature(model(), fixture().bank.split(Split::Validation))};
  save_checkpoint(path, original);
  const Checkpoint loaded = load_checkpoint(path);
  std::filesystem::remove_all(dir);

  int output_mismatches = 0;
  int parses = 0;
  const Treebank sample = generate_synthetic_corpus(kCorpusSeed + 7, 50, BranchingMode::Left);
  for (const ParseTree& t : sample.trees) {
    for (int w : {1, 4}) {
      for (bool temperature : {false, true}) {
        ParseConfig c = width(w);
        c.use_temperature = temperature;
        const ParseOutcome a = run_parse(original, t.tokens(), {}, c);
        const ParseOutcome b = run_parse(loaded, t.tokens(), {}, c);
        ++parses;
        output_mismatches += a.tree_json.dump() != b.tree_json.dump() ||
                             std::memcmp(&a.tree.cum_logprob, &b.tree.cum_logprob, sizeof(double)) != 0;
      }
    }
  }
  return {treebank_ok && output_mismatches == 0,
          fmt("treebank: %d/200 trees differ; checkpoint: %d/%d parse outputs differ", tree_mismatches,
              output_mismatches, parses)};
}

Result naive_shape() {
  int failures = 0;
  std::mt19937_64 rng(kCorpusSeed);
  const auto words = fixture().bank.trees.front().leaf_tokens();
  for (int n = 1; n <= 30; ++n) {
    std::vector<std::string> sentence;
    for (int i = 0; i < n; ++i)
      sentence.push_back(words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)]);
    const auto tokens = make_tokens(sentence);
    for (int w : {1, 4}) {
      ParseTrace trace;
      const AnnotatedTree t = w == 1 ? parse_greedy(model(), std::nullopt, tokens, width(1), &trace)
                                     : parse_beam(model(), std::nullopt, tokens, width(w), &trace);
      const int first = trace.pairs_scored.empty() ? 0 : trace.pairs_scored.front();
      failures += trace.merges != n - 1 || t.num_scores() != n - 1 || (n > 1 && first != n - 1);
    }
  }
  ParseTrace five;
  parse_greedy(model(), std::nullopt, make_tokens({"a", "b", "c", "d", "e"}), width(1), &five);
  const bool five_ok = five.merges == 4 && five.pairs_scored.front() == 4;
  return {failures == 0 && five_ok,
          fmt("n=1..30, greedy and beam-4: %d shape failures; 5 tokens: %d merges, %d first-stage pairs", failures,
              five.merges, five.pairs_scored.front())};
}

Result service_contract() {
  auto registry = std::make_shared<ModelRegistry>();
  registry->add({"", "", Checkpoint{model(), std::nullopt}});
  const ParseService service(registry);
  httplib::Server server;
  mount(server, service);
  const int port = server.bind_to_any_port("127.0.0.1");
  if (port <= 0) return {false, "could not bind a port"};
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  const auto ok = client.Post("/api/parse",
                              nlohmann::json{{"sentence", kWarningSentence}, {"beam_width", 4}}.dump(),
                              "application/json");
  const auto empty = client.Post("/api/parse", R"({"sentence":""})", "application/json");
  server.stop();
  worker.join();
  if (!ok || !empty) return {false, "request failed"};

  std::vector<std::string> leaves;
  std::function<void(const nlohmann::json&)> walk = [&](const nlohmann::json& n) {
    if (n.contains("token")) {
      leaves.push_back(n["token"].get<std::string>());
      return;
    }
    for (const auto& c : n["children"]) walk(c);
  };
  if (ok->status == 200) walk(nlohmann::json::parse(ok->body)["tree"]);
  std::vector<std::string> expected;
  for (const auto& t : tokenize(kWarningSentence)) expected.push_back(t.text);
  return {ok->status == 200 && leaves.size() == 14 && leaves == expected && empty->status == 400,
          fmt("warning sentence -> %d with %zu leaves%s; empty sentence -> %d", ok->status, leaves.size(),
              leaves == expected ? " matching tokenization" : "", empty->status)};
}

}  // namespace
}  // namespace cate

int main() {
  using namespace cate;
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria = {
      {"gradient-check", gradient_check},
      {"overfit", overfit},
      {"greedy-equals-beam-1", greedy_is_beam_one},
      {"exhaustive-beam", exhaustive_beam},
      {"beam-monotonicity", beam_monotone},
      {"calibration", calibration},
      {"27-classes", twenty_seven_classes},
      {"round-trips", round_trips},
      {"naive-shape", naive_shape},
      {"service-contract", service_contract},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Result r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !r.pass;
    std::printf("%s  %-22s %s [%.2f s]\n", r.pass ? "PASS" : "FAIL", name.c_str(), r.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
