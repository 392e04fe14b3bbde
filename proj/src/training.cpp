#include "cate/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "cate/error.hpp"

namespace cate {

void TrainingConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidArgument, why); };
  if (epochs < 1) fail("epochs must be at least 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(l2 >= 0.0)) fail("l2 must be non-negative");
  if (patience < 1) fail("patience must be at least 1");
  if (dim < 1) fail("dim must be positive");
  if (!(negative_weight >= 0.0)) fail("negative_weight must be non-negative");
}

namespace {

struct Example {
  const ParseTree* tree;
  std::span<const Eigen::VectorXd> leaf_vectors;
};

std::vector<Example> collect(const Treebank& treebank, Split which, ContextualCorpus contextual) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < treebank.trees.size(); ++i) {
    if (treebank.splits[i] != which) continue;
    Example e{&treebank.trees[i], {}};
    if (!contextual.empty()) {
      const auto& c = contextual[i];
      if (static_cast<int>(c.vectors.size()) != treebank.trees[i].num_leaves())
        throw Error(ErrorCode::DimensionMismatch,
                    "contextual vectors for tree " + std::to_string(i) + " do not match its tokens");
      e.leaf_vectors = c.vectors;
    }
    out.push_back(e);
  }
  return out;
}

struct SplitScore {
  double loss = 0.0;
  double accuracy = 0.0;
};

SplitScore score_split(const ModelParams& params, std::span<const Example> examples) {
  double loss = 0.0;
  std::size_t nodes = 0;
  std::size_t correct = 0;
  for (const Example& e : examples) {
    const AnnotatedTree a = forward_gold_tree(params, *e.tree, e.leaf_vectors);
    for (int i : e.tree->internal_nodes()) {
      const ClassScores& s = *a.scores[static_cast<std::size_t>(i)];
      const int gold = e.tree->node(i).label;
      loss -= std::log(s.probs[gold]);
      correct += s.predicted == gold;
      ++nodes;
    }
  }
  if (nodes == 0) return {0.0, 1.0};
  return {loss / static_cast<double>(nodes),
          static_cast<double>(correct) / static_cast<double>(nodes)};
}

void sgd_step(ModelParams& params, const ParamGradients& g, double lr, double l2) {
  params.W -= lr * (g.W + l2 * params.W);
  params.b -= lr * g.b;
  params.Ws -= lr * (g.Ws + l2 * params.Ws);
  params.bs -= lr * g.bs;
  for (const auto& [index, grad] : g.embedding) params.embedding.vector(index) -= lr * grad;
}

}  // namespace

TrainingResult train(const Treebank& treebank, const TrainingConfig& config, EmbeddingTable table,
                     ContextualCorpus contextual) {
  config.validate();
  if (table.dim() != config.dim) {
    throw Error(ErrorCode::DimensionMismatch, "embedding dim " + std::to_string(table.dim()) +
                                                  " differs from configured dim " +
                                                  std::to_string(config.dim));
  }
  if (!contextual.empty() && contextual.size() != treebank.trees.size())
    throw Error(ErrorCode::DimensionMismatch, "need one contextual entry per treebank tree");

  const auto started = std::chrono::steady_clock::now();
  const std::vector<Example> train_set = collect(treebank, Split::Train, contextual);
  const std::vector<Example> validation_set = collect(treebank, Split::Validation, contextual);
  if (train_set.empty()) throw Error(ErrorCode::EmptyTrainSplit, "treebank has no training trees");
  for (const Example& e : train_set) e.tree->validate(kNumLabels);

  ModelParams params = init_params(std::move(table), config.seed, config.branching);
  params.vocabulary = treebank.vocabulary;
  params.embedding_variant = config.embedding_variant;
  params.contextual_leaves = !contextual.empty();
  const bool allocate = contextual.empty() && params.embedding.mode() == EmbeddingMode::RandomTrainable;

  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  GradientOptions options;
  options.negative_weight = config.negative_weight;

  TrainingReport report;
  std::optional<ModelParams> best;
  double best_loss = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t epoch_nodes = 0;
    for (std::size_t k : order) {
      const Example& e = train_set[k];
      if (allocate)
        for (const auto& node : e.tree->nodes())
          if (node.is_leaf()) params.embedding.allocate(node.token);
      options.leaf_vectors = e.leaf_vectors;
      const LossAndGradients lg = gradients(params, *e.tree, options);
      if (!std::isfinite(lg.objective())) {
        throw Error(ErrorCode::NonFiniteLoss,
                    "loss diverged in epoch " + std::to_string(epoch + 1) +
                        "; try a lower learning_rate");
      }
      epoch_loss += lg.loss;
      epoch_nodes += static_cast<std::size_t>(lg.nodes);
      sgd_step(params, lg.grads, config.learning_rate, config.l2);
    }

    EpochRecord record;
    record.train_loss = epoch_nodes ? epoch_loss / static_cast<double>(epoch_nodes) : 0.0;
    const SplitScore val = score_split(params, validation_set.empty() ? train_set : validation_set);
    record.validation_loss = val.loss;
    record.validation_accuracy = val.accuracy;
    if (!std::isfinite(record.validation_loss))
      throw Error(ErrorCode::NonFiniteLoss, "validation loss is not finite; try a lower learning_rate");
    report.epochs.push_back(record);

    if (record.validation_loss < best_loss) {
      best_loss = record.validation_loss;
      report.best_epoch = epoch;
      best = params;
    } else if (epoch - report.best_epoch >= config.patience) {
      break;
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  best->version = "cate-rnn-d" + std::to_string(config.dim) + "-" +
                  std::string(to_string(config.branching)) + "-" + config.embedding_variant +
                  "-seed" + std::to_string(config.seed) + "-epoch" +
                  std::to_string(report.best_epoch + 1);
  return {std::move(*best), std::move(report)};
}

double node_accuracy(const ModelParams& params, std::span<const ParseTree> trees) {
  if (trees.empty()) throw Error(ErrorCode::EmptyInput, "no trees to score");
  std::vector<Example> examples;
  for (const ParseTree& t : trees) examples.push_back({&t, {}});
  return score_split(params, examples).accuracy;
}

double mean_node_loss(const ModelParams& params, std::span<const ParseTree> trees,
                      std::span<const ContextualSentenceVectors> contextual) {
  if (trees.empty()) throw Error(ErrorCode::EmptyInput, "no trees to score");
  std::vector<Example> examples;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    Example e{&trees[i], {}};
    if (!contextual.empty()) e.leaf_vectors = contextual[i].vectors;
    examples.push_back(e);
  }
  return score_split(params, examples).loss;
}

}  // namespace cate
