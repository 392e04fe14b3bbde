#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cate/checkpoint.hpp"
#include "cate/embeddings.hpp"
#include "cate/rnn.hpp"
#include "cate/treebank.hpp"

namespace cate {

struct TrainingConfig {
  int epochs = 100;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
  bool shuffle = true;
  int patience = 10;  // epochs without validation improvement before stopping
  int dim = 25;       // must match the embedding table
  // See GradientOptions::negative_weight.
  double negative_weight = 1.0;
  BranchingMode branching = BranchingMode::Left;
  std::string embedding_variant = "random";

  void validate() const;
};

struct EpochRecord {
  double train_loss = 0.0;       // mean per-node cross-entropy, accumulated during the epoch
  double validation_loss = 0.0;  // mean per-node cross-entropy after the epoch
  double validation_accuracy = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainingReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0-based index into epochs
  double wall_seconds = 0.0;

  // Wall time is excluded: two runs with the same inputs compare equal.
  bool operator==(const TrainingReport& other) const {
    return epochs == other.epochs && best_epoch == other.best_epoch;
  }
};

struct TrainingResult {
  ModelParams params;
  TrainingReport report;
};

// Contextual leaf vectors, parallel to treebank.trees. Empty means the
// embedding table supplies every leaf.
using ContextualCorpus = std::span<const ContextualSentenceVectors>;

/// Per-tree SGD on the gold structures. Returns the parameters of the epoch
/// with the lowest validation loss (training loss when there is no
/// validation split).
TrainingResult train(const Treebank& treebank, const TrainingConfig& config,
                     EmbeddingTable table, ContextualCorpus contextual = {});

/// Fraction of gold internal nodes whose predicted label matches, on the
/// gold structure.
double node_accuracy(const ModelParams& params, std::span<const ParseTree> trees);

// Mean per-node cross-entropy on the gold structure.
double mean_node_loss(const ModelParams& params, std::span<const ParseTree> trees,
                      std::span<const ContextualSentenceVectors> contextual = {});

}  // namespace cate
