#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cate/embeddings.hpp"
#include "cate/treebank.hpp"

namespace cate {

// Trainable state of the recursive network.
//
//   parent = tanh(W [left; right] + b)          W: d x 2d, b: d
//   logits = Ws parent + bs                     Ws: 27 x d, bs: 27
struct ModelParams {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  Eigen::MatrixXd Ws;
  Eigen::VectorXd bs;
  EmbeddingTable embedding;
  LabelVocabulary vocabulary = LabelVocabulary::default_vocabulary();
  BranchingMode branching = BranchingMode::Left;
  std::string embedding_variant = "random";
  std::string version = "untrained";
  // Trained on caller-supplied leaf vectors rather than the table.
  bool contextual_leaves = false;

  int dim() const { return static_cast<int>(b.size()); }

  // Shapes against dim and 27 classes, finiteness. Throws.
  void validate() const;
};

/// W and Ws uniform in +-1/sqrt(fan-in), biases zero.
ModelParams init_params(EmbeddingTable embedding, std::uint64_t seed,
                        BranchingMode branching = BranchingMode::Left);

struct ClassScores {
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
  int predicted = 0;

  double confidence() const { return probs[predicted]; }
};

// Lowest index among maxima.
int argmax(const Eigen::VectorXd& v);

Eigen::VectorXd compose(const ModelParams& params, const Eigen::VectorXd& left,
                        const Eigen::VectorXd& right);
ClassScores classify(const ModelParams& params, const Eigen::VectorXd& hidden);

// ParseTree plus per-node hidden vectors and, on internal nodes, class
// scores. Indices match tree.nodes().
struct AnnotatedTree {
  ParseTree tree;
  std::vector<Eigen::VectorXd> hidden;
  std::vector<std::optional<ClassScores>> scores;
  double cum_logprob = 0.0;

  int num_scores() const;
};

AnnotatedTree forward_gold_tree(const ModelParams& params, const ParseTree& gold);
// Leaf vectors supplied by the caller (contextual embeddings), one per token.
AnnotatedTree forward_gold_tree(const ModelParams& params, const ParseTree& gold,
                                std::span<const Eigen::VectorXd> leaf_vectors);

struct ParamGradients {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  Eigen::MatrixXd Ws;
  Eigen::VectorXd bs;
  // Keyed by embedding table index; only filled for trainable tables.
  std::map<int, Eigen::VectorXd> embedding;

  static ParamGradients zeros_like(const ModelParams& params);
  void add(const ParamGradients& other);
};

struct LossAndGradients {
  double loss = 0.0;           // summed gold-node cross-entropy
  double negative_loss = 0.0;  // weighted non-constituent term
  int nodes = 0;               // internal nodes contributing to `loss`
  ParamGradients grads;        // of loss + negative_loss

  double objective() const { return loss + negative_loss; }
};

struct GradientOptions {
  // Weight of the non-constituent term: for every adjacent pair of gold
  // subtrees that are not siblings in the gold tree, the cross-entropy
  // between the uniform distribution and the pair's predicted distribution.
  // Zero gives the plain gold-node cross-entropy.
  double negative_weight = 0.0;
  // Overrides embedding lookup (contextual vectors). No embedding gradients
  // are produced when set.
  std::span<const Eigen::VectorXd> leaf_vectors;
};

/// Summed cross-entropy over the gold tree's internal nodes and its exact
/// gradient, by backpropagation through the tree structure.
LossAndGradients gradients(const ModelParams& params, const ParseTree& gold,
                           const GradientOptions& options = {});

// Pairs (left subtree root, right subtree root) of adjacent gold
// constituents that the gold tree never merges.
std::vector<std::pair<int, int>> non_constituent_pairs(const ParseTree& gold);

}  // namespace cate
