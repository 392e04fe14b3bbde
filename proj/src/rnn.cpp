#include "cate/rnn.hpp"

#include <cmath>
#include <random>

#include "cate/error.hpp"

namespace cate {

namespace {

void check_dim(const Eigen::VectorXd& v, int dim, const char* what) {
  if (v.size() != dim) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has length " +
                                                  std::to_string(v.size()) + ", expected " +
                                                  std::to_string(dim));
  }
}

Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double range,
                               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-range, range);
  Eigen::MatrixXd m(rows, cols);
  // Row-major fill order so the draw sequence matches the checkpoint layout.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

}  // namespace

void ModelParams::validate() const {
  const int d = dim();
  auto fail = [](const std::string& why) { throw Error(ErrorCode::DimensionMismatch, why); };
  if (d <= 0) fail("model dim must be positive");
  if (W.rows() != d || W.cols() != 2 * d) fail("W must be d x 2d");
  if (Ws.rows() != kNumLabels || Ws.cols() != d) fail("Ws must be 27 x d");
  if (bs.size() != kNumLabels) fail("bs must have 27 entries");
  if (vocabulary.size() != kNumLabels) fail("vocabulary must have 27 labels");
  if (embedding.dim() != d) fail("embedding dim differs from model dim");
  if (!W.allFinite() || !b.allFinite() || !Ws.allFinite() || !bs.allFinite())
    throw Error(ErrorCode::NonFiniteLoss, "model parameters are not finite");
}

ModelParams init_params(EmbeddingTable embedding, std::uint64_t seed, BranchingMode branching) {
  const int d = embedding.dim();
  std::mt19937_64 rng(seed);
  ModelParams p{
      .W = uniform_matrix(d, 2 * d, 1.0 / std::sqrt(2.0 * d), rng),
      .b = Eigen::VectorXd::Zero(d),
      .Ws = uniform_matrix(kNumLabels, d, 1.0 / std::sqrt(static_cast<double>(d)), rng),
      .bs = Eigen::VectorXd::Zero(kNumLabels),
      .embedding = std::move(embedding),
  };
  p.branching = branching;
  return p;
}

int argmax(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

Eigen::VectorXd compose(const ModelParams& params, const Eigen::VectorXd& left,
                        const Eigen::VectorXd& right) {
  check_dim(left, params.dim(), "left child vector");
  check_dim(right, params.dim(), "right child vector");
  Eigen::VectorXd z = params.W.leftCols(params.dim()) * left +
                      params.W.rightCols(params.dim()) * right + params.b;
  return z.array().tanh();
}

ClassScores classify(const ModelParams& params, const Eigen::VectorXd& hidden) {
  check_dim(hidden, params.dim(), "hidden vector");
  ClassScores s;
  s.logits = params.Ws * hidden + params.bs;
  s.probs = softmax(s.logits);
  s.predicted = argmax(s.logits);
  return s;
}

int AnnotatedTree::num_scores() const {
  int n = 0;
  for (const auto& s : scores) n += s.has_value();
  return n;
}

namespace {

AnnotatedTree forward_impl(const ModelParams& params, const ParseTree& gold,
                           std::span<const Eigen::VectorXd> leaf_vectors) {
  const auto& nodes = gold.nodes();
  if (!leaf_vectors.empty() && static_cast<int>(leaf_vectors.size()) != gold.num_leaves()) {
    throw Error(ErrorCode::DimensionMismatch, "expected one leaf vector per token");
  }
  AnnotatedTree out;
  out.tree = gold;
  out.hidden.resize(nodes.size());
  out.scores.resize(nodes.size());
  int leaf = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.is_leaf()) {
      out.hidden[i] = leaf_vectors.empty() ? params.embedding.lookup(n.token)
                                           : leaf_vectors[static_cast<std::size_t>(leaf)];
      check_dim(out.hidden[i], params.dim(), "leaf vector");
      ++leaf;
      continue;
    }
    out.hidden[i] = compose(params, out.hidden[static_cast<std::size_t>(n.left)],
                            out.hidden[static_cast<std::size_t>(n.right)]);
    out.scores[i] = classify(params, out.hidden[i]);
  }
  return out;
}

}  // namespace

AnnotatedTree forward_gold_tree(const ModelParams& params, const ParseTree& gold) {
  return forward_impl(params, gold, {});
}

AnnotatedTree forward_gold_tree(const ModelParams& params, const ParseTree& gold,
                                std::span<const Eigen::VectorXd> leaf_vectors) {
  return forward_impl(params, gold, leaf_vectors);
}

ParamGradients ParamGradients::zeros_like(const ModelParams& params) {
  return {
      .W = Eigen::MatrixXd::Zero(params.W.rows(), params.W.cols()),
      .b = Eigen::VectorXd::Zero(params.b.size()),
      .Ws = Eigen::MatrixXd::Zero(params.Ws.rows(), params.Ws.cols()),
      .bs = Eigen::VectorXd::Zero(params.bs.size()),
      .embedding = {},
  };
}

void ParamGradients::add(const ParamGradients& other) {
  W += other.W;
  b += other.b;
  Ws += other.Ws;
  bs += other.bs;
  for (const auto& [index, g] : other.embedding) {
    auto [it, inserted] = embedding.try_emplace(index, g);
    if (!inserted) it->second += g;
  }
}

std::vector<std::pair<int, int>> non_constituent_pairs(const ParseTree& gold) {
  const auto& nodes = gold.nodes();
  const Span whole = gold.span();
  std::vector<std::vector<int>> ending(static_cast<std::size_t>(whole.size() + 1));
  std::vector<std::vector<int>> starting(static_cast<std::size_t>(whole.size() + 1));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    ending[static_cast<std::size_t>(nodes[i].span.end - whole.start)].push_back(static_cast<int>(i));
    starting[static_cast<std::size_t>(nodes[i].span.start - whole.start)].push_back(static_cast<int>(i));
  }
  std::vector<std::pair<int, int>> pairs;
  for (int k = 1; k < whole.size(); ++k) {
    for (int a : ending[static_cast<std::size_t>(k)]) {
      for (int b : starting[static_cast<std::size_t>(k)]) {
        bool siblings = false;
        for (const auto& n : nodes) {
          if (n.left == a && n.right == b) {
            siblings = true;
            break;
          }
        }
        if (!siblings) pairs.emplace_back(a, b);
      }
    }
  }
  return pairs;
}

LossAndGradients gradients(const ModelParams& params, const ParseTree& gold,
                           const GradientOptions& options) {
  const int d = params.dim();
  const auto& nodes = gold.nodes();
  for (const auto& n : nodes)
    if (!n.is_leaf() && (n.label < 0 || n.label >= kNumLabels))
      throw Error(ErrorCode::UnlabeledNode, "gold tree has an unlabeled internal node");

  const AnnotatedTree fwd = forward_impl(params, gold, options.leaf_vectors);
  LossAndGradients out;
  out.grads = ParamGradients::zeros_like(params);
  ParamGradients& g = out.grads;
  std::vector<Eigen::VectorXd> dh(nodes.size(), Eigen::VectorXd::Zero(d));

  // Classifier error at every gold merge.
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    const ClassScores& s = *fwd.scores[i];
    out.loss -= std::log(s.probs[nodes[i].label]);
    ++out.nodes;
    Eigen::VectorXd dlogits = s.probs;
    dlogits[nodes[i].label] -= 1.0;
    g.Ws.noalias() += dlogits * fwd.hidden[i].transpose();
    g.bs += dlogits;
    dh[i].noalias() += params.Ws.transpose() * dlogits;
  }

  // Non-constituent merges pushed toward the uniform distribution. Their
  // children are gold subtrees, so the error flows into those subtrees'
  // hidden vectors and is carried down by the pass below.
  if (options.negative_weight > 0.0) {
    const double lambda = options.negative_weight;
    for (auto [a, b] : non_constituent_pairs(gold)) {
      const auto& ha = fwd.hidden[static_cast<std::size_t>(a)];
      const auto& hb = fwd.hidden[static_cast<std::size_t>(b)];
      const Eigen::VectorXd h = compose(params, ha, hb);
      const ClassScores s = classify(params, h);
      const double lse = s.logits.maxCoeff() +
                         std::log((s.logits.array() - s.logits.maxCoeff()).exp().sum());
      out.negative_loss += lambda * (lse - s.logits.mean());
      const Eigen::VectorXd dlogits =
          lambda * (s.probs.array() - 1.0 / kNumLabels).matrix();
      g.Ws.noalias() += dlogits * h.transpose();
      g.bs += dlogits;
      const Eigen::VectorXd dz =
          (params.Ws.transpose() * dlogits).array() * (1.0 - h.array().square());
      g.W.leftCols(d).noalias() += dz * ha.transpose();
      g.W.rightCols(d).noalias() += dz * hb.transpose();
      g.b += dz;
      dh[static_cast<std::size_t>(a)].noalias() += params.W.leftCols(d).transpose() * dz;
      dh[static_cast<std::size_t>(b)].noalias() += params.W.rightCols(d).transpose() * dz;
    }
  }

  // Top-down through the tree: parents sit after their children in the
  // post-order array, so a reverse sweep sees each node's full gradient.
  for (std::size_t i = nodes.size(); i-- > 0;) {
    const auto& n = nodes[i];
    if (n.is_leaf()) continue;
    const auto l = static_cast<std::size_t>(n.left);
    const auto r = static_cast<std::size_t>(n.right);
    const Eigen::VectorXd dz = dh[i].array() * (1.0 - fwd.hidden[i].array().square());
    g.W.leftCols(d).noalias() += dz * fwd.hidden[l].transpose();
    g.W.rightCols(d).noalias() += dz * fwd.hidden[r].transpose();
    g.b += dz;
    dh[l].noalias() += params.W.leftCols(d).transpose() * dz;
    dh[r].noalias() += params.W.rightCols(d).transpose() * dz;
  }

  if (options.leaf_vectors.empty() && params.embedding.trainable()) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i].is_leaf()) continue;
      if (auto index = params.embedding.find(nodes[i].token)) {
        auto [it, inserted] = g.embedding.try_emplace(*index, dh[i]);
        if (!inserted) it->second += dh[i];
      }
    }
  }
  return out;
}

}  // namespace cate
