#include "cate/inference.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "cate/error.hpp"

namespace cate {

void ParseConfig::validate() const {
  if (beam_width < 1) throw Error(ErrorCode::InvalidArgument, "beam_width must be at least 1");
}

MergeScore score_merge(const ModelParams& params, double temperature,
                       const Eigen::VectorXd& left_hidden, const Eigen::VectorXd& right_hidden) {
  MergeScore out;
  out.hidden = compose(params, left_hidden, right_hidden);
  out.scores.logits = params.Ws * out.hidden + params.bs;
  out.scores.probs = calibrated_softmax(out.scores.logits, temperature);
  out.scores.predicted = argmax(out.scores.logits);
  out.logprob = log_max_prob(out.scores.logits, temperature);
  return out;
}

double effective_temperature(const std::optional<CalibrationParams>& calibration,
                             bool use_temperature) {
  return use_temperature && calibration ? calibration->temperature : 1.0;
}

MergeScore score_merge(const ModelParams& params, const std::optional<CalibrationParams>& calibration,
                       const Eigen::VectorXd& left_hidden, const Eigen::VectorXd& right_hidden,
                       bool use_temperature) {
  return score_merge(params, effective_temperature(calibration, use_temperature), left_hidden,
                     right_hidden);
}

namespace {

// Nodes shared by every partial forest of one parse.
class Arena {
 public:
  struct Node {
    int left = -1;
    int right = -1;
    int label = -1;
    std::string token;
    Span span;
    Eigen::VectorXd hidden;
    std::optional<ClassScores> scores;
    double logprob = 0.0;   // of the merge that created this node
    std::string signature;  // bracketing of the subtree
  };

  Arena(const ModelParams& params, double temperature) : params_(params), temperature_(temperature) {}

  int add_leaf(const Token& token, const Eigen::VectorXd& vector, int position) {
    Node n;
    n.token = token.text;
    n.span = {position, position + 1};
    n.hidden = vector;
    n.signature = std::to_string(position);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int merge(int left, int right) {
    MergeScore ms = score_merge(params_, temperature_, at(left).hidden, at(right).hidden);
    Node n;
    n.left = left;
    n.right = right;
    n.label = ms.scores.predicted;
    n.span = {at(left).span.start, at(right).span.end};
    n.hidden = std::move(ms.hidden);
    n.scores = std::move(ms.scores);
    n.logprob = ms.logprob;
    n.signature = "(" + at(left).signature + " " + at(right).signature + ")";
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Node& at(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  AnnotatedTree extract(int root, double cum_logprob) const {
    AnnotatedTree out;
    out.tree = build(root, out);
    out.cum_logprob = cum_logprob;
    out.tree.score = cum_logprob;
    return out;
  }

 private:
  // Post-order, matching the node layout ParseTree::join produces.
  ParseTree build(int id, AnnotatedTree& out) const {
    const Node& n = at(id);
    if (n.left < 0) {
      out.hidden.push_back(n.hidden);
      out.scores.emplace_back();
      return ParseTree::leaf(n.token, n.span.start);
    }
    ParseTree left = build(n.left, out);
    ParseTree right = build(n.right, out);
    out.hidden.push_back(n.hidden);
    out.scores.push_back(n.scores);
    return ParseTree::join(n.label, left, right);
  }

  const ModelParams& params_;
  double temperature_;
  std::vector<Node> nodes_;
};

std::vector<int> add_leaves(Arena& arena, const ModelParams& params, std::span<const Token> tokens,
                            std::span<const Eigen::VectorXd> leaf_vectors) {
  if (tokens.empty()) throw Error(ErrorCode::EmptySentence, "nothing to parse");
  if (!leaf_vectors.empty() && leaf_vectors.size() != tokens.size())
    throw Error(ErrorCode::DimensionMismatch, "expected one leaf vector per token");
  std::vector<int> forest;
  forest.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Eigen::VectorXd& v = leaf_vectors.empty() ? params.embedding.lookup(tokens[i]) : leaf_vectors[i];
    if (v.size() != params.dim())
      throw Error(ErrorCode::DimensionMismatch, "leaf vector dim differs from model dim");
    forest.push_back(arena.add_leaf(tokens[i], v, static_cast<int>(i)));
  }
  return forest;
}

}  // namespace

AnnotatedTree parse_greedy(const ModelParams& params,
                           const std::optional<CalibrationParams>& calibration,
                           std::span<const Token> tokens,
                           std::span<const Eigen::VectorXd> leaf_vectors,
                           const ParseConfig& config, ParseTrace* trace) {
  config.validate();
  Arena arena(params, effective_temperature(calibration, config.use_temperature));
  std::vector<int> forest = add_leaves(arena, params, tokens, leaf_vectors);
  double cum_logprob = 0.0;
  while (forest.size() > 1) {
    int best = -1;
    int best_pos = 0;
    for (std::size_t i = 0; i + 1 < forest.size(); ++i) {
      const int candidate = arena.merge(forest[i], forest[i + 1]);
      if (best < 0 || arena.at(candidate).logprob > arena.at(best).logprob) {
        best = candidate;
        best_pos = static_cast<int>(i);
      }
    }
    if (trace) {
      trace->pairs_scored.push_back(static_cast<int>(forest.size()) - 1);
      ++trace->merges;
    }
    cum_logprob += arena.at(best).logprob;
    forest[static_cast<std::size_t>(best_pos)] = best;
    forest.erase(forest.begin() + best_pos + 1);
  }
  return arena.extract(forest.front(), cum_logprob);
}

AnnotatedTree parse_greedy(const ModelParams& params,
                           const std::optional<CalibrationParams>& calibration,
                           std::span<const Token> tokens, const ParseConfig& config,
                           ParseTrace* trace) {
  return parse_greedy(params, calibration, tokens, {}, config, trace);
}

AnnotatedTree parse_beam(const ModelParams& params,
                         const std::optional<CalibrationParams>& calibration,
                         std::span<const Token> tokens,
                         std::span<const Eigen::VectorXd> leaf_vectors,
                         const ParseConfig& config, ParseTrace* trace) {
  config.validate();
  Arena arena(params, effective_temperature(calibration, config.use_temperature));

  struct State {
    std::vector<int> forest;
    double cum_logprob = 0.0;
  };
  std::vector<State> beam{{add_leaves(arena, params, tokens, leaf_vectors), 0.0}};
  // Arena nodes are reused when two forests share an adjacent pair.
  std::map<std::pair<int, int>, int> merged;

  const std::size_t stages = tokens.size() - 1;
  const auto width = static_cast<std::size_t>(config.beam_width);
  for (std::size_t stage = 0; stage < stages; ++stage) {
    std::vector<State> candidates;
    std::unordered_map<std::string, std::size_t> seen;
    int scored = 0;
    for (const State& state : beam) {
      for (std::size_t i = 0; i + 1 < state.forest.size(); ++i) {
        const auto key = std::make_pair(state.forest[i], state.forest[i + 1]);
        auto it = merged.find(key);
        if (it == merged.end()) it = merged.emplace(key, arena.merge(key.first, key.second)).first;
        ++scored;

        State next;
        next.forest.reserve(state.forest.size() - 1);
        next.forest.insert(next.forest.end(), state.forest.begin(), state.forest.begin() + static_cast<long>(i));
        next.forest.push_back(it->second);
        next.forest.insert(next.forest.end(), state.forest.begin() + static_cast<long>(i) + 2,
                           state.forest.end());
        next.cum_logprob = state.cum_logprob + arena.at(it->second).logprob;

        std::string signature;
        for (int id : next.forest) {
          signature += arena.at(id).signature;
          signature += '|';
        }
        auto [pos, inserted] = seen.emplace(std::move(signature), candidates.size());
        if (inserted) {
          candidates.push_back(std::move(next));
        } else if (next.cum_logprob > candidates[pos->second].cum_logprob) {
          candidates[pos->second] = std::move(next);
        }
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const State& a, const State& b) { return a.cum_logprob > b.cum_logprob; });
    if (candidates.size() > width) candidates.resize(width);
    beam = std::move(candidates);
    if (trace) {
      trace->pairs_scored.push_back(scored);
      ++trace->merges;
    }
  }
  return arena.extract(beam.front().forest.front(), beam.front().cum_logprob);
}

AnnotatedTree parse_beam(const ModelParams& params,
                         const std::optional<CalibrationParams>& calibration,
                         std::span<const Token> tokens, const ParseConfig& config,
                         ParseTrace* trace) {
  return parse_beam(params, calibration, tokens, {}, config, trace);
}

AnnotatedTree parse(const ModelParams& params, const std::optional<CalibrationParams>& calibration,
                    std::span<const Token> tokens, std::span<const Eigen::VectorXd> leaf_vectors,
                    const ParseConfig& config) {
  if (config.beam_width == 1) return parse_greedy(params, calibration, tokens, leaf_vectors, config);
  return parse_beam(params, calibration, tokens, leaf_vectors, config);
}

AnnotatedTree parse(const ModelParams& params, const std::optional<CalibrationParams>& calibration,
                    std::span<const Token> tokens, const ParseConfig& config) {
  return parse(params, calibration, tokens, {}, config);
}

namespace {

nlohmann::json node_to_json(const AnnotatedTree& t, int index, const LabelVocabulary& vocabulary) {
  const ParseTree::Node& n = t.tree.node(index);
  nlohmann::json j;
  if (n.is_leaf()) {
    j["token"] = n.token;
    j["span"] = {n.span.start, n.span.end};
    return j;
  }
  j["label"] = vocabulary.name(n.label);
  j["span"] = {n.span.start, n.span.end};
  const auto& scores = t.scores[static_cast<std::size_t>(index)];
  j["prob"] = scores ? scores->probs[scores->predicted] : 0.0;
  j["children"] = {node_to_json(t, n.left, vocabulary), node_to_json(t, n.right, vocabulary)};
  return j;
}

void render_node(const AnnotatedTree& t, int index, const LabelVocabulary& vocabulary, int depth,
                 std::string& out) {
  const ParseTree::Node& n = t.tree.node(index);
  out.append(static_cast<std::size_t>(depth) * 2, ' ');
  if (n.is_leaf()) {
    out += n.token;
    out += '\n';
    return;
  }
  char buffer[64];
  const auto& scores = t.scores[static_cast<std::size_t>(index)];
  std::snprintf(buffer, sizeof buffer, " [%d,%d) p=%.4f", n.span.start, n.span.end,
                scores ? scores->probs[scores->predicted] : 0.0);
  out += vocabulary.name(n.label);
  out += buffer;
  out += '\n';
  render_node(t, n.left, vocabulary, depth + 1, out);
  render_node(t, n.right, vocabulary, depth + 1, out);
}

}  // namespace

nlohmann::json tree_to_json(const AnnotatedTree& tree, const LabelVocabulary& vocabulary) {
  return node_to_json(tree, tree.tree.root_index(), vocabulary);
}

std::string render_ascii(const AnnotatedTree& tree, const LabelVocabulary& vocabulary) {
  std::string out;
  render_node(tree, tree.tree.root_index(), vocabulary, 0, out);
  return out;
}

}  // namespace cate
