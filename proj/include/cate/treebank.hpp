#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cate {

// Size of the segment label space. Checkpoints, classifier outputs and
// vocabularies are all held to this.
inline constexpr int kNumLabels = 27;

// Pseudo-label carried by leaves in the bracketed format.
inline constexpr std::string_view kLeafLabel = "W";

struct Token {
  std::string text;
  int index = 0;

  bool operator==(const Token&) const = default;
};

/// Splits on whitespace and detaches leading/trailing `.,;:!?` characters as
/// tokens of their own. Throws EmptySentence when nothing remains.
std::vector<Token> tokenize(std::string_view sentence);

std::vector<Token> make_tokens(const std::vector<std::string>& words);

struct SegmentLabel {
  std::string name;
  int id = 0;

  bool operator==(const SegmentLabel&) const = default;
};

// Bijection between the 27 segment names and ids 0..26.
class LabelVocabulary {
 public:
  explicit LabelVocabulary(std::vector<std::string> names);

  static const LabelVocabulary& default_vocabulary();

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int id) const;
  SegmentLabel label(int id) const { return {name(id), id}; }
  std::optional<int> find(std::string_view name) const;
  int id(std::string_view name) const;  // throws VocabularyMismatch
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const LabelVocabulary& other) const {
    return names_ == other.names_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> ids_;
};

// Half-open token interval [start, end).
struct Span {
  int start = 0;
  int end = 0;

  int size() const { return end - start; }
  auto operator<=>(const Span&) const = default;
};

enum class BranchingMode { Left, Right };

std::string_view to_string(BranchingMode mode);
BranchingMode parse_branching(std::string_view text);

// Labeled binary tree over a token sequence. Nodes live in a flat array in
// post-order (children before parents, root last); two structurally equal
// trees therefore have identical node arrays.
class ParseTree {
 public:
  struct Node {
    int left = -1;
    int right = -1;
    int label = -1;  // -1 on leaves
    std::string token;
    Span span;

    bool is_leaf() const { return left < 0; }
    bool operator==(const Node&) const = default;
  };

  static ParseTree leaf(std::string token, int index);
  static ParseTree join(int label, const ParseTree& left,
                        const ParseTree& right);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  int root_index() const { return static_cast<int>(nodes_.size()) - 1; }
  const Node& root() const { return nodes_.back(); }
  Span span() const { return root().span; }

  int num_leaves() const { return span().size(); }
  int num_internal() const { return num_leaves() - 1; }
  bool is_leaf() const { return nodes_.size() == 1; }

  std::vector<std::string> leaf_tokens() const;
  std::vector<Token> tokens() const;
  // Indices of internal nodes, bottom-up.
  std::vector<int> internal_nodes() const;

  // Same tree with every span moved by `offset` tokens.
  ParseTree shifted(int offset) const;

  // Checks binary shape, adjacency of sibling spans and leaf numbering;
  // throws InvalidTree. `vocabulary_size` > 0 also range-checks labels.
  void validate(int vocabulary_size = 0) const;

  std::optional<double> score;

  // Structure, labels and tokens; the inference score is not compared.
  bool operator==(const ParseTree& other) const {
    return nodes_ == other.nodes_;
  }

 private:
  std::vector<Node> nodes_;
};

/// Folds a flat segment of adjacent subtrees into one binary tree. Left mode
/// nests (((a b) c) d), right mode (a (b (c d))); every introduced node gets
/// `label`. A single element is returned unchanged.
ParseTree binarize(const std::vector<ParseTree>& segment, int label,
                   BranchingMode mode);

enum class Split { Train, Validation, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct Treebank {
  LabelVocabulary vocabulary = LabelVocabulary::default_vocabulary();
  std::vector<ParseTree> trees;
  std::vector<Split> splits;  // parallel to trees

  std::vector<ParseTree> split(Split which) const;
  std::size_t count(Split which) const;

  bool operator==(const Treebank&) const = default;
};

struct ReadOptions {
  // When set, n-ary nodes are binarized in this mode and unary nodes are
  // collapsed. Otherwise any non-binary node is an error.
  std::optional<BranchingMode> normalize;
};

ParseTree parse_tree(std::string_view text, const LabelVocabulary& vocabulary,
                     const ReadOptions& options = {});
Treebank parse_treebank(std::istream& in, const ReadOptions& options = {});
Treebank parse_treebank_file(const std::filesystem::path& path,
                             const ReadOptions& options = {});

std::string serialize_tree(const ParseTree& tree,
                           const LabelVocabulary& vocabulary);
std::string serialize_treebank(const Treebank& treebank);
void write_treebank_file(const std::filesystem::path& path,
                         const Treebank& treebank);

// Deterministic corpus of "If <causes>, then <effects>." requirements, gold
// labeled with the default vocabulary. Splits are 80/10/10 in file order.
Treebank generate_synthetic_corpus(std::uint64_t seed, int n,
                                   BranchingMode mode);

}  // namespace cate
