#include "cate/treebank.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "cate/error.hpp"

namespace cate {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySentence: return "EmptySentence";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::VocabularyMismatch: return "VocabularyMismatch";
    case ErrorCode::NonBinaryNode: return "NonBinaryNode";
    case ErrorCode::EmptySegment: return "EmptySegment";
    case ErrorCode::InvalidTree: return "InvalidTree";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::UnlabeledNode: return "UnlabeledNode";
    case ErrorCode::EmptyTrainSplit: return "EmptyTrainSplit";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::EmptyValidation: return "EmptyValidation";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::TokenMismatch: return "TokenMismatch";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::UnknownModelVariant: return "UnknownModelVariant";
    case ErrorCode::InvalidCheckpoint: return "InvalidCheckpoint";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// Tokenization

namespace {

bool is_detachable(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
      return true;
    default:
      return false;
  }
}

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

std::vector<Token> tokenize(std::string_view sentence) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && is_space(sentence[i])) ++i;
    std::size_t j = i;
    while (j < sentence.size() && !is_space(sentence[j])) ++j;
    if (j > i) {
      std::string_view chunk = sentence.substr(i, j - i);
      std::size_t lead = 0;
      while (lead < chunk.size() && is_detachable(chunk[lead])) ++lead;
      std::size_t trail = chunk.size();
      while (trail > lead && is_detachable(chunk[trail - 1])) --trail;
      for (std::size_t k = 0; k < lead; ++k) words.emplace_back(1, chunk[k]);
      if (trail > lead) words.emplace_back(chunk.substr(lead, trail - lead));
      for (std::size_t k = trail; k < chunk.size(); ++k)
        words.emplace_back(1, chunk[k]);
    }
    i = j;
  }
  if (words.empty()) throw Error(ErrorCode::EmptySentence, "no tokens in sentence");
  return make_tokens(words);
}

std::vector<Token> make_tokens(const std::vector<std::string>& words) {
  std::vector<Token> tokens;
  tokens.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i)
    tokens.push_back({words[i], static_cast<int>(i)});
  return tokens;
}

// ---------------------------------------------------------------------------
// Vocabulary

LabelVocabulary::LabelVocabulary(std::vector<std::string> names)
    : names_(std::move(names)) {
  if (static_cast<int>(names_.size()) != kNumLabels) {
    throw Error(ErrorCode::VocabularyMismatch,
                "vocabulary must declare exactly " + std::to_string(kNumLabels) +
                    " labels, got " + std::to_string(names_.size()));
  }
  for (std::size_t i = 0; i < names_.size(); ++i) {
    const std::string& n = names_[i];
    if (n.empty() || n == kLeafLabel ||
        std::any_of(n.begin(), n.end(), [](char c) {
          return is_space(c) || c == '(' || c == ')' || c == ',';
        })) {
      throw Error(ErrorCode::VocabularyMismatch, "invalid label name '" + n + "'");
    }
    if (!ids_.emplace(n, static_cast<int>(i)).second)
      throw Error(ErrorCode::VocabularyMismatch, "duplicate label '" + n + "'");
  }
}

const LabelVocabulary& LabelVocabulary::default_vocabulary() {
  // Keep in sync with data/default_labels.txt.
  static const LabelVocabulary vocabulary({
      "Cause1",      "Cause2",      "Cause3",        "Effect1",
      "Effect2",     "Effect3",     "Conjunction",   "Disjunction",
      "Variable",    "Condition",   "Negation",      "Keyword",
      "Sentence",    "IfClause",    "ThenClause",    "CauseGroup",
      "EffectGroup", "VariableGroup", "ConditionGroup", "Modifier",
      "Separator",   "Punctuation", "Action",        "State",
      "Subject",     "Clause",      "Fragment",
  });
  return vocabulary;
}

const std::string& LabelVocabulary::name(int id) const {
  if (id < 0 || id >= size())
    throw Error(ErrorCode::VocabularyMismatch, "label id out of range: " + std::to_string(id));
  return names_[static_cast<std::size_t>(id)];
}

std::optional<int> LabelVocabulary::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

int LabelVocabulary::id(std::string_view name) const {
  if (auto found = find(name)) return *found;
  throw Error(ErrorCode::VocabularyMismatch, "undeclared label '" + std::string(name) + "'");
}

std::string_view to_string(BranchingMode mode) {
  return mode == BranchingMode::Left ? "left" : "right";
}

BranchingMode parse_branching(std::string_view text) {
  if (text == "left") return BranchingMode::Left;
  if (text == "right") return BranchingMode::Right;
  throw Error(ErrorCode::InvalidArgument, "branching must be 'left' or 'right', got '" +
                                              std::string(text) + "'");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "validation") return Split::Validation;
  if (text == "test") return Split::Test;
  throw Error(ErrorCode::InvalidArgument, "unknown split '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// ParseTree

ParseTree ParseTree::leaf(std::string token, int index) {
  if (token.empty() || std::any_of(token.begin(), token.end(), is_space))
    throw Error(ErrorCode::InvalidTree, "leaf token must be non-empty without whitespace");
  ParseTree t;
  Node n;
  n.token = std::move(token);
  n.span = {index, index + 1};
  t.nodes_.push_back(std::move(n));
  return t;
}

ParseTree ParseTree::join(int label, const ParseTree& left, const ParseTree& right) {
  if (label < 0) throw Error(ErrorCode::UnlabeledNode, "internal node without label");
  if (left.span().end != right.span().start) {
    throw Error(ErrorCode::InvalidTree, "children are not adjacent");
  }
  ParseTree t;
  t.nodes_.reserve(left.nodes_.size() + right.nodes_.size() + 1);
  t.nodes_ = left.nodes_;
  const int offset = static_cast<int>(left.nodes_.size());
  for (Node n : right.nodes_) {
    if (!n.is_leaf()) {
      n.left += offset;
      n.right += offset;
    }
    t.nodes_.push_back(std::move(n));
  }
  Node parent;
  parent.left = left.root_index();
  parent.right = static_cast<int>(t.nodes_.size()) - 1;
  parent.label = label;
  parent.span = {left.span().start, right.span().end};
  t.nodes_.push_back(std::move(parent));
  return t;
}

std::vector<std::string> ParseTree::leaf_tokens() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(num_leaves()));
  for (const Node& n : nodes_)
    if (n.is_leaf()) out.push_back(n.token);
  return out;
}

std::vector<Token> ParseTree::tokens() const { return make_tokens(leaf_tokens()); }

std::vector<int> ParseTree::internal_nodes() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!nodes_[i].is_leaf()) out.push_back(static_cast<int>(i));
  return out;
}

ParseTree ParseTree::shifted(int offset) const {
  ParseTree t = *this;
  for (Node& n : t.nodes_) {
    n.span.start += offset;
    n.span.end += offset;
  }
  return t;
}

void ParseTree::validate(int vocabulary_size) const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidTree, why); };
  if (nodes_.empty()) fail("empty tree");
  int leaves = 0;
  int next_leaf = span().start;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.is_leaf()) {
      if (n.right >= 0) fail("leaf with a right child");
      if (n.span != Span{next_leaf, next_leaf + 1}) fail("leaves out of order");
      if (n.token.empty()) fail("empty leaf token");
      ++next_leaf;
      ++leaves;
      continue;
    }
    if (n.right < 0 || n.left >= static_cast<int>(i) || n.right >= static_cast<int>(i))
      fail("node is not binary or not in post-order");
    if (n.label < 0) throw Error(ErrorCode::UnlabeledNode, "internal node without label");
    if (vocabulary_size > 0 && n.label >= vocabulary_size) fail("label out of range");
    const Span& l = node(n.left).span;
    const Span& r = node(n.right).span;
    if (l.end != r.start) fail("children spans are not adjacent");
    if (n.span != Span{l.start, r.end}) fail("span is not the union of its children");
  }
  if (leaves != span().size()) fail("leaf count does not match root span");
  if (static_cast<int>(nodes_.size()) != 2 * leaves - 1) fail("tree is not binary");
}

ParseTree binarize(const std::vector<ParseTree>& segment, int label, BranchingMode mode) {
  if (segment.empty()) throw Error(ErrorCode::EmptySegment, "cannot binarize an empty segment");
  if (mode == BranchingMode::Left) {
    ParseTree acc = segment.front();
    for (std::size_t i = 1; i < segment.size(); ++i) acc = ParseTree::join(label, acc, segment[i]);
    return acc;
  }
  ParseTree acc = segment.back();
  for (std::size_t i = segment.size() - 1; i-- > 0;) acc = ParseTree::join(label, segment[i], acc);
  return acc;
}

// ---------------------------------------------------------------------------
// Treebank

std::vector<ParseTree> Treebank::split(Split which) const {
  std::vector<ParseTree> out;
  for (std::size_t i = 0; i < trees.size(); ++i)
    if (splits[i] == which) out.push_back(trees[i]);
  return out;
}

std::size_t Treebank::count(Split which) const {
  return static_cast<std::size_t>(std::count(splits.begin(), splits.end(), which));
}

namespace {

std::string escape_token(const std::string& token) {
  std::string out;
  for (char c : token) {
    if (c == '(') out += "-LRB-";
    else if (c == ')') out += "-RRB-";
    else out += c;
  }
  return out;
}

std::string unescape_token(std::string_view token) {
  std::string out(token);
  for (auto [from, to] : {std::pair<std::string_view, std::string_view>{"-LRB-", "("},
                          {"-RRB-", ")"}}) {
    for (std::size_t pos = out.find(from); pos != std::string::npos;
         pos = out.find(from, pos + to.size())) {
      out.replace(pos, from.size(), to);
    }
  }
  return out;
}

// N-ary bracketed node as read from text.
struct RawNode {
  std::string label;
  std::string token;  // set on leaves
  std::vector<RawNode> children;
  int column = 0;
};

class TreeReader {
 public:
  TreeReader(std::string_view text, int line) : text_(text), line_(line) {}

  RawNode read() {
    skip_space();
    RawNode node = read_node();
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters after tree");
    return node;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw SyntaxError(line_, static_cast<int>(pos_) + 1, why);
  }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  std::string read_atom() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_]) && text_[pos_] != '(' &&
           text_[pos_] != ')')
      ++pos_;
    if (pos_ == start) fail("expected a symbol");
    return std::string(text_.substr(start, pos_ - start));
  }

  RawNode read_node() {
    if (pos_ >= text_.size() || text_[pos_] != '(') fail("expected '('");
    RawNode node;
    node.column = static_cast<int>(pos_) + 1;
    ++pos_;
    skip_space();
    node.label = read_atom();
    skip_space();
    if (node.label == kLeafLabel) {
      node.token = unescape_token(read_atom());
      skip_space();
    } else {
      while (pos_ < text_.size() && text_[pos_] == '(') {
        node.children.push_back(read_node());
        skip_space();
      }
      if (node.children.empty()) fail("internal node '" + node.label + "' has no subtrees");
    }
    if (pos_ >= text_.size() || text_[pos_] != ')') fail("expected ')'");
    ++pos_;
    return node;
  }

  std::string_view text_;
  int line_;
  std::size_t pos_ = 0;
};

ParseTree build_tree(const RawNode& raw, const LabelVocabulary& vocabulary,
                     const ReadOptions& options, int line, int& next_index) {
  if (raw.label == kLeafLabel) return ParseTree::leaf(raw.token, next_index++);
  auto label = vocabulary.find(raw.label);
  if (!label) {
    throw Error(ErrorCode::VocabularyMismatch,
                "line " + std::to_string(line) + ", column " + std::to_string(raw.column) +
                    ": undeclared label '" + raw.label + "'");
  }
  std::vector<ParseTree> children;
  children.reserve(raw.children.size());
  for (const RawNode& child : raw.children)
    children.push_back(build_tree(child, vocabulary, options, line, next_index));
  if (children.size() == 2) return ParseTree::join(*label, children[0], children[1]);
  if (!options.normalize) {
    throw Error(ErrorCode::NonBinaryNode,
                "line " + std::to_string(line) + ", column " + std::to_string(raw.column) +
                    ": node '" + raw.label + "' has " + std::to_string(children.size()) +
                    " children");
  }
  return binarize(children, *label, *options.normalize);
}

ParseTree parse_tree_line(std::string_view text, const LabelVocabulary& vocabulary,
                          const ReadOptions& options, int line) {
  RawNode raw = TreeReader(text, line).read();
  int next_index = 0;
  ParseTree tree = build_tree(raw, vocabulary, options, line, next_index);
  tree.validate(vocabulary.size());
  return tree;
}

std::vector<std::string> split_labels(std::string_view list) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    std::size_t comma = list.find(',', start);
    if (comma == std::string_view::npos) comma = list.size();
    std::string_view item = list.substr(start, comma - start);
    while (!item.empty() && is_space(item.front())) item.remove_prefix(1);
    while (!item.empty() && is_space(item.back())) item.remove_suffix(1);
    out.emplace_back(item);
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

void append_tree(std::string& out, const ParseTree& tree, int index,
                 const LabelVocabulary& vocabulary) {
  const ParseTree::Node& n = tree.node(index);
  if (n.is_leaf()) {
    out += "(W ";
    out += escape_token(n.token);
    out += ')';
    return;
  }
  out += '(';
  out += vocabulary.name(n.label);
  out += ' ';
  append_tree(out, tree, n.left, vocabulary);
  out += ' ';
  append_tree(out, tree, n.right, vocabulary);
  out += ')';
}

}  // namespace

ParseTree parse_tree(std::string_view text, const LabelVocabulary& vocabulary,
                     const ReadOptions& options) {
  return parse_tree_line(text, vocabulary, options, 1);
}

Treebank parse_treebank(std::istream& in, const ReadOptions& options) {
  std::string line;
  int line_no = 0;
  std::optional<LabelVocabulary> vocabulary;
  Treebank bank;
  Split current = Split::Train;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view text = trim(line);
    if (!vocabulary) {
      constexpr std::string_view kHeader = "#labels:";
      if (line_no != 1 || text.substr(0, kHeader.size()) != kHeader)
        throw SyntaxError(line_no, 1, "first line must be '#labels: name1,...,name27'");
      vocabulary.emplace(split_labels(text.substr(kHeader.size())));
      continue;
    }
    if (text.empty()) continue;
    if (text.front() == '#') {
      constexpr std::string_view kSplit = "#split:";
      if (text.substr(0, kSplit.size()) == kSplit) current = parse_split(trim(text.substr(kSplit.size())));
      continue;
    }
    bank.trees.push_back(parse_tree_line(line, *vocabulary, options, line_no));
    bank.splits.push_back(current);
  }
  if (!vocabulary) throw SyntaxError(1, 1, "missing '#labels:' header");
  bank.vocabulary = std::move(*vocabulary);
  return bank;
}

Treebank parse_treebank_file(const std::filesystem::path& path, const ReadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return parse_treebank(in, options);
}

std::string serialize_tree(const ParseTree& tree, const LabelVocabulary& vocabulary) {
  std::string out;
  append_tree(out, tree, tree.root_index(), vocabulary);
  return out;
}

std::string serialize_treebank(const Treebank& treebank) {
  std::string out = "#labels: ";
  const auto& names = treebank.vocabulary.names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ',';
    out += names[i];
  }
  out += '\n';
  std::optional<Split> current;
  for (std::size_t i = 0; i < treebank.trees.size(); ++i) {
    if (current != treebank.splits[i]) {
      current = treebank.splits[i];
      out += "#split: ";
      out += to_string(*current);
      out += '\n';
    }
    out += serialize_tree(treebank.trees[i], treebank.vocabulary);
    out += '\n';
  }
  return out;
}

void write_treebank_file(const std::filesystem::path& path, const Treebank& treebank) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << serialize_treebank(treebank);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace cate
