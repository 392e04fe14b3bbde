#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "cate/treebank.hpp"

namespace cate {

enum class EmbeddingMode { PretrainedFrozen, PretrainedFineTuned, RandomTrainable };

std::string_view to_string(EmbeddingMode mode);
EmbeddingMode parse_embedding_mode(std::string_view text);

// Token -> vector table with an unknown-word fallback.
//
// Lookups try the exact string, then its lowercase form, then fall back to
// unk. Only RandomTrainable tables grow, and only through allocate(), which
// the training loop calls on first sight of a token. Inference never
// allocates.
class EmbeddingTable {
 public:
  EmbeddingTable(int dim, EmbeddingMode mode, std::uint64_t seed = 0);

  int dim() const { return dim_; }
  EmbeddingMode mode() const { return mode_; }
  bool trainable() const { return mode_ != EmbeddingMode::PretrainedFrozen; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return vectors_.size(); }

  // Index of the entry a token resolves to, or nullopt for unk.
  std::optional<int> find(std::string_view token) const;
  const Eigen::VectorXd& lookup(std::string_view token) const;
  const Eigen::VectorXd& lookup(const Token& token) const { return lookup(token.text); }

  // RandomTrainable: returns the token's entry, creating it with a fresh
  // random vector if needed. Other modes behave like find().
  std::optional<int> allocate(std::string_view token);

  // Inserts (or keeps the first of) a word. Returns its index.
  int add(std::string word, Eigen::VectorXd vector);

  const std::string& word(int index) const { return words_[static_cast<std::size_t>(index)]; }
  const Eigen::VectorXd& vector(int index) const { return vectors_[static_cast<std::size_t>(index)]; }
  Eigen::VectorXd& vector(int index) { return vectors_[static_cast<std::size_t>(index)]; }

  const Eigen::VectorXd& unk() const { return unk_; }
  void set_unk(Eigen::VectorXd unk);

  // Bound r of the uniform [-r, r] initialization, 1/sqrt(dim).
  double init_range() const;

  bool operator==(const EmbeddingTable& other) const;

 private:
  Eigen::VectorXd random_vector();

  int dim_;
  EmbeddingMode mode_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::vector<std::string> words_;
  std::vector<Eigen::VectorXd> vectors_;
  std::unordered_map<std::string, int> index_;
  Eigen::VectorXd unk_;
};

/// Empty trainable table whose entries are drawn uniformly from
/// [-1/sqrt(dim), 1/sqrt(dim)] as tokens are first seen.
EmbeddingTable init_random_table(int dim, std::uint64_t seed);

struct LoadOptions {
  std::optional<std::size_t> limit;
  EmbeddingMode mode = EmbeddingMode::PretrainedFrozen;
};

/// Reads `word v1 ... vd` lines (GloVe style) with an optional `count dim`
/// header line (fastText style). unk is the mean of the loaded vectors.
EmbeddingTable load_pretrained(const std::filesystem::path& path, const LoadOptions& options = {});
EmbeddingTable load_pretrained(std::istream& in, const LoadOptions& options = {});

// Precomputed per-token vectors for one sentence, e.g. from a transformer.
struct ContextualSentenceVectors {
  std::vector<Token> tokens;
  std::vector<Eigen::VectorXd> vectors;

  int dim() const { return vectors.empty() ? 0 : static_cast<int>(vectors.front().size()); }
};

ContextualSentenceVectors contextual_from_json(const nlohmann::json& j);
nlohmann::json contextual_to_json(const ContextualSentenceVectors& c);
// A file holding one JSON object, a JSON array of objects, or one object
// per line.
std::vector<ContextualSentenceVectors> load_contextual_file(const std::filesystem::path& path);

}  // namespace cate
