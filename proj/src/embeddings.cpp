#include "cate/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cate/error.hpp"

namespace cate {

std::string_view to_string(EmbeddingMode mode) {
  switch (mode) {
    case EmbeddingMode::PretrainedFrozen: return "pretrained_frozen";
    case EmbeddingMode::PretrainedFineTuned: return "pretrained_finetuned";
    case EmbeddingMode::RandomTrainable: return "random_trainable";
  }
  return "pretrained_frozen";
}

EmbeddingMode parse_embedding_mode(std::string_view text) {
  if (text == "pretrained_frozen" || text == "frozen") return EmbeddingMode::PretrainedFrozen;
  if (text == "pretrained_finetuned" || text == "finetuned") return EmbeddingMode::PretrainedFineTuned;
  if (text == "random_trainable" || text == "random") return EmbeddingMode::RandomTrainable;
  throw Error(ErrorCode::InvalidArgument, "unknown embedding mode '" + std::string(text) + "'");
}

EmbeddingTable::EmbeddingTable(int dim, EmbeddingMode mode, std::uint64_t seed)
    : dim_(dim), mode_(mode), seed_(seed), rng_(seed) {
  if (dim <= 0) throw Error(ErrorCode::DimensionMismatch, "embedding dim must be positive");
  unk_ = Eigen::VectorXd::Zero(dim);
}

EmbeddingTable init_random_table(int dim, std::uint64_t seed) {
  return EmbeddingTable(dim, EmbeddingMode::RandomTrainable, seed);
}

double EmbeddingTable::init_range() const { return 1.0 / std::sqrt(static_cast<double>(dim_)); }

Eigen::VectorXd EmbeddingTable::random_vector() {
  const double r = init_range();
  std::uniform_real_distribution<double> dist(-r, r);
  Eigen::VectorXd v(dim_);
  for (int i = 0; i < dim_; ++i) v[i] = dist(rng_);
  return v;
}

std::optional<int> EmbeddingTable::find(std::string_view token) const {
  if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
  std::string lower(token);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (auto it = index_.find(lower); it != index_.end()) return it->second;
  return std::nullopt;
}

const Eigen::VectorXd& EmbeddingTable::lookup(std::string_view token) const {
  if (auto i = find(token)) return vector(*i);
  return unk_;
}

std::optional<int> EmbeddingTable::allocate(std::string_view token) {
  if (auto i = find(token)) return i;
  if (mode_ != EmbeddingMode::RandomTrainable) return std::nullopt;
  return add(std::string(token), random_vector());
}

int EmbeddingTable::add(std::string word, Eigen::VectorXd vector) {
  if (vector.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "vector for '" + word + "' has dim " +
                                                  std::to_string(vector.size()) + ", expected " +
                                                  std::to_string(dim_));
  }
  auto [it, inserted] = index_.emplace(word, static_cast<int>(words_.size()));
  if (!inserted) return it->second;
  words_.push_back(std::move(word));
  vectors_.push_back(std::move(vector));
  return it->second;
}

void EmbeddingTable::set_unk(Eigen::VectorXd unk) {
  if (unk.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "unk vector has wrong dim");
  unk_ = std::move(unk);
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
  return dim_ == other.dim_ && mode_ == other.mode_ && words_ == other.words_ &&
         vectors_ == other.vectors_ && unk_ == other.unk_;
}

// ---------------------------------------------------------------------------
// Static vector files

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool is_header(const std::vector<std::string_view>& fields) {
  long long count = 0, dim = 0;
  return fields.size() == 2 && parse_number(fields[0], count) && parse_number(fields[1], dim);
}

}  // namespace

EmbeddingTable load_pretrained(std::istream& in, const LoadOptions& options) {
  std::optional<EmbeddingTable> table;
  Eigen::VectorXd sum;
  std::string line;
  int line_no = 0;
  auto malformed = [&](const std::string& why) {
    return Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (line_no == 1 && is_header(fields)) continue;
    if (options.limit && table && table->size() >= *options.limit) break;
    if (fields.size() < 2) throw malformed("expected a word followed by its vector");
    const int dim = static_cast<int>(fields.size()) - 1;
    if (!table) {
      table.emplace(dim, options.mode);
      sum = Eigen::VectorXd::Zero(dim);
    } else if (dim != table->dim()) {
      throw Error(ErrorCode::DimensionMismatch, "line " + std::to_string(line_no) + ": expected " +
                                                    std::to_string(table->dim()) +
                                                    " components, found " + std::to_string(dim));
    }
    Eigen::VectorXd v(dim);
    for (int k = 0; k < dim; ++k) {
      if (!parse_number(fields[static_cast<std::size_t>(k) + 1], v[k]) || !std::isfinite(v[k]))
        throw malformed("bad number '" + std::string(fields[static_cast<std::size_t>(k) + 1]) + "'");
    }
    const std::size_t before = table->size();
    table->add(std::string(fields[0]), v);
    if (table->size() > before) sum += v;
  }
  if (!table || table->size() == 0) throw Error(ErrorCode::EmptyFile, "no vectors found");
  table->set_unk(sum / static_cast<double>(table->size()));
  return std::move(*table);
}

EmbeddingTable load_pretrained(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return load_pretrained(in, options);
}

// ---------------------------------------------------------------------------
// Contextual vectors

ContextualSentenceVectors contextual_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("tokens") || !j.contains("vectors"))
    throw Error(ErrorCode::MalformedLine, "contextual vectors need 'tokens' and 'vectors'");
  ContextualSentenceVectors out;
  out.tokens = make_tokens(j.at("tokens").get<std::vector<std::string>>());
  for (const auto& row : j.at("vectors")) {
    auto values = row.get<std::vector<double>>();
    out.vectors.push_back(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                            static_cast<Eigen::Index>(values.size())));
  }
  if (out.tokens.size() != out.vectors.size())
    throw Error(ErrorCode::DimensionMismatch, "tokens and vectors differ in length");
  if (out.tokens.empty()) throw Error(ErrorCode::EmptySentence, "contextual sentence has no tokens");
  for (const auto& v : out.vectors) {
    if (v.size() != out.vectors.front().size() || v.size() == 0)
      throw Error(ErrorCode::DimensionMismatch, "contextual vectors must share one positive dim");
  }
  return out;
}

nlohmann::json contextual_to_json(const ContextualSentenceVectors& c) {
  nlohmann::json j;
  auto& tokens = j["tokens"] = nlohmann::json::array();
  for (const auto& t : c.tokens) tokens.push_back(t.text);
  auto& vectors = j["vectors"] = nlohmann::json::array();
  for (const auto& v : c.vectors) vectors.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  return j;
}

std::vector<ContextualSentenceVectors> load_contextual_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  std::vector<ContextualSentenceVectors> out;
  auto whole = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (whole.is_object()) {
    out.push_back(contextual_from_json(whole));
  } else if (whole.is_array()) {
    for (const auto& item : whole) out.push_back(contextual_from_json(item));
  } else {
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded())
        throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": invalid JSON");
      out.push_back(contextual_from_json(j));
    }
  }
  if (out.empty()) throw Error(ErrorCode::EmptyFile, "no contextual vectors in " + path.string());
  return out;
}

}  // namespace cate
