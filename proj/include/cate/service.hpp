#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "cate/checkpoint.hpp"
#include "cate/inference.hpp"

namespace httplib {
class Server;
}

namespace cate {

struct ModelVariant {
  std::string id;  // "<branching>-<embedding_variant>"
  std::filesystem::path source;
  Checkpoint checkpoint;
};

std::string variant_id(BranchingMode branching, const std::string& embedding_variant);

// Read-only after construction; safe to share between request threads.
class ModelRegistry {
 public:
  void add(ModelVariant variant);
  // Loads every *.json checkpoint in `dir` (sorted by file name). Two
  // checkpoints with the same (branching, embedding_variant) are an error.
  static ModelRegistry load_directory(const std::filesystem::path& dir);

  const ModelVariant* find(BranchingMode branching, const std::string& embedding_variant) const;
  const std::map<std::string, ModelVariant>& variants() const { return variants_; }
  bool empty() const { return variants_.empty(); }

 private:
  std::map<std::string, ModelVariant> variants_;
};

struct ParseRequest {
  std::string sentence;
  int beam_width = 1;
  bool use_temperature = false;
  BranchingMode branching = BranchingMode::Left;
  std::string embedding_variant = "random";
  // Precomputed per-token vectors for models trained on contextual leaves.
  std::vector<Eigen::VectorXd> vectors;

  static ParseRequest from_json(const nlohmann::json& j);  // throws InvalidArgument
  nlohmann::json to_json() const;
};

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

// The HTTP surface as plain functions of request bodies, so it can be
// exercised without sockets.
class ParseService {
 public:
  explicit ParseService(std::shared_ptr<const ModelRegistry> registry);

  HttpReply parse(const std::string& body) const;    // POST /api/parse
  HttpReply models() const;                          // GET /api/models
  HttpReply health() const;                          // GET /api/health

 private:
  std::shared_ptr<const ModelRegistry> registry_;
};

// Shared by the HTTP handler and `cate parse --json`.
struct ParseOutcome {
  AnnotatedTree tree;
  nlohmann::json tree_json;
};
ParseOutcome run_parse(const Checkpoint& checkpoint, const std::vector<Token>& tokens,
                       std::span<const Eigen::VectorXd> leaf_vectors, const ParseConfig& config);

// Registers the API routes and CORS handling on `server`.
void mount(httplib::Server& server, const ParseService& service,
           const std::string& allowed_origin = "*");

}  // namespace cate
