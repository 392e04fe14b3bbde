#include "cate/service.hpp"

#include <algorithm>
#include <chrono>

#include "httplib.h"

#include "cate/error.hpp"

namespace cate {

std::string variant_id(BranchingMode branching, const std::string& embedding_variant) {
  return std::string(to_string(branching)) + "-" + embedding_variant;
}

void ModelRegistry::add(ModelVariant variant) {
  const ModelParams& p = variant.checkpoint.params;
  variant.id = variant_id(p.branching, p.embedding_variant);
  const std::string id = variant.id;
  if (!variants_.emplace(id, std::move(variant)).second)
    throw Error(ErrorCode::InvalidArgument, "two checkpoints provide model variant '" + id + "'");
}

ModelRegistry ModelRegistry::load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorCode::IoError, "model directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  ModelRegistry registry;
  for (const auto& file : files) registry.add({"", file, load_checkpoint(file)});
  if (registry.empty()) throw Error(ErrorCode::IoError, "no checkpoints in " + dir.string());
  return registry;
}

const ModelVariant* ModelRegistry::find(BranchingMode branching,
                                        const std::string& embedding_variant) const {
  auto it = variants_.find(variant_id(branching, embedding_variant));
  return it == variants_.end() ? nullptr : &it->second;
}

ParseRequest ParseRequest::from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& why) { return Error(ErrorCode::InvalidArgument, why); };
  if (!j.is_object()) throw bad("request body must be a JSON object");
  ParseRequest r;
  if (!j.contains("sentence") || !j["sentence"].is_string()) throw bad("'sentence' must be a string");
  r.sentence = j["sentence"].get<std::string>();
  if (j.contains("beam_width")) {
    if (!j["beam_width"].is_number_integer()) throw bad("'beam_width' must be an integer");
    r.beam_width = j["beam_width"].get<int>();
    if (r.beam_width < 1) throw bad("'beam_width' must be at least 1");
  }
  if (j.contains("use_temperature")) {
    if (!j["use_temperature"].is_boolean()) throw bad("'use_temperature' must be a boolean");
    r.use_temperature = j["use_temperature"].get<bool>();
  }
  if (j.contains("branching")) {
    if (!j["branching"].is_string()) throw bad("'branching' must be \"left\" or \"right\"");
    r.branching = parse_branching(j["branching"].get<std::string>());
  }
  if (j.contains("embedding_variant")) {
    if (!j["embedding_variant"].is_string()) throw bad("'embedding_variant' must be a string");
    r.embedding_variant = j["embedding_variant"].get<std::string>();
  }
  if (j.contains("vectors")) {
    for (const auto& row : j["vectors"]) {
      auto values = row.get<std::vector<double>>();
      r.vectors.push_back(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                            static_cast<Eigen::Index>(values.size())));
    }
  }
  return r;
}

nlohmann::json ParseRequest::to_json() const {
  nlohmann::json j = {{"sentence", sentence},
                      {"beam_width", beam_width},
                      {"use_temperature", use_temperature},
                      {"branching", std::string(to_string(branching))},
                      {"embedding_variant", embedding_variant}};
  if (!vectors.empty()) {
    auto rows = nlohmann::json::array();
    for (const auto& v : vectors) rows.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    j["vectors"] = std::move(rows);
  }
  return j;
}

ParseOutcome run_parse(const Checkpoint& checkpoint, const std::vector<Token>& tokens,
                       std::span<const Eigen::VectorXd> leaf_vectors, const ParseConfig& config) {
  if (checkpoint.params.contextual_leaves && leaf_vectors.empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "model '" + checkpoint.params.version + "' expects precomputed contextual vectors");
  }
  ParseOutcome out;
  out.tree = parse(checkpoint.params, checkpoint.calibration, tokens, leaf_vectors, config);
  out.tree_json = tree_to_json(out.tree, checkpoint.params.vocabulary);
  return out;
}

ParseService::ParseService(std::shared_ptr<const ModelRegistry> registry)
    : registry_(std::move(registry)) {}

namespace {

HttpReply error_reply(int status, std::string_view code, const std::string& message) {
  return {status, {{"error", std::string(code)}, {"message", message}}};
}

}  // namespace

HttpReply ParseService::parse(const std::string& body) const {
  const auto started = std::chrono::steady_clock::now();
  try {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) return error_reply(400, "InvalidJson", "request body is not valid JSON");
    ParseRequest request = ParseRequest::from_json(j);
    const std::vector<Token> tokens = tokenize(request.sentence);

    const ModelVariant* variant = registry_->find(request.branching, request.embedding_variant);
    if (!variant) {
      return error_reply(404, to_string(ErrorCode::UnknownModelVariant),
                         "no model for variant '" +
                             variant_id(request.branching, request.embedding_variant) + "'");
    }
    ParseConfig config;
    config.beam_width = request.beam_width;
    config.use_temperature = request.use_temperature;
    config.branching = request.branching;
    config.embedding_variant = request.embedding_variant;
    ParseOutcome outcome = run_parse(variant->checkpoint, tokens, request.vectors, config);

    const double elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return {200,
            {{"tree", std::move(outcome.tree_json)},
             {"cum_logprob", outcome.tree.cum_logprob},
             {"model_version", variant->checkpoint.params.version},
             {"timing_ms", elapsed_ms}}};
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::EmptySentence:
      case ErrorCode::InvalidArgument:
      case ErrorCode::DimensionMismatch:
        return error_reply(400, to_string(e.code()), e.what());
      default:
        return error_reply(500, to_string(e.code()), e.what());
    }
  } catch (const nlohmann::json::exception& e) {
    return error_reply(400, "InvalidArgument", e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "InternalError", e.what());
  }
}

HttpReply ParseService::models() const {
  auto list = nlohmann::json::array();
  for (const auto& [id, variant] : registry_->variants()) {
    const ModelParams& p = variant.checkpoint.params;
    nlohmann::json entry = {{"id", id},
                            {"branching", std::string(to_string(p.branching))},
                            {"embedding_variant", p.embedding_variant},
                            {"embedding_mode", std::string(to_string(p.embedding.mode()))},
                            {"contextual", p.contextual_leaves},
                            {"dim", p.dim()},
                            {"temperature_fitted", variant.checkpoint.calibration.has_value()},
                            {"temperature", variant.checkpoint.temperature()},
                            {"version", p.version}};
    list.push_back(std::move(entry));
  }
  return {200, {{"models", std::move(list)}}};
}

HttpReply ParseService::health() const {
  return {200, {{"status", "ok"}, {"models", registry_->variants().size()}}};
}

void mount(httplib::Server& server, const ParseService& service, const std::string& allowed_origin) {
  auto send = [allowed_origin](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_header("Access-Control-Allow-Origin", allowed_origin);
    res.set_content(reply.body.dump(), "application/json");
  };
  server.Post("/api/parse", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.parse(req.body));
  });
  server.Get("/api/models", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.models());
  });
  server.Get("/api/health", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.health());
  });
  server.Options(R"(/api/.*)", [allowed_origin](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Origin", allowed_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
}

}  // namespace cate
