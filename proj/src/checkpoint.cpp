#include "cate/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "cate/error.hpp"

namespace cate {

namespace {

constexpr const char* kFormat = "cate-checkpoint/1";

nlohmann::json flat(const Eigen::MatrixXd& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

nlohmann::json flat(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::MatrixXd read_matrix(const nlohmann::json& j, const char* key, Eigen::Index rows,
                            Eigen::Index cols) {
  const auto values = j.at(key).get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
    throw Error(ErrorCode::InvalidCheckpoint, std::string(key) + " should hold " +
                                                  std::to_string(rows * cols) + " values");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  return m;
}

Eigen::VectorXd read_vector(const nlohmann::json& j, Eigen::Index size) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != size)
    throw Error(ErrorCode::InvalidCheckpoint, "vector of wrong length in checkpoint");
  return Eigen::Map<const Eigen::VectorXd>(values.data(), size);
}

}  // namespace

nlohmann::json checkpoint_to_json(const Checkpoint& checkpoint) {
  const ModelParams& p = checkpoint.params;
  p.validate();
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = p.version;
  j["dim"] = p.dim();
  j["branching"] = std::string(to_string(p.branching));
  j["embedding_variant"] = p.embedding_variant;
  j["contextual_leaves"] = p.contextual_leaves;
  j["vocabulary"] = p.vocabulary.names();
  j["W"] = flat(p.W);
  j["b"] = flat(p.b);
  j["Ws"] = flat(p.Ws);
  j["bs"] = flat(p.bs);

  const EmbeddingTable& e = p.embedding;
  nlohmann::json emb;
  emb["mode"] = std::string(to_string(e.mode()));
  emb["dim"] = e.dim();
  emb["seed"] = e.seed();
  emb["unk"] = flat(e.unk());
  auto words = nlohmann::json::array();
  auto vectors = nlohmann::json::array();
  for (std::size_t i = 0; i < e.size(); ++i) {
    words.push_back(e.word(static_cast<int>(i)));
    vectors.push_back(flat(e.vector(static_cast<int>(i))));
  }
  emb["words"] = std::move(words);
  emb["vectors"] = std::move(vectors);
  j["embedding"] = std::move(emb);

  if (checkpoint.calibration) {
    const CalibrationParams& c = *checkpoint.calibration;
    j["temperature"] = c.temperature;
    j["calibration"] = {{"fitted_on", c.fitted_on},
                        {"nll_before", c.nll_before},
                        {"nll_after", c.nll_after}};
  }
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != kFormat)
      throw Error(ErrorCode::InvalidCheckpoint, "not a checkpoint (missing or unknown 'format')");
    const int d = j.at("dim").get<int>();
    if (d <= 0) throw Error(ErrorCode::InvalidCheckpoint, "dim must be positive");

    const auto& emb = j.at("embedding");
    EmbeddingTable table(emb.at("dim").get<int>(),
                         parse_embedding_mode(emb.at("mode").get<std::string>()),
                         emb.value("seed", std::uint64_t{0}));
    const auto& words = emb.at("words");
    const auto& vectors = emb.at("vectors");
    if (words.size() != vectors.size())
      throw Error(ErrorCode::InvalidCheckpoint, "embedding words and vectors differ in length");
    for (std::size_t i = 0; i < words.size(); ++i)
      table.add(words[i].get<std::string>(), read_vector(vectors[i], table.dim()));
    table.set_unk(read_vector(emb.at("unk"), table.dim()));

    ModelParams p{
        .W = read_matrix(j, "W", d, 2 * d),
        .b = read_vector(j.at("b"), d),
        .Ws = read_matrix(j, "Ws", kNumLabels, d),
        .bs = read_vector(j.at("bs"), kNumLabels),
        .embedding = std::move(table),
        .vocabulary = LabelVocabulary(j.at("vocabulary").get<std::vector<std::string>>()),
        .branching = parse_branching(j.at("branching").get<std::string>()),
        .embedding_variant = j.value("embedding_variant", std::string("random")),
        .version = j.value("version", std::string()),
        .contextual_leaves = j.value("contextual_leaves", false),
    };
    p.validate();

    Checkpoint out{std::move(p), std::nullopt};
    if (j.contains("temperature")) {
      CalibrationParams c;
      c.temperature = j.at("temperature").get<double>();
      if (!(c.temperature > 0.0))
        throw Error(ErrorCode::NonPositiveTemperature, "stored temperature must be positive");
      if (j.contains("calibration")) {
        const auto& cj = j.at("calibration");
        c.fitted_on = cj.value("fitted_on", std::size_t{0});
        c.nll_before = cj.value("nll_before", 0.0);
        c.nll_after = cj.value("nll_after", 0.0);
      }
      out.calibration = c;
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidCheckpoint, e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << checkpoint_to_json(checkpoint).dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto j = nlohmann::json::parse(buffer.str(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidCheckpoint, path.string() + " is not valid JSON");
  return checkpoint_from_json(j);
}

}  // namespace cate
