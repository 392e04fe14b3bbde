#pragma once

#include <filesystem>
#include <optional>

#include "json.hpp"

#include "cate/calibration.hpp"
#include "cate/rnn.hpp"

namespace cate {

// A trained model as stored on disk: parameters plus the optional fitted
// temperature.
struct Checkpoint {
  ModelParams params;
  std::optional<CalibrationParams> calibration;

  double temperature() const { return calibration ? calibration->temperature : 1.0; }
};

// Matrices are stored row-major as flat arrays. Doubles are written in
// shortest round-trip form, so save/load is bit-exact.
nlohmann::json checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cate
