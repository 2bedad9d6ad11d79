#pragma once

#include <filesystem>
#include <string>

#include "recourse/model.hpp"
#include "recourse/training.hpp"

namespace recourse::checkpoint {

inline constexpr const char* kFormat = "recourse-checkpoint";
inline constexpr int kVersion = 1;

struct Checkpoint {
  training::Mode mode = training::Mode::kRobust;
  model::ModelParams params;
};

// JSON container:
//   {"format", "version", "mode", "dims": {encoder, predictor, generator},
//    "schema": <fitted schema>, "schema_hash": "<16 hex digits>",
//    "tensors": {"<name>": {"shape": [r, c], "data": [...]}, ...}}
// Tensors appear in parameter order. Doubles are written in shortest
// round-trip form, so loading reproduces every bit.
std::string to_json(const model::ModelParams& params, training::Mode mode);
Checkpoint parse(const std::string& text);

void save(const std::filesystem::path& path, const model::ModelParams& params, training::Mode mode);
Checkpoint load(const std::filesystem::path& path);

}  // namespace recourse::checkpoint
