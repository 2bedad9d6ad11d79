#pragma once

#include <filesystem>
#include <string>

#include "recourse/training.hpp"

namespace recourse::config {

// Parses a training config. Every key is optional; an unknown key is a
// ConfigError naming it. Missing dims leave `cfg.dims` empty (see
// default_dims).
training::TrainConfig parse(const std::string& json_text);
training::TrainConfig load(const std::filesystem::path& path);

// Canonical JSON with every key written.
std::string to_json(const training::TrainConfig& cfg);

// encoder [input, 32, 16], predictor [16, 16], generator [16, 16]
model::Dims default_dims(std::size_t input_dim);

// Fills empty dims from the data width.
void resolve_dims(training::TrainConfig& cfg, std::size_t input_dim);

// Published hyperparameters and widths for the two credit datasets.
training::TrainConfig loan_preset();
training::TrainConfig german_credit_preset();

}  // namespace recourse::config
