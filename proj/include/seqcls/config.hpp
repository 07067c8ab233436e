#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "seqcls/data.hpp"
#include "seqcls/models.hpp"
#include "seqcls/training.hpp"

namespace seqcls {

nlohmann::json model_config_to_json(const ModelConfig& config);

/// Strict: unknown keys and wrongly typed values raise ConfigError naming
/// the offending field. Missing keys keep their defaults.
ModelConfig model_config_from_json(const nlohmann::json& j, Architecture arch);

/// Contents of a run configuration file (JSON). Layout:
///
///   { "model": "wavenet" | "tcn",
///     "wavenet": { dilations, filters, kernel_size, num_classes, input_length,
///                  dropout_rate, l2_lambda, skip_projection },
///     "tcn":     { dilations, filters, kernel_size, convs_per_block, block_dropout,
///                  num_classes, input_length, l2_lambda },
///     "training": { micro_batch, accumulation, max_epochs, learning_rate, focal_gamma,
///                   class_weighted_alpha, adaptive_dropout, snapshot_every, tape_chunk,
///                   early_stopping: { enabled, patience },
///                   controller: { ...DropoutControllerConfig fields } },
///     "seeds": { data, init, dropout },
///     "data": { path, fractions: [train, val, test] },
///     "output_dir": "..." }
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SplitFractions fractions;
  std::optional<std::filesystem::path> data_path;
  std::optional<std::filesystem::path> output_dir;
  bool input_length_set = false;  // whether the file pinned input_length
};

RunConfig default_run_config(Architecture arch);
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace seqcls
