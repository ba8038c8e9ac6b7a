#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "wagf/model.hpp"
#include "wagf/synth.hpp"
#include "wagf/train.hpp"

WAGF_BEGIN_NAMESPACE

/// Where a command's samples come from: an image directory with a labels
/// CSV, or a synthesis spec.
struct DataSource {
  std::filesystem::path images;
  std::filesystem::path labels;
  std::optional<SynthSpec> synth;

  bool is_synthetic() const { return synth.has_value(); }
  nlohmann::json to_json() const;
  static DataSource from_json(const nlohmann::json& j);
};

/// Everything a training run depends on. Defaults are the desk-scale values;
/// the reference recipe (batch 64, 256x256 input) is reachable by config.
struct RunConfig {
  ModelConfig model;
  std::size_t epochs = 25;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool checked = false;
  double fusion_decay = 0.9;
  double train_fraction = 0.7;
  int augment_factor = 1;
  DataSource data;
  std::filesystem::path output_dir = "runs/default";

  /// Throws ConfigError naming the offending field.
  void validate() const;
  TrainOptions train_options() const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::filesystem::path& path);
};

/// Materialises a data source at the given model input size.
LabeledDataset resolve_dataset(const DataSource& source, const ModelConfig& model);

WAGF_END_NAMESPACE
