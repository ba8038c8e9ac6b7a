#include "wagf/run_config.hpp"

#include <fstream>

#include "wagf/errors.hpp"

WAGF_BEGIN_NAMESPACE

nlohmann::json DataSource::to_json() const {
  if (synth) return {{"synth", synth->to_json()}};
  return {{"images", images.string()}, {"labels", labels.string()}};
}

DataSource DataSource::from_json(const nlohmann::json& j) {
  DataSource d;
  if (j.contains("synth")) {
    d.synth = SynthSpec::from_json(j.at("synth"));
  } else {
    d.images = j.value("images", std::string());
    d.labels = j.value("labels", std::string());
  }
  return d;
}

void RunConfig::validate() const {
  model.validate();
  if (batch_size == 0) throw ConfigError("config field 'batch_size' must be positive");
  if (!(learning_rate > 0)) throw ConfigError("config field 'learning_rate' must be positive");
  if (!(fusion_decay > 0 && fusion_decay < 1)) throw ConfigError("config field 'fusion_decay' must lie in (0,1)");
  if (!(train_fraction > 0 && train_fraction < 1)) throw ConfigError("config field 'train_fraction' must lie in (0,1)");
  if (augment_factor < 1) throw ConfigError("config field 'augment_factor' must be at least 1");
  if (threads == 0) throw ConfigError("config field 'threads' must be positive");
  if (!data.is_synthetic() && (data.images.empty() || data.labels.empty())) {
    throw ConfigError("config field 'data' needs either 'synth' or both 'images' and 'labels'");
  }
}

TrainOptions RunConfig::train_options() const {
  TrainOptions o;
  o.epochs = epochs;
  o.batch_size = batch_size;
  o.learning_rate = static_cast<Real>(learning_rate);
  o.seed = seed;
  o.threads = threads;
  o.checked = checked;
  return o;
}

nlohmann::json RunConfig::to_json() const {
  return {{"model", model.to_json()},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"seed", seed},
          {"threads", threads},
          {"checked", checked},
          {"fusion_decay", fusion_decay},
          {"train_fraction", train_fraction},
          {"augment_factor", augment_factor},
          {"data", data.to_json()},
          {"output_dir", output_dir.string()}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  std::string field;
  try {
    if (j.contains("model")) {
      field = "model";
      c.model = ModelConfig::from_json(j.at("model"));
    }
    field = "epochs";
    c.epochs = j.value(field, c.epochs);
    field = "batch_size";
    c.batch_size = j.value(field, c.batch_size);
    field = "learning_rate";
    c.learning_rate = j.value(field, c.learning_rate);
    field = "seed";
    c.seed = j.value(field, c.seed);
    field = "threads";
    c.threads = j.value(field, c.threads);
    field = "checked";
    c.checked = j.value(field, c.checked);
    field = "fusion_decay";
    c.fusion_decay = j.value(field, c.fusion_decay);
    field = "train_fraction";
    c.train_fraction = j.value(field, c.train_fraction);
    field = "augment_factor";
    c.augment_factor = j.value(field, c.augment_factor);
    field = "output_dir";
    c.output_dir = j.value(field, c.output_dir.string());
    field = "data";
    c.data = j.contains("data") ? DataSource::from_json(j.at("data"))
                                : DataSource{{}, {}, SynthSpec::defaults(20, c.seed)};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config field '" + field + "': " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError("config field '" + field + "': " + e.what());
  }
  c.model.seed = c.seed;
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

LabeledDataset resolve_dataset(const DataSource& source, const ModelConfig& model) {
  if (source.synth) {
    auto ds = generate_synthetic(*source.synth);
    for (auto& img : ds.images) img = resize_nearest(img, model.input_height, model.input_width);
    return ds;
  }
  return load_dataset(source.images, source.labels, model.input_height, model.input_width);
}

WAGF_END_NAMESPACE
