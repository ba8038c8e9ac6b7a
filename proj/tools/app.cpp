#include "app.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "wagf/checkpoint.hpp"
#include "wagf/dataset.hpp"
#include "wagf/errors.hpp"
#include "wagf/run_config.hpp"
#include "wagf/synth.hpp"
#include "wagf/train.hpp"

WAGF_BEGIN_NAMESPACE
namespace cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

Tensor read_image(const fs::path& path) {
  if (path.extension() == ".wten") return read_wten(path);
  return read_ppm(path);
}

std::vector<std::string> class_names_of(const Checkpoint& ck) {
  const auto K = ck.model.config().num_classes;
  if (ck.metadata.contains("class_names")) {
    auto names = ck.metadata.at("class_names").get<std::vector<std::string>>();
    if (names.size() == K) return names;
  }
  auto names = default_class_names();
  if (names.size() == K) return names;
  names.clear();
  for (std::size_t k = 0; k < K; ++k) names.push_back(std::to_string(k));
  return names;
}

// Data-source flags shared by train and eval.
struct DataFlags {
  std::string images;
  std::string labels;
  std::string synth_spec;
  std::size_t synth_count = 0;
  std::uint64_t synth_seed = 0;
  CLI::Option* images_opt = nullptr;
  CLI::Option* labels_opt = nullptr;
  CLI::Option* spec_opt = nullptr;
  CLI::Option* count_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* cmd) {
    images_opt = cmd->add_option("--images", images, "Directory of <image_id>.ppm / .wten files");
    labels_opt = cmd->add_option("--labels", labels, "CSV with header image_id,label");
    spec_opt = cmd->add_option("--synth", synth_spec, "Synthesis spec JSON (instead of --images/--labels)");
    count_opt = cmd->add_option("--synth-count", synth_count, "Synthesise this many samples per class with default profiles");
    seed_opt = cmd->add_option("--synth-seed", synth_seed, "Seed for --synth/--synth-count");
  }
  bool given() const { return images_opt->count() || labels_opt->count() || spec_opt->count() || count_opt->count(); }

  DataSource resolve() const {
    DataSource d;
    if (spec_opt->count() || count_opt->count()) {
      SynthSpec spec = SynthSpec::defaults(20, 0);
      if (spec_opt->count()) {
        std::ifstream in(synth_spec);
        if (!in) throw ConfigError("cannot open synth spec " + synth_spec);
        try {
          spec = SynthSpec::from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError(synth_spec + ": " + e.what());
        }
      }
      if (count_opt->count()) spec.counts.assign(spec.classes.size(), synth_count);
      if (seed_opt->count()) spec.seed = synth_seed;
      spec.validate();
      d.synth = spec;
    } else {
      if (images.empty() || labels.empty()) throw ConfigError("both --images and --labels are required");
      d.images = images;
      d.labels = labels;
    }
    return d;
  }
};

struct TrainFlags {
  std::string config;
  std::string output;
  std::size_t epochs = 0, batch_size = 0, threads = 0, input_size = 0;
  double lr = 0, decay = 0, fraction = 0;
  std::uint64_t seed = 0;
  int augment = 1;
  std::string gate;
  bool no_sa = false, no_fusion = false, no_safa = false, checked = false;
  DataFlags data;
};

int cmd_train(const TrainFlags& f, CLI::App* cmd) {
  RunConfig cfg = f.config.empty() ? RunConfig::from_json(nlohmann::json::object()) : RunConfig::from_file(f.config);
  auto given = [&](const char* name) { return cmd->get_option(name)->count() > 0; };
  if (given("--epochs")) cfg.epochs = f.epochs;
  if (given("--batch-size")) cfg.batch_size = f.batch_size;
  if (given("--lr")) cfg.learning_rate = f.lr;
  if (given("--seed")) {
    cfg.seed = f.seed;
    if (!f.data.given() && cfg.data.synth && f.config.empty()) cfg.data.synth->seed = f.seed;
  }
  if (given("--threads")) cfg.threads = f.threads;
  if (given("--fusion-decay")) cfg.fusion_decay = f.decay;
  if (given("--train-fraction")) cfg.train_fraction = f.fraction;
  if (given("--augment")) cfg.augment_factor = f.augment;
  if (given("--output")) cfg.output_dir = f.output;
  if (given("--input-size")) cfg.model.input_height = cfg.model.input_width = f.input_size;
  if (given("--gate-target")) cfg.model.gate_target = gate_target_from_string(f.gate);
  if (f.no_sa) cfg.model.soft_attention_enabled = false;
  if (f.no_fusion) cfg.model.fusion_enabled = false;
  if (f.no_safa) cfg.model.safa_enabled = false;
  if (f.checked) cfg.checked = true;
  if (f.data.given()) cfg.data = f.data.resolve();
  cfg.model.seed = cfg.seed;
  cfg.validate();

  fs::create_directories(cfg.output_dir);
  write_text(cfg.output_dir / "resolved_config.json", cfg.to_json().dump(2) + "\n");

  auto full = resolve_dataset(cfg.data, cfg.model);
  if (full.num_classes() != cfg.model.num_classes) {
    throw DataError("dataset has " + std::to_string(full.num_classes()) + " classes, model expects " +
                    std::to_string(cfg.model.num_classes));
  }
  full = augment(full, cfg.augment_factor, cfg.seed);
  auto [train_set, val_set] = split_dataset(full, cfg.train_fraction, cfg.seed);
  std::fprintf(stderr, "train: %zu samples, val: %zu samples, %zu parameters\n", train_set.size(), val_set.size(),
               Model(cfg.model).parameter_count());

  Model model(cfg.model);
  FusionState fusion = model.make_fusion_state(static_cast<Real>(cfg.fusion_decay));
  const auto class_names = full.class_names;
  nlohmann::json history = nlohmann::json::array();
  auto metadata = [&](std::size_t epoch) {
    return nlohmann::json{{"epoch", epoch}, {"class_names", class_names}, {"history", history}};
  };
  std::ofstream log(cfg.output_dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
  if (!log) throw DataError("cannot write training log in " + cfg.output_dir.string());

  auto options = cfg.train_options();
  options.restore_best = false;
  const auto result = train(model, fusion, train_set, val_set, options, [&](const EpochRecord& rec, bool improved) {
    history.push_back(nlohmann::json::parse(rec.to_json().dump()));
    log << rec.to_json().dump() << '\n';
    log.flush();
    std::fprintf(stderr, "epoch %zu/%zu  train_loss %.4f  train_acc %.4f  val_loss %.4f  val_acc %.4f  val_f1 %.4f%s\n",
                 rec.epoch, cfg.epochs, rec.train_loss, rec.train_accuracy, rec.val_loss, rec.val_accuracy,
                 rec.val_macro_f1, improved ? "  *" : "");
    if (improved) save_checkpoint(model, fusion, cfg.output_dir / "best.ckpt", metadata(rec.epoch));
  });
  if (cfg.epochs == 0) save_checkpoint(model, fusion, cfg.output_dir / "best.ckpt", metadata(0));
  save_checkpoint(model, fusion, cfg.output_dir / "last.ckpt", metadata(cfg.epochs));

  nlohmann::ordered_json summary;
  summary["output_dir"] = cfg.output_dir.string();
  summary["epochs"] = cfg.epochs;
  summary["best_epoch"] = result.best_epoch;
  summary["best_val_macro_f1"] = result.best_val_f1 < 0 ? 0.0 : result.best_val_f1;
  if (!result.history.empty()) summary["final"] = result.history.back().to_json();
  std::cout << summary.dump(2) << std::endl;
  return kOk;
}

struct EvalFlags {
  std::string checkpoint;
  std::string output;
  std::size_t threads = 1;
  DataFlags data;
};

int cmd_eval(const EvalFlags& f) {
  const auto ck = load_checkpoint(f.checkpoint);
  const auto& cfg = ck.model.config();
  const auto ds = resolve_dataset(f.data.resolve(), cfg);
  if (ds.num_classes() != cfg.num_classes) {
    throw DataError("dataset has " + std::to_string(ds.num_classes()) + " classes, checkpoint expects " +
                    std::to_string(cfg.num_classes));
  }
  const auto ev = evaluate(ck.model, ck.fusion, ds, f.threads);
  const auto names = ds.class_names;
  auto metrics = ev.metrics.to_json(names);
  metrics["mean_loss"] = ev.mean_loss;

  if (!f.output.empty()) {
    const fs::path out(f.output);
    fs::create_directories(out);
    write_text(out / "metrics.json", metrics.dump(2) + "\n");
    write_text(out / "confusion.csv", ev.metrics.confusion_csv(names));
    std::ostringstream pred;
    pred << "image_id,true,predicted";
    for (const auto& n : names) pred << ",p_" << n;
    pred << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
      pred << ds.sample_name(i) << ',' << names[static_cast<std::size_t>(ds.labels[i])] << ','
           << names[static_cast<std::size_t>(ev.predictions[i])];
      for (auto p : ev.probabilities[i].data()) pred << ',' << fmt_real(p);
      pred << '\n';
    }
    write_text(out / "predictions.csv", pred.str());
  }
  std::cout << metrics.dump(2) << std::endl;
  return kOk;
}

struct PredictFlags {
  std::string checkpoint;
  std::vector<std::string> images;
  std::string output;
};

int cmd_predict(const PredictFlags& f) {
  const auto ck = load_checkpoint(f.checkpoint);
  const auto& cfg = ck.model.config();
  const auto names = class_names_of(ck);
  std::ostringstream csv;
  csv << "image_id,predicted";
  for (const auto& n : names) csv << ",p_" << n;
  csv << '\n';
  for (const auto& path : f.images) {
    const Tensor img = resize_nearest(read_image(path), cfg.input_height, cfg.input_width);
    const Tensor probs = probabilities(ck.model.logits(img, ck.fusion));
    const auto best = static_cast<std::size_t>(std::max_element(probs.data().begin(), probs.data().end()) -
                                               probs.data().begin());
    csv << fs::path(path).stem().string() << ',' << names[best];
    for (auto p : probs.data()) csv << ',' << fmt_real(p);
    csv << '\n';
  }
  if (!f.output.empty()) write_text(f.output, csv.str());
  std::cout << csv.str();
  return kOk;
}

struct HeatmapFlags {
  std::string checkpoint;
  std::string image;
  std::string output;
  bool all = false;
};

int cmd_heatmap(const HeatmapFlags& f) {
  const auto ck = load_checkpoint(f.checkpoint);
  const auto& cfg = ck.model.config();
  const Tensor original = read_image(f.image);
  if (original.rank() != 3) throw DataError("heatmap: image must be [H,W,3]");
  const std::size_t H0 = original.dim(0), W0 = original.dim(1);
  Tape tape;
  const auto pass = ck.model.forward(tape, resize_nearest(original, cfg.input_height, cfg.input_width), ck.fusion);
  const auto trace = ck.model.trace(tape, pass);

  std::vector<std::pair<std::string, const Tensor*>> maps{{"f_attn", &trace.f_attn}};
  if (f.all) {
    if (!trace.f_symmetry.empty()) maps.emplace_back("f_symmetry", &trace.f_symmetry);
    if (!trace.f_lstm.empty()) maps.emplace_back("f_lstm", &trace.f_lstm);
  }
  const fs::path out(f.output);
  fs::create_directories(out);
  nlohmann::ordered_json sidecar;
  sidecar["image"] = f.image;
  sidecar["scaling"] = "min-max per map to 0..255; constant maps render at 128; nearest-neighbour upsampling";
  sidecar["width"] = W0;
  sidecar["height"] = H0;
  for (const auto& [name, map] : maps) {
    const std::size_t h = map->dim(0), w = map->dim(1);
    const auto [lo_it, hi_it] = std::minmax_element(map->data().begin(), map->data().end());
    const double lo = *lo_it, hi = *hi_it;
    const bool constant = hi == lo;
    std::vector<std::uint8_t> px(H0 * W0);
    for (std::size_t i = 0; i < H0; ++i)
      for (std::size_t j = 0; j < W0; ++j) {
        const double v = (*map)[(i * h / H0) * w + (j * w / W0)];
        px[i * W0 + j] = constant ? 128 : static_cast<std::uint8_t>(std::lround((v - lo) / (hi - lo) * 255.0));
      }
    const auto file = name + ".pgm";
    write_pgm(out / file, px, H0, W0);
    sidecar["maps"][name] = {{"file", file}, {"min", lo}, {"max", hi}, {"constant", constant}};
  }
  write_text(out / "heatmap.json", sidecar.dump(2) + "\n");
  std::cout << sidecar.dump(2) << std::endl;
  return kOk;
}

struct SynthFlags {
  std::string spec;
  std::string output;
  std::size_t count = 0;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthFlags& f, CLI::App* cmd) {
  SynthSpec spec = SynthSpec::defaults(20, 0);
  if (!f.spec.empty()) {
    std::ifstream in(f.spec);
    if (!in) throw ConfigError("cannot open synth spec " + f.spec);
    try {
      spec = SynthSpec::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(f.spec + ": " + e.what());
    }
  }
  if (cmd->get_option("--count")->count()) spec.counts.assign(spec.classes.size(), f.count);
  if (cmd->get_option("--seed")->count()) spec.seed = f.seed;
  spec.validate();
  const fs::path out(f.output);
  fs::create_directories(out);
  const auto ds = generate_synthetic(spec);
  save_dataset(ds, out, out / "labels.csv");
  write_text(out / "synth_spec.json", spec.to_json().dump(2) + "\n");
  std::cout << "wrote " << ds.size() << " images to " << out.string() << std::endl;
  return kOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Lesion classifier with wavelet/soft-attention fusion and symmetry-aware attention"};
  app.require_subcommand(1);

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoints plus a JSON-lines log");
  train_cmd->add_option("--config", tf.config, "Run config JSON; flags override its fields");
  train_cmd->add_option("--output", tf.output, "Output directory");
  train_cmd->add_option("--epochs", tf.epochs, "Epochs (default 25)");
  train_cmd->add_option("--batch-size", tf.batch_size, "Batch size (default 32)");
  train_cmd->add_option("--lr", tf.lr, "Adam learning rate (default 0.01)");
  train_cmd->add_option("--seed", tf.seed, "Seed for init, shuffling, splitting and default synthetic data");
  train_cmd->add_option("--threads", tf.threads, "Worker threads (results do not depend on it)");
  train_cmd->add_option("--input-size", tf.input_size, "Square input side in pixels (default 64)");
  train_cmd->add_option("--fusion-decay", tf.decay, "EMA decay of the fusion weights (default 0.9)");
  train_cmd->add_option("--train-fraction", tf.fraction, "Stratified train share (default 0.7)");
  train_cmd->add_option("--augment", tf.augment, "Augmentation factor (default 1 = none)");
  train_cmd->add_option("--gate-target", tf.gate, "Where the SaFA map is applied: fuse | enc")
      ->check(CLI::IsMember({"fuse", "enc"}));
  train_cmd->add_flag("--no-soft-attention", tf.no_sa, "Disable the soft-attention branch");
  train_cmd->add_flag("--no-fusion", tf.no_fusion, "Disable wavelet fusion");
  train_cmd->add_flag("--no-safa", tf.no_safa, "Disable the symmetry-aware attention module");
  train_cmd->add_flag("--checked", tf.checked, "Abort on the first non-finite intermediate");
  tf.data.attach(train_cmd);

  EvalFlags ef;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint: metrics JSON, confusion and prediction CSVs");
  eval_cmd->add_option("--checkpoint", ef.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--output", ef.output, "Directory for metrics.json, confusion.csv, predictions.csv");
  eval_cmd->add_option("--threads", ef.threads, "Worker threads");
  ef.data.attach(eval_cmd);

  PredictFlags pf;
  auto* predict_cmd = app.add_subcommand("predict", "Class probabilities for individual images");
  predict_cmd->add_option("--checkpoint", pf.checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("--image", pf.images, "PPM or raw tensor image (repeatable)")->required();
  predict_cmd->add_option("--output", pf.output, "Also write the CSV to this file");

  HeatmapFlags hf;
  auto* heat_cmd = app.add_subcommand("heatmap", "Export the SaFA attention map of an image as PGM");
  heat_cmd->add_option("--checkpoint", hf.checkpoint, "Checkpoint file")->required();
  heat_cmd->add_option("--image", hf.image, "PPM or raw tensor image")->required();
  heat_cmd->add_option("--output", hf.output, "Output directory")->required();
  heat_cmd->add_flag("--all", hf.all, "Also export the symmetry and LSTM maps");

  SynthFlags sf;
  auto* synth_cmd = app.add_subcommand("synth-data", "Write a synthetic lesion dataset (PPM + labels CSV)");
  synth_cmd->add_option("--spec", sf.spec, "Synthesis spec JSON (defaults: seven built-in profiles)");
  synth_cmd->add_option("--output", sf.output, "Output directory")->required();
  synth_cmd->add_option("--count", sf.count, "Samples per class");
  synth_cmd->add_option("--seed", sf.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsageError;
  }

  try {
    if (*train_cmd) return cmd_train(tf, train_cmd);
    if (*eval_cmd) return cmd_eval(ef);
    if (*predict_cmd) return cmd_predict(pf);
    if (*heat_cmd) return cmd_heatmap(hf);
    if (*synth_cmd) return cmd_synth(sf, synth_cmd);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kUsageError;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << std::endl;
    return kNumericError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return kDataError;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << std::endl;
    return kDataError;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace cli
WAGF_END_NAMESPACE
