#include "wagf/model.hpp"

#include <algorithm>
#include <cmath>

#include "wagf/errors.hpp"
#include "wagf/init.hpp"
#include "wagf/ops.hpp"
#include "wagf/wavelet.hpp"

WAGF_BEGIN_NAMESPACE

std::string to_string(GateTarget g) { return g == GateTarget::Fuse ? "fuse" : "enc"; }

GateTarget gate_target_from_string(std::string_view s) {
  if (s == "fuse") return GateTarget::Fuse;
  if (s == "enc") return GateTarget::Enc;
  throw ConfigError("gate target must be 'fuse' or 'enc', got '" + std::string(s) + "'");
}

std::size_t ModelConfig::feature_height() const { return input_height >> backbone_channels.size(); }
std::size_t ModelConfig::feature_width() const { return input_width >> backbone_channels.size(); }

void ModelConfig::validate() const {
  if (backbone_channels.empty()) throw ConfigError("model: backbone needs at least one stage");
  for (auto c : backbone_channels)
    if (c == 0) throw ConfigError("model: backbone channel counts must be positive");
  if (num_classes < 2) throw ConfigError("model: num_classes must be at least 2");
  const std::size_t unit = std::size_t{1} << (backbone_channels.size() + 1);
  if (input_height == 0 || input_width == 0 || input_height % unit || input_width % unit) {
    throw ConfigError("model: input " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                      " must be divisible by " + std::to_string(unit) +
                      " so the backbone output has even sides");
  }
  if (input_height != input_width) throw ConfigError("model: input must be square");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"input_height", input_height},
          {"input_width", input_width},
          {"backbone_channels", backbone_channels},
          {"num_classes", num_classes},
          {"soft_attention_enabled", soft_attention_enabled},
          {"fusion_enabled", fusion_enabled},
          {"safa_enabled", safa_enabled},
          {"gate_target", to_string(gate_target)},
          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.input_height = j.value("input_height", c.input_height);
    c.input_width = j.value("input_width", c.input_width);
    c.backbone_channels = j.value("backbone_channels", c.backbone_channels);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.soft_attention_enabled = j.value("soft_attention_enabled", c.soft_attention_enabled);
    c.fusion_enabled = j.value("fusion_enabled", c.fusion_enabled);
    c.safa_enabled = j.value("safa_enabled", c.safa_enabled);
    c.gate_target = gate_target_from_string(j.value("gate_target", to_string(c.gate_target)));
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto seed = config_.seed;
  std::size_t cin = 3;
  for (std::size_t s = 0; s < config_.backbone_channels.size(); ++s) {
    const std::size_t cout = config_.backbone_channels[s];
    const auto name = "backbone.stage" + std::to_string(s);
    Rng rng(derive_seed(seed, name + ".kernel"));
    backbone_.push_back({Parameter(name + ".kernel", he_normal({3, 3, cin, cout}, 9 * cin, rng)),
                         Parameter(name + ".bias", Tensor::zeros({cout}))});
    cin = cout;
  }
  const std::size_t C = config_.feature_channels();
  if (config_.soft_attention_enabled) {
    soft_attention_.push_back(SoftAttentionParams::make("soft_attention", C, seed));
  }
  if (config_.safa_enabled) {
    safa_.push_back(SaFAParams::make("safa", config_.feature_height(), config_.feature_width(), C, seed));
  }
  // Zero head: the untrained logits are uniform, so early steps do not pay
  // to shrink features through the sigmoid gate.
  head_weights_ = Parameter("head.weights", Tensor::zeros({C, config_.num_classes}));
  head_bias_ = Parameter("head.bias", Tensor::zeros({config_.num_classes}));
}

nlohmann::json Model::init_scheme() {
  return {{"conv", "he_normal"},
          {"conv_bias", "zeros"},
          {"lstm", "uniform(-1/sqrt(hidden), 1/sqrt(hidden))"},
          {"soft_attention_gamma", "zeros"},
          {"dense", "zeros"}};
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (auto& b : backbone_) out.insert(out.end(), {&b.kernel, &b.bias});
  for (auto& s : soft_attention_) collect_parameters(s, out);
  for (auto& s : safa_) collect_parameters(s, out);
  out.insert(out.end(), {&head_weights_, &head_bias_});
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  auto ps = const_cast<Model*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

const Parameter* Model::find(std::string_view name) const {
  for (const auto* p : parameters())
    if (p->name == name) return p;
  return nullptr;
}

Parameter* Model::find(std::string_view name) {
  return const_cast<Parameter*>(static_cast<const Model*>(this)->find(name));
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

FusionState Model::make_fusion_state(Real decay) const { return FusionState(config_.feature_shape(), decay); }

Var Model::backbone_forward(Tape& tape, Var image) const {
  const auto& s = tape.value(image).shape();
  if (s != config_.input_shape()) {
    throw ShapeError("backbone: image " + shape_str(s) + " does not match configured input " +
                     shape_str(config_.input_shape()));
  }
  Var x = center_channels(image);
  for (const auto& stage : backbone_) {
    x = relu(conv2d(x, tape.parameter(stage.kernel), tape.parameter(stage.bias)));
    x = avg_pool2(x);
  }
  return x;
}

ModelPass Model::forward(Tape& tape, const Tensor& image, const FusionState& fusion) const {
  ModelPass p;
  p.image = tape.constant(image);
  p.f_enc = backbone_forward(tape, p.image);
  const auto fshape = config_.feature_shape();

  if (config_.safa_enabled) {
    p.fdab = fdab(tape, p.f_enc, safa_.front());
    p.f_symmetry = sab(p.fdab.f_lstm);
    p.f_attn = safa_map(tape, p.f_symmetry, safa_.front());
  }
  const bool gate_enc = config_.safa_enabled && config_.gate_target == GateTarget::Enc;
  const bool gate_fuse = config_.safa_enabled && config_.gate_target == GateTarget::Fuse;
  Var base = gate_enc ? mul_channel(p.f_enc, p.f_attn) : p.f_enc;

  // f_sa is always its own node so its captured gradient is exactly the
  // gradient arriving through the fusion input.
  p.f_sa = config_.soft_attention_enabled ? soft_attention(tape, base, soft_attention_.front()).f_sa
                                          : reshape(base, fshape);
  if (config_.fusion_enabled) {
    if (fusion.g_w_ema.shape() != fshape || fusion.g_sa_ema.shape() != fshape) {
      throw ShapeError("forward: fusion state shape does not match feature map " + shape_str(fshape));
    }
    p.f_wav = boundary_features(base);
    tape.capture(p.f_wav);
    tape.capture(p.f_sa);
    p.f_fuse = fuse(p.f_wav, p.f_sa, fusion.g_w_ema, fusion.g_sa_ema);
  } else {
    p.f_fuse = p.f_sa;
  }
  p.f_final = gate_fuse ? mul_channel(p.f_fuse, p.f_attn) : p.f_fuse;
  const std::size_t C = config_.feature_channels(), K = config_.num_classes;
  p.pooled = global_average_pool(p.f_final);
  p.logits = add(matmul(reshape(p.pooled, {1, C}), tape.parameter(head_weights_)),
                 reshape(tape.parameter(head_bias_), {1, K}));
  return p;
}

ForwardTrace Model::trace(const Tape& tape, const ModelPass& pass) const {
  auto get = [&](Var v) { return v.valid() ? tape.value(v) : Tensor(); };
  ForwardTrace t;
  t.f_enc = get(pass.f_enc);
  t.f_h = get(pass.fdab.f_h);
  t.f_w_spatial = get(pass.fdab.f_w_spatial);
  t.f_hlstm = get(pass.fdab.f_hlstm);
  t.f_wlstm = get(pass.fdab.f_wlstm);
  t.f_lstm = get(pass.fdab.f_lstm);
  t.f_symmetry = get(pass.f_symmetry);
  t.f_attn = pass.f_attn.valid()
                 ? tape.value(pass.f_attn)
                 : Tensor::full({config_.feature_height(), config_.feature_width(), 1}, Real(1));
  t.f_sa = get(pass.f_sa);
  t.f_wav = get(pass.f_wav);
  t.f_fuse = get(pass.f_fuse);
  t.f_final = get(pass.f_final);
  return t;
}

Tensor Model::logits(const Tensor& image, const FusionState& fusion) const {
  Tape tape;
  const auto pass = forward(tape, image, fusion);
  return tape.value(pass.logits).reshaped({config_.num_classes});
}

Tensor probabilities(const Tensor& logits) {
  Tensor p = logits;
  const Real mx = *std::max_element(p.data().begin(), p.data().end());
  Real z = 0;
  for (auto& v : p.data()) {
    v = std::exp(v - mx);
    z += v;
  }
  for (auto& v : p.data()) v /= z;
  return p;
}

WAGF_END_NAMESPACE
