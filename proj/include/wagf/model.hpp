#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wagf/attention.hpp"
#include "wagf/fusion.hpp"
#include "wagf/tape.hpp"

WAGF_BEGIN_NAMESPACE

/// Which tensor the SaFA map multiplies: the fused feature right before
/// pooling, or the backbone output before both attention branches.
enum class GateTarget { Fuse, Enc };

std::string to_string(GateTarget g);
GateTarget gate_target_from_string(std::string_view s);

struct ModelConfig {
  std::size_t input_height = 64;
  std::size_t input_width = 64;
  /// Output channels per backbone stage; each stage halves H and W.
  std::vector<std::size_t> backbone_channels{16, 32, 64};
  std::size_t num_classes = 7;
  bool soft_attention_enabled = true;
  bool fusion_enabled = true;
  bool safa_enabled = true;
  GateTarget gate_target = GateTarget::Fuse;
  std::uint64_t seed = 0;

  std::size_t feature_channels() const { return backbone_channels.back(); }
  std::size_t feature_height() const;
  std::size_t feature_width() const;
  Shape feature_shape() const { return {feature_height(), feature_width(), feature_channels()}; }
  Shape input_shape() const { return {input_height, input_width, 3}; }

  /// Throws ConfigError when F_enc would not be square with even sides.
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct ConvParams {
  Parameter kernel;  // [3,3,Cin,Cout]
  Parameter bias;    // [Cout]
};

/// Tape handles for one forward pass. Handles of disabled branches are
/// left invalid.
struct ModelPass {
  Var image;
  Var f_enc;
  FdabResult fdab;
  Var f_symmetry;
  Var f_attn;
  Var f_sa;
  Var f_wav;
  Var f_fuse;
  Var f_final;
  Var pooled;
  Var logits;  // [1,K]
};

class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  /// All parameters in a fixed order: backbone, soft attention, SaFA, head.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  const Parameter* find(std::string_view name) const;
  Parameter* find(std::string_view name);
  std::size_t parameter_count() const;
  void zero_grad();

  /// Per-image channel centring, then the plain conv stack; returns F_enc.
  Var backbone_forward(Tape& tape, Var image) const;

  /// Full pipeline. Captures the gradients of f_wav and f_sa when fusion is
  /// enabled.
  ModelPass forward(Tape& tape, const Tensor& image, const FusionState& fusion) const;

  ForwardTrace trace(const Tape& tape, const ModelPass& pass) const;

  /// Logits [K] without keeping a tape around.
  Tensor logits(const Tensor& image, const FusionState& fusion) const;

  FusionState make_fusion_state(Real decay = Real(0.9)) const;

  /// Initialisers used by the constructor, for checkpoint headers.
  static nlohmann::json init_scheme();

 private:
  ModelConfig config_;
  std::vector<ConvParams> backbone_;
  std::vector<SoftAttentionParams> soft_attention_;  // zero or one
  std::vector<SaFAParams> safa_;                     // zero or one
  Parameter head_weights_;                           // [C,K]
  Parameter head_bias_;                              // [K]
};

/// Softmax of a logit vector.
Tensor probabilities(const Tensor& logits);

WAGF_END_NAMESPACE
