#pragma once

#include <cstdint>
#include <filesystem>

#include "json.hpp"
#include "wagf/fusion.hpp"
#include "wagf/model.hpp"

WAGF_BEGIN_NAMESPACE

// Layout (all integers little-endian u32):
//   "WAGF" | version | header length | header JSON |
//   tensor count | { name length | name | rank | dims... | payload }...
// The header JSON carries the model config, payload dtype, fusion-state
// scalars and free-form training metadata. Payloads are IEEE floats of the
// header's dtype ("f32" by default, "f64" from verification builds).

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  FusionState fusion;
  nlohmann::json metadata;
};

void save_checkpoint(const Model& model, const FusionState& fusion, const std::filesystem::path& path,
                     const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

WAGF_END_NAMESPACE
