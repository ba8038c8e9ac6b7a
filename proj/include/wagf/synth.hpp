#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "wagf/dataset.hpp"

WAGF_BEGIN_NAMESPACE

/// Appearance profile of one synthetic lesion class.
struct SynthProfile {
  std::string name;
  double asymmetry = 0;         // amplitude of the odd (left/right) shape and shading warp
  double border_amplitude = 0;  // relative radial noise amplitude
  int border_frequency = 3;     // lowest angular harmonic of the border noise
  double color_variance = 0;    // amplitude of within-lesion colour texture
  double diameter_min = 16;     // pixels
  double diameter_max = 24;
};

struct SynthSpec {
  std::size_t image_size = 64;
  std::uint64_t seed = 0;
  std::vector<std::size_t> counts;  // samples per class
  std::vector<SynthProfile> classes;

  /// Seven profiles, one per default class name.
  static SynthSpec defaults(std::size_t per_class = 20, std::uint64_t seed = 0);

  /// Throws ConfigError on inconsistent counts or a lesion that cannot fit.
  void validate() const;

  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

struct RenderedSample {
  Tensor image;                    // [S,S,3]
  std::vector<std::uint8_t> mask;  // S*S, 1 inside the lesion
  std::size_t top = 0, left = 0, bottom = 0, right = 0;  // inclusive lesion bounding box
};

/// Renders sample `index` of class `cls`. Background, geometry and colour
/// come from separate random streams keyed only by (seed, cls, index), so
/// changing a profile's shape parameters leaves the background untouched.
RenderedSample render_sample(const SynthSpec& spec, std::size_t cls, std::size_t index);

LabeledDataset generate_synthetic(const SynthSpec& spec);

WAGF_END_NAMESPACE
