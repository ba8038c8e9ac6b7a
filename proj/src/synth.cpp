#include "wagf/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "wagf/errors.hpp"
#include "wagf/init.hpp"

WAGF_BEGIN_NAMESPACE

namespace {

constexpr double kPi = std::numbers::pi;

std::string sample_key(std::size_t cls, std::size_t index) {
  return std::to_string(cls) + "/" + std::to_string(index);
}

}  // namespace

SynthSpec SynthSpec::defaults(std::size_t per_class, std::uint64_t seed) {
  SynthSpec s;
  s.seed = seed;
  s.classes = {
      {"akiec", 0.20, 0.10, 5, 0.080, 22, 34},
      {"bcc", 0.10, 0.22, 9, 0.050, 20, 32},
      {"bkl", 0.05, 0.06, 3, 0.110, 22, 36},
      {"df", 0.00, 0.02, 2, 0.020, 14, 22},
      {"mel", 0.35, 0.25, 6, 0.140, 26, 40},
      {"nv", 0.00, 0.04, 3, 0.035, 18, 28},
      {"vasc", 0.15, 0.06, 4, 0.065, 12, 20},
  };
  s.counts.assign(s.classes.size(), per_class);
  return s;
}

void SynthSpec::validate() const {
  if (image_size < 8) throw ConfigError("synth: image_size must be at least 8");
  if (classes.empty()) throw ConfigError("synth: no class profiles");
  if (counts.size() != classes.size()) throw ConfigError("synth: counts must list one entry per class");
  for (const auto& c : classes) {
    if (c.name.empty()) throw ConfigError("synth: class profile without a name");
    if (!(c.diameter_min > 0 && c.diameter_min <= c.diameter_max)) {
      throw ConfigError("synth: class '" + c.name + "' needs 0 < diameter_min <= diameter_max");
    }
    if (c.diameter_max > static_cast<double>(image_size)) {
      throw ConfigError("synth: class '" + c.name + "' lesion diameter " + std::to_string(c.diameter_max) +
                        " exceeds image size " + std::to_string(image_size));
    }
    if (c.asymmetry < 0 || c.border_amplitude < 0 || c.color_variance < 0 || c.border_frequency < 1) {
      throw ConfigError("synth: class '" + c.name + "' has a negative amplitude or frequency < 1");
    }
    if (c.border_amplitude >= 1 || c.asymmetry >= 1) {
      throw ConfigError("synth: class '" + c.name + "' amplitudes must stay below 1");
    }
  }
}

nlohmann::json SynthSpec::to_json() const {
  nlohmann::json cls = nlohmann::json::array();
  for (const auto& c : classes) {
    cls.push_back({{"name", c.name},
                   {"asymmetry", c.asymmetry},
                   {"border_amplitude", c.border_amplitude},
                   {"border_frequency", c.border_frequency},
                   {"color_variance", c.color_variance},
                   {"diameter_min", c.diameter_min},
                   {"diameter_max", c.diameter_max}});
  }
  return {{"image_size", image_size}, {"seed", seed}, {"counts", counts}, {"classes", cls}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    const std::size_t per_class = j.value("count_per_class", std::size_t{20});
    s = defaults(per_class, j.value("seed", std::uint64_t{0}));
    s.image_size = j.value("image_size", s.image_size);
    if (j.contains("classes")) {
      s.classes.clear();
      for (const auto& c : j.at("classes")) {
        SynthProfile p;
        p.name = c.at("name").get<std::string>();
        p.asymmetry = c.value("asymmetry", p.asymmetry);
        p.border_amplitude = c.value("border_amplitude", p.border_amplitude);
        p.border_frequency = c.value("border_frequency", p.border_frequency);
        p.color_variance = c.value("color_variance", p.color_variance);
        p.diameter_min = c.value("diameter_min", p.diameter_min);
        p.diameter_max = c.value("diameter_max", p.diameter_max);
        s.classes.push_back(p);
      }
      s.counts.assign(s.classes.size(), per_class);
    }
    if (j.contains("counts")) s.counts = j.at("counts").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

RenderedSample render_sample(const SynthSpec& spec, std::size_t cls, std::size_t index) {
  const auto& prof = spec.classes.at(cls);
  const std::size_t S = spec.image_size;
  const std::size_t half = (S + 1) / 2;
  const auto key = sample_key(cls, index);
  Rng bg_rng(derive_seed(spec.seed, "background/" + key));
  Rng geo_rng(derive_seed(spec.seed, "geometry/" + key));
  Rng col_rng(derive_seed(spec.seed, "color/" + key));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto uni = [&](Rng& r, double lo, double hi) { return lo + (hi - lo) * u01(r); };

  // Background: per-image skin tone, vertical shading, and a per-pixel noise
  // field mirrored about the vertical centre line.
  const std::array<double, 3> tone{0.87 + uni(bg_rng, -0.05, 0.05), 0.70 + uni(bg_rng, -0.05, 0.05),
                                   0.60 + uni(bg_rng, -0.05, 0.05)};
  std::vector<double> bg_noise(S * half * 3);
  for (auto& v : bg_noise) v = 0.015 * n01(bg_rng);

  // Geometry. All draws happen regardless of the profile amplitudes.
  const double diameter = uni(geo_rng, prof.diameter_min, prof.diameter_max);
  double r0 = diameter / 2.0;
  const double cx = static_cast<double>(S) / 2.0;
  const double cy = static_cast<double>(S) / 2.0 + uni(geo_rng, -1.0, 1.0) * static_cast<double>(S) / 12.0;
  std::array<double, 3> border_amp{}, border_phase{};
  for (int k = 0; k < 3; ++k) {
    border_amp[k] = n01(geo_rng) / std::sqrt(3.0);
    border_phase[k] = uni(geo_rng, 0.0, 2.0 * kPi);
  }
  const double side = u01(geo_rng) < 0.5 ? -1.0 : 1.0;
  const std::array<double, 3> odd{side * uni(geo_rng, 0.7, 1.0), uni(geo_rng, -0.5, 0.5), uni(geo_rng, -0.3, 0.3)};
  auto shape_factor = [&](double phi) {
    double noise = 0;
    for (int k = 0; k < 3; ++k) {
      noise += border_amp[k] * std::cos(static_cast<double>(prof.border_frequency + k) * phi + border_phase[k]);
    }
    const double warp = odd[0] * std::sin(phi) + odd[1] * std::sin(2.0 * phi) + odd[2] * std::sin(3.0 * phi);
    return (1.0 + prof.border_amplitude * noise) * (1.0 + prof.asymmetry * warp);
  };
  // Shrink the lesion until its warped outline clears the frame.
  double widest = 0;
  for (int a = 0; a < 720; ++a) widest = std::max(widest, shape_factor(a * kPi / 360.0));
  const double room = std::min(cx, cy < cx ? cy : static_cast<double>(S) - cy) - 1.5;
  if (r0 * widest > room) r0 = room / widest;

  // Colour: shared base, mirrored low-frequency texture and pixel jitter.
  const std::array<double, 3> base{0.45 + uni(col_rng, -0.06, 0.06), 0.28 + uni(col_rng, -0.05, 0.05),
                                   0.20 + uni(col_rng, -0.05, 0.05)};
  std::array<double, 4> wx{}, wy{}, ph{}, amp{};
  for (int k = 0; k < 4; ++k) {
    wx[k] = uni(col_rng, 0.15, 0.6);
    wy[k] = uni(col_rng, 0.15, 0.6);
    ph[k] = uni(col_rng, 0.0, 2.0 * kPi);
    amp[k] = n01(col_rng) / std::sqrt(2.0);
  }
  std::vector<double> jitter(S * half * 3);
  for (auto& v : jitter) v = n01(col_rng);
  const std::array<double, 3> channel_gain{1.0, 0.8, 0.6};

  RenderedSample out;
  out.image = Tensor({S, S, 3});
  out.mask.assign(S * S, 0);
  out.top = S;
  out.left = S;
  for (std::size_t i = 0; i < S; ++i) {
    const double dy = static_cast<double>(i) + 0.5 - cy;
    for (std::size_t j = 0; j < S; ++j) {
      const std::size_t mj = std::min(j, S - 1 - j);
      const double dx = static_cast<double>(j) + 0.5 - cx;
      const double adx = std::abs(dx);
      const double r = std::hypot(adx, dy);
      // Angle from the vertical axis; a horizontal mirror maps phi -> -phi.
      const double phi = std::atan2(dx, dy);
      const double radius = r0 * shape_factor(phi);
      const bool inside = r <= radius;

      double px[3];
      if (inside) {
        double tex = 0;
        for (int k = 0; k < 4; ++k) tex += amp[k] * std::cos(wx[k] * adx) * std::cos(wy[k] * dy + ph[k]);
        const double shade = 1.0 - 0.15 * (1.0 - r / std::max(radius, 1e-9));
        const double lateral = prof.asymmetry * 0.6 * side * std::tanh(2.0 * dx / r0);
        for (int c = 0; c < 3; ++c) {
          const double jit = jitter[(i * half + mj) * 3 + static_cast<std::size_t>(c)];
          px[c] = base[c] * shade * (1.0 + lateral) +
                  prof.color_variance * channel_gain[c] * (0.7 * tex + 0.7 * jit);
        }
        out.mask[i * S + j] = 1;
        out.top = std::min(out.top, i);
        out.bottom = std::max(out.bottom, i);
        out.left = std::min(out.left, j);
        out.right = std::max(out.right, j);
      } else {
        const double shading = 1.0 - 0.06 * static_cast<double>(i) / static_cast<double>(S);
        for (int c = 0; c < 3; ++c) px[c] = tone[c] * shading + bg_noise[(i * half + mj) * 3 + static_cast<std::size_t>(c)];
      }
      for (int c = 0; c < 3; ++c) {
        // Quantise to 8 bits so images survive a PPM round trip unchanged.
        const double q = std::round(std::clamp(px[c], 0.0, 1.0) * 255.0) / 255.0;
        out.image[(i * S + j) * 3 + static_cast<std::size_t>(c)] = static_cast<Real>(q);
      }
    }
  }
  if (out.top == S) out.top = out.left = out.bottom = out.right = 0;
  return out;
}

LabeledDataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  LabeledDataset ds;
  for (const auto& c : spec.classes) ds.class_names.push_back(c.name);
  for (std::size_t k = 0; k < spec.classes.size(); ++k) {
    for (std::size_t n = 0; n < spec.counts[k]; ++n) {
      ds.images.push_back(render_sample(spec, k, n).image);
      ds.labels.push_back(static_cast<int>(k));
      char id[64];
      std::snprintf(id, sizeof id, "%s_%05zu", spec.classes[k].name.c_str(), n);
      ds.ids.emplace_back(id);
      ds.augmentations.emplace_back();
    }
  }
  return ds;
}

WAGF_END_NAMESPACE
