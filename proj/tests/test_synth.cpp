#include <gtest/gtest.h>

#include <map>

#include "test_util.hpp"
#include "wagf/dataset.hpp"
#include "wagf/errors.hpp"
#include "wagf/synth.hpp"

using namespace wagf;

namespace {

SynthSpec one_class(SynthProfile p, std::size_t count = 4, std::uint64_t seed = 1) {
  SynthSpec s;
  s.seed = seed;
  s.classes = {std::move(p)};
  s.counts = {count};
  return s;
}

// Mean over samples of the per-channel variance of lesion pixels.
double lesion_color_variance(const SynthSpec& spec, std::size_t cls, std::size_t samples) {
  double total = 0;
  for (std::size_t n = 0; n < samples; ++n) {
    const auto r = render_sample(spec, cls, n);
    double v = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      double s = 0, s2 = 0, m = 0;
      for (std::size_t p = 0; p < r.mask.size(); ++p) {
        if (!r.mask[p]) continue;
        const double x = r.image[p * 3 + c];
        s += x;
        s2 += x * x;
        m += 1;
      }
      v += s2 / m - (s / m) * (s / m);
    }
    total += v / 3;
  }
  return total / static_cast<double>(samples);
}

}  // namespace

TEST(Synth, DefaultSpecShape) {
  const auto spec = SynthSpec::defaults(3, 2);
  const auto ds = generate_synthetic(spec);
  EXPECT_EQ(ds.size(), 21u);
  EXPECT_EQ(ds.class_names, default_class_names());
  EXPECT_EQ(ds.ids[0], "akiec_00000");
  EXPECT_EQ(ds.ids[20], "vasc_00002");
  for (const auto& img : ds.images) {
    EXPECT_EQ(img.shape(), (Shape{64, 64, 3}));
    for (auto v : img.data()) {
      ASSERT_TRUE(v >= 0 && v <= 1);
      ASSERT_EQ(v, std::round(v * 255) / 255);
    }
  }
  EXPECT_NO_THROW(ds.validate());
}

TEST(Synth, SymmetricProfileIsMirrorSymmetric) {
  SynthProfile p{"sym", 0.0, 0.0, 3, 0.1, 18, 30};
  const auto spec = one_class(p, 10);
  for (std::size_t n = 0; n < 10; ++n) {
    const auto r = render_sample(spec, 0, n);
    ASSERT_GT(r.bottom, r.top);
    const Tensor flipped = flip(r.image, Flip::Horizontal);
    for (std::size_t i = r.top; i <= r.bottom; ++i)
      for (std::size_t j = r.left; j <= r.right; ++j)
        for (std::size_t c = 0; c < 3; ++c) ASSERT_EQ(r.image.at({i, j, c}), flipped.at({i, j, c})) << n;
    EXPECT_EQ(r.left + r.right, 63u);
  }
}

TEST(Synth, AsymmetricProfileIsNot) {
  SynthProfile p{"asym", 0.35, 0.0, 3, 0.1, 18, 30};
  const auto spec = one_class(p, 5);
  for (std::size_t n = 0; n < 5; ++n) {
    const auto r = render_sample(spec, 0, n);
    EXPECT_NE(r.image, flip(r.image, Flip::Horizontal));
  }
}

TEST(Synth, SameSeedSameBytes) {
  const auto a = generate_synthetic(SynthSpec::defaults(2, 7));
  const auto b = generate_synthetic(SynthSpec::defaults(2, 7));
  const auto c = generate_synthetic(SynthSpec::defaults(2, 8));
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_NE(a.images, c.images);
}

TEST(Synth, ColourVarianceFollowsProfileOrder) {
  const auto spec = SynthSpec::defaults(100, 3);
  std::multimap<double, double> by_param;
  for (std::size_t k = 0; k < spec.classes.size(); ++k)
    by_param.emplace(spec.classes[k].color_variance, lesion_color_variance(spec, k, 100));
  double prev = -1;
  for (const auto& [param, measured] : by_param) {
    EXPECT_GT(measured, prev) << "color_variance " << param;
    prev = measured;
  }
}

TEST(Synth, SymmetryToggleLeavesBackgroundAlone) {
  SynthProfile sym{"x", 0.0, 0.1, 4, 0.05, 16, 28};
  SynthProfile asym = sym;
  asym.asymmetry = 0.4;
  const auto a = one_class(sym, 20, 5), b = one_class(asym, 20, 5);
  std::map<int, long> hist_a, hist_b;
  for (std::size_t n = 0; n < 20; ++n) {
    const auto ra = render_sample(a, 0, n), rb = render_sample(b, 0, n);
    for (std::size_t p = 0; p < ra.mask.size(); ++p) {
      if (ra.mask[p] || rb.mask[p]) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        ASSERT_EQ(ra.image[p * 3 + c], rb.image[p * 3 + c]);
        hist_a[static_cast<int>(std::lround(ra.image[p * 3 + c] * 255))]++;
        hist_b[static_cast<int>(std::lround(rb.image[p * 3 + c] * 255))]++;
      }
    }
  }
  EXPECT_EQ(hist_a, hist_b);
}

TEST(Synth, LesionStaysInsideImage) {
  const auto spec = SynthSpec::defaults(30, 4);
  for (std::size_t k = 0; k < spec.classes.size(); ++k)
    for (std::size_t n = 0; n < 30; ++n) {
      const auto r = render_sample(spec, k, n);
      EXPECT_GT(r.top, 0u);
      EXPECT_GT(r.left, 0u);
      EXPECT_LT(r.bottom, 63u);
      EXPECT_LT(r.right, 63u);
    }
}

TEST(SynthSpec, ValidationErrors) {
  auto s = SynthSpec::defaults(2);
  s.classes[0].diameter_max = 80;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(generate_synthetic(s), ConfigError);
  s = SynthSpec::defaults(2);
  s.counts.pop_back();
  EXPECT_THROW(s.validate(), ConfigError);
  s = SynthSpec::defaults(2);
  s.classes[1].border_amplitude = 1.2;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(SynthSpec, JsonRoundTrip) {
  auto s = SynthSpec::defaults(3, 11);
  s.counts[2] = 9;
  s.classes[4].asymmetry = 0.5;
  const auto back = SynthSpec::from_json(s.to_json());
  EXPECT_EQ(back.to_json(), s.to_json());
  const auto short_form = SynthSpec::from_json({{"count_per_class", 5}, {"seed", 2}});
  EXPECT_EQ(short_form.counts, std::vector<std::size_t>(7, 5));
  EXPECT_THROW(SynthSpec::from_json({{"classes", {{{"asymmetry", 0.1}}}}}), ConfigError);
}
