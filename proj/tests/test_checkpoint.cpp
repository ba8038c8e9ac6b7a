#include <gtest/gtest.h>

#include <chrono>
#include <fstream>

#include "test_util.hpp"
#include "wagf/checkpoint.hpp"
#include "wagf/errors.hpp"

using namespace wagf;
using testutil::rand_tensor;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

ModelConfig small_config() {
  ModelConfig c;
  c.input_height = c.input_width = 16;
  c.backbone_channels = {4, 6};
  c.num_classes = 4;
  c.seed = 8;
  return c;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  testutil::TempDir dir("ckpt");
  Model m(small_config());
  // Perturb everything away from the seeded init so the load cannot just
  // rebuild the same values from the config.
  std::uint64_t s = 1;
  for (auto* p : m.parameters()) p->value = rand_tensor(p->value.shape(), s++);
  auto fs = m.make_fusion_state(Real(0.8));
  fs.g_w_ema = rand_tensor(fs.g_w_ema.shape(), 100, 0, 1);
  fs.g_sa_ema = rand_tensor(fs.g_sa_ema.shape(), 101, 0, 1);
  fs.initialized = true;
  save_checkpoint(m, fs, dir / "a.ckpt", {{"epoch", 3}, {"note", "x"}});

  const auto ck = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(ck.model.config().to_json(), m.config().to_json());
  for (const auto* p : m.parameters()) EXPECT_EQ(ck.model.find(p->name)->value, p->value) << p->name;
  EXPECT_EQ(ck.fusion.g_w_ema, fs.g_w_ema);
  EXPECT_EQ(ck.fusion.g_sa_ema, fs.g_sa_ema);
  EXPECT_EQ(ck.fusion.decay, fs.decay);
  EXPECT_TRUE(ck.fusion.initialized);
  EXPECT_EQ(ck.metadata.at("epoch"), 3);

  const Tensor img = rand_tensor({16, 16, 3}, 7, 0, 1);
  EXPECT_EQ(ck.model.logits(img, ck.fusion), m.logits(img, fs));

  save_checkpoint(ck.model, ck.fusion, dir / "b.ckpt", ck.metadata);
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
}

TEST(Checkpoint, HeaderLayout) {
  testutil::TempDir dir("ckpt");
  const Model m(small_config());
  save_checkpoint(m, m.make_fusion_state(), dir / "a.ckpt");
  const auto bytes = slurp(dir / "a.ckpt");
  ASSERT_GT(bytes.size(), 12u);
  EXPECT_EQ(bytes.substr(0, 4), "WAGF");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), kCheckpointVersion);
  EXPECT_EQ(bytes[5], 0);
  EXPECT_NE(bytes.find("\"dtype\":\"" + std::string(kDtypeName) + "\""), std::string::npos);
}

TEST(Checkpoint, CorruptFilesRejected) {
  testutil::TempDir dir("ckpt");
  const Model m(small_config());
  save_checkpoint(m, m.make_fusion_state(), dir / "good.ckpt");
  const auto bytes = slurp(dir / "good.ckpt");

  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    spit(dir / "cut.ckpt", bytes.substr(0, cut));
    EXPECT_THROW(load_checkpoint(dir / "cut.ckpt"), CheckpointError) << "cut at " << cut;
  }
  spit(dir / "long.ckpt", bytes + "x");
  EXPECT_THROW(load_checkpoint(dir / "long.ckpt"), CheckpointError);

  auto magic = bytes;
  magic[0] = 'X';
  spit(dir / "magic.ckpt", magic);
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), CheckpointError);

  auto version = bytes;
  version[4] = 9;
  spit(dir / "version.ckpt", version);
  EXPECT_THROW(load_checkpoint(dir / "version.ckpt"), CheckpointError);

  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
}

TEST(Checkpoint, ShapeMismatchAgainstConfig) {
  testutil::TempDir dir("ckpt");
  const Model m(small_config());
  save_checkpoint(m, m.make_fusion_state(), dir / "a.ckpt");
  auto bytes = slurp(dir / "a.ckpt");
  // Claim a different class count in the header; same JSON length keeps the
  // framing valid, so only the tensor-shape check can catch it.
  const auto pos = bytes.find("\"num_classes\":4");
  ASSERT_NE(pos, std::string::npos);
  bytes[pos + 14] = '5';
  spit(dir / "bad.ckpt", bytes);
  EXPECT_THROW(load_checkpoint(dir / "bad.ckpt"), CheckpointError);
}

TEST(Checkpoint, DefaultModelSizeAndLoadTime) {
  testutil::TempDir dir("ckpt");
  const Model m(ModelConfig{});
  save_checkpoint(m, m.make_fusion_state(), dir / "d.ckpt");
  const auto size = std::filesystem::file_size(dir / "d.ckpt");
  // Parameters plus two fusion tensors, at the payload width, plus a small header.
  const auto payload = (m.parameter_count() + 2 * 8 * 8 * 64) * sizeof(Real);
  EXPECT_GE(size, payload);
  EXPECT_LT(size, payload + 8192);
  const auto t0 = std::chrono::steady_clock::now();
  (void)load_checkpoint(dir / "d.ckpt");
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1.0);
}
