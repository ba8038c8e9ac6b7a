#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "test_util.hpp"
#include "wagf/dataset.hpp"
#include "wagf/errors.hpp"

using namespace wagf;
using testutil::TempDir;
using namespace std::string_literals;

namespace {

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

std::string ppm_bytes(std::size_t h, std::size_t w, unsigned char fill, const std::string& header_extra = "") {
  std::string s = "P6\n" + header_extra + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  s.append(h * w * 3, static_cast<char>(fill));
  return s;
}

LabeledDataset toy(std::size_t per_class, std::size_t classes, std::size_t side = 4) {
  LabeledDataset ds;
  for (std::size_t k = 0; k < classes; ++k) ds.class_names.push_back("c" + std::to_string(k));
  for (std::size_t k = 0; k < classes; ++k)
    for (std::size_t i = 0; i < per_class; ++i) {
      ds.images.push_back(testutil::rand_tensor({side, side, 3}, k * 1000 + i, 0, 1));
      ds.labels.push_back(static_cast<int>(k));
      char id[32];
      std::snprintf(id, sizeof id, "s%02zu_%03zu", k, i);
      ds.ids.push_back(id);
      ds.augmentations.emplace_back();
    }
  return ds;
}

}  // namespace

TEST(Ppm, NormalisationEndpointsAndComments) {
  TempDir dir("ppm");
  std::string bytes = ppm_bytes(2, 3, 0, "# a comment\n");
  bytes[bytes.size() - 1] = static_cast<char>(255);
  write_file(dir / "a.ppm", bytes);
  const Tensor t = read_ppm(dir / "a.ppm");
  EXPECT_EQ(t.shape(), (Shape{2, 3, 3}));
  EXPECT_EQ(t[0], 0);
  EXPECT_EQ(t[t.size() - 1], 1);
}

TEST(Ppm, WriteReadRoundTrip) {
  TempDir dir("ppm");
  Tensor img({3, 2, 3});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<Real>(i * 13 % 256) / 255;
  write_ppm(dir / "x.ppm", img);
  EXPECT_EQ(read_ppm(dir / "x.ppm"), img);
}

TEST(Ppm, MalformedInputs) {
  TempDir dir("ppm");
  write_file(dir / "p3.ppm", "P3\n1 1\n255\n0 0 0\n");
  EXPECT_THROW(read_ppm(dir / "p3.ppm"), DataError);
  write_file(dir / "max.ppm", "P6\n1 1\n65535\n\0\0\0\0\0\0"s);
  EXPECT_THROW(read_ppm(dir / "max.ppm"), DataError);
  write_file(dir / "short.ppm", ppm_bytes(4, 4, 7).substr(0, 30));
  EXPECT_THROW(read_ppm(dir / "short.ppm"), DataError);
  EXPECT_THROW(read_ppm(dir / "nothing.ppm"), DataError);
}

TEST(RawTensor, RoundTripAndErrors) {
  TempDir dir("wten");
  const Tensor t = testutil::rand_tensor({4, 5, 3}, 2, 0, 1);
  write_wten(dir / "t.wten", t);
  const Tensor back = read_wten(dir / "t.wten");
  EXPECT_EQ(back.shape(), t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(back[i], static_cast<float>(t[i]));
  write_file(dir / "bad.wten", "WTEN\x01\0\0\0\x04\0\0\0abc"s);
  EXPECT_THROW(read_wten(dir / "bad.wten"), DataError);
  write_file(dir / "magic.wten", "NOPE");
  EXPECT_THROW(read_wten(dir / "magic.wten"), DataError);
}

TEST(LoadDataset, ToyDirectory) {
  TempDir dir("load");
  write_file(dir / "img_b.ppm", ppm_bytes(2, 2, 255));
  write_file(dir / "img_a.ppm", ppm_bytes(2, 2, 0));
  write_file(dir / "labels.csv", "image_id,label\nimg_b,mel\nimg_a,nv\n");
  const auto ds = load_dataset(dir.path(), dir / "labels.csv", 4, 4);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.ids[0], "img_a");
  EXPECT_EQ(ds.class_names[static_cast<std::size_t>(ds.labels[0])], "nv");
  EXPECT_EQ(ds.class_names[static_cast<std::size_t>(ds.labels[1])], "mel");
  EXPECT_EQ(ds.images[0].shape(), (Shape{4, 4, 3}));
  EXPECT_EQ(ds.images[1], Tensor::full({4, 4, 3}, 1));
}

TEST(LoadDataset, RawTensorImages) {
  TempDir dir("load");
  write_wten(dir / "t1.wten", Tensor::full({2, 2, 3}, 0.25));
  write_file(dir / "labels.csv", "image_id,label\nt1,df\n");
  const auto ds = load_dataset(dir.path(), dir / "labels.csv", 2, 2);
  EXPECT_EQ(ds.images[0], Tensor::full({2, 2, 3}, 0.25));
  write_wten(dir / "t1.wten", Tensor::full({2, 2, 3}, 1.5));
  EXPECT_THROW(load_dataset(dir.path(), dir / "labels.csv", 2, 2), DataError);
}

TEST(LoadDataset, Errors) {
  TempDir dir("load");
  write_file(dir / "a.ppm", ppm_bytes(2, 2, 9));
  write_file(dir / "unknown.csv", "image_id,label\na,melanoma\n");
  try {
    load_dataset(dir.path(), dir / "unknown.csv", 2, 2);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("melanoma"), std::string::npos) << e.what();
  }
  write_file(dir / "missing.csv", "image_id,label\nb,nv\n");
  EXPECT_THROW(load_dataset(dir.path(), dir / "missing.csv", 2, 2), DataError);
  write_file(dir / "header.csv", "id,dx\na,nv\n");
  EXPECT_THROW(load_dataset(dir.path(), dir / "header.csv", 2, 2), DataError);
  write_file(dir / "dup.csv", "image_id,label\na,nv\na,nv\n");
  EXPECT_THROW(load_dataset(dir.path(), dir / "dup.csv", 2, 2), DataError);
  write_file(dir / "fields.csv", "image_id,label\na,nv,extra\n");
  EXPECT_THROW(load_dataset(dir.path(), dir / "fields.csv", 2, 2), DataError);
  EXPECT_THROW(load_dataset(dir.path(), dir / "absent.csv", 2, 2), DataError);
}

TEST(SaveDataset, RoundTripThroughDisk) {
  TempDir dir("save");
  auto ds = toy(3, 2);
  // PPM stores 8 bits per channel, so quantise first.
  for (auto& img : ds.images)
    for (auto& v : img.data()) v = std::round(v * 255) / 255;
  ds.class_names = {"nv", "mel"};
  save_dataset(ds, dir.path(), dir / "labels.csv");
  const auto back = load_dataset(dir.path(), dir / "labels.csv", 4, 4, {"nv", "mel"});
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.ids[i], ds.ids[i]);
    EXPECT_EQ(back.labels[i], ds.labels[i]);
    EXPECT_EQ(back.images[i], ds.images[i]);
  }
}

TEST(Resize, NearestNeighbour) {
  Tensor img({2, 2, 1}, std::vector<Real>{1, 2, 3, 4});
  const Tensor up = resize_nearest(img, 4, 4);
  EXPECT_EQ(up.at({0, 0, 0}), 1);
  EXPECT_EQ(up.at({1, 3, 0}), 2);
  EXPECT_EQ(up.at({3, 0, 0}), 3);
  EXPECT_EQ(resize_nearest(up, 2, 2), img);
  EXPECT_EQ(resize_nearest(img, 2, 2), img);
}

TEST(Split, StratifiedCounts) {
  const auto ds = toy(10, 7);
  const auto [tr, va] = split_dataset(ds, 0.7, 1);
  const auto tc = tr.class_counts(), vc = va.class_counts();
  for (std::size_t k = 0; k < 7; ++k) {
    EXPECT_EQ(tc[k], 7u);
    EXPECT_EQ(vc[k], 3u);
  }
}

TEST(Split, DeterministicDisjointAndComplete) {
  const auto ds = toy(9, 3);
  const auto a = split_dataset(ds, 0.6, 5), b = split_dataset(ds, 0.6, 5), c = split_dataset(ds, 0.6, 6);
  EXPECT_EQ(a.first.ids, b.first.ids);
  EXPECT_NE(a.first.ids, c.first.ids);
  std::set<std::string> tr(a.first.ids.begin(), a.first.ids.end()), va(a.second.ids.begin(), a.second.ids.end());
  for (const auto& id : va) EXPECT_FALSE(tr.count(id));
  EXPECT_EQ(tr.size() + va.size(), ds.size());
}

TEST(Split, EveryClassInBothParts) {
  for (double f : {0.05, 0.5, 0.95}) {
    const auto [tr, va] = split_dataset(toy(2, 4), f, 3);
    for (auto n : tr.class_counts()) EXPECT_EQ(n, 1u);
    for (auto n : va.class_counts()) EXPECT_EQ(n, 1u);
  }
}

TEST(Split, EmptyClassRejected) {
  auto ds = toy(3, 2);
  ds.class_names.push_back("empty");
  EXPECT_THROW(split_dataset(ds, 0.7, 1), DataError);
  EXPECT_NO_THROW(split_dataset(ds, 0.7, 1, false));
}

TEST(Augment, IdentityAndCounting) {
  const auto ds = toy(5, 2);
  const auto same = augment(ds, 1, 3);
  EXPECT_EQ(same.images, ds.images);
  EXPECT_EQ(same.ids, ds.ids);
  const auto big = augment(ds, 4, 3);
  ASSERT_EQ(big.size(), 40u);
  std::set<std::string> names;
  for (std::size_t i = 0; i < big.size(); ++i) {
    names.insert(big.sample_name(i));
    const auto src = std::find(ds.ids.begin(), ds.ids.end(), big.ids[i]) - ds.ids.begin();
    EXPECT_EQ(big.labels[i], ds.labels[static_cast<std::size_t>(src)]);
  }
  EXPECT_EQ(names.size(), 40u);
  EXPECT_THROW(augment(ds, 0, 1), ConfigError);
}

TEST(Augment, CopiesAreDihedralImagesOfTheSource) {
  const auto ds = toy(2, 1);
  const auto big = augment(ds, 12, 9);
  std::set<std::string> names;
  for (std::size_t i = 0; i < big.size(); ++i) {
    names.insert(big.sample_name(i));
    const auto src = static_cast<std::size_t>(std::find(ds.ids.begin(), ds.ids.end(), big.ids[i]) - ds.ids.begin());
    bool found = false;
    for (int turns = 0; turns < 4 && !found; ++turns) {
      const Tensor r = rotate90(ds.images[src], turns);
      found = r == big.images[i] || flip(r, Flip::Horizontal) == big.images[i];
    }
    EXPECT_TRUE(found) << big.sample_name(i);
  }
  EXPECT_EQ(names.size(), big.size());
  EXPECT_EQ(augment(ds, 5, 9).images, augment(ds, 5, 9).images);
}

TEST(Flips, InvolutionsAndRotationGroup) {
  const Tensor img = testutil::rand_tensor({5, 5, 3}, 4);
  EXPECT_EQ(flip(flip(img, Flip::Horizontal), Flip::Horizontal), img);
  EXPECT_EQ(flip(flip(img, Flip::Vertical), Flip::Vertical), img);
  EXPECT_EQ(rotate90(img, 4), img);
  EXPECT_EQ(rotate90(rotate90(img, 1), 3), img);
  EXPECT_EQ(rotate90(img, 2), flip(flip(img, Flip::Horizontal), Flip::Vertical));
  Tensor m({2, 2, 1}, std::vector<Real>{1, 2, 3, 4});
  EXPECT_EQ(rotate90(m, 1), Tensor({2, 2, 1}, std::vector<Real>{2, 4, 1, 3}));
}

TEST(LabeledDataset, ValidateCatchesInconsistencies) {
  auto ds = toy(2, 2);
  EXPECT_NO_THROW(ds.validate());
  ds.labels[0] = 5;
  EXPECT_THROW(ds.validate(), DataError);
  ds = toy(2, 2);
  ds.images[1] = Tensor::zeros({3, 3, 3});
  EXPECT_THROW(ds.validate(), DataError);
  ds = toy(2, 2);
  ds.ids.pop_back();
  EXPECT_THROW(ds.validate(), DataError);
}
