#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wagf/tensor.hpp"

WAGF_BEGIN_NAMESPACE

/// akiec, bcc, bkl, df, mel, nv, vasc
std::vector<std::string> default_class_names();

struct LabeledDataset {
  std::vector<Tensor> images;  // [H,W,3] in [0,1]
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::vector<std::string> ids;            // source image id
  std::vector<std::string> augmentations;  // op chain applied to the source, "" if none

  std::size_t size() const { return images.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  /// Throws DataError if labels, shapes or per-sample vectors are inconsistent.
  void validate() const;
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
  void append(const LabeledDataset& other);
  std::vector<std::size_t> class_counts() const;
  /// Unique name: the source id, suffixed with the augmentation chain.
  std::string sample_name(std::size_t i) const;
};

// Binary PPM (P6, maxval 255) and raw tensors ("WTEN", u32 rank, u32 dims,
// little-endian f32 payload).
Tensor read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Tensor& image);
void write_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels,
               std::size_t height, std::size_t width);
Tensor read_wten(const std::filesystem::path& path);
void write_wten(const std::filesystem::path& path, const Tensor& t);

/// Nearest-neighbour resize of a [H,W,C] image.
Tensor resize_nearest(const Tensor& image, std::size_t height, std::size_t width);

/// Reads `image_id,label` rows; images are looked up as <id>.ppm or
/// <id>.wten under image_dir. Samples are ordered by image id.
LabeledDataset load_dataset(const std::filesystem::path& image_dir, const std::filesystem::path& labels_csv,
                            std::size_t height, std::size_t width,
                            std::vector<std::string> class_names = default_class_names());

/// Writes images as <id>.ppm plus a labels CSV.
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& image_dir,
                  const std::filesystem::path& labels_csv);

/// Seeded per-class shuffle and split; every class with at least two
/// samples lands in both parts.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& ds, double train_fraction,
                                                        std::uint64_t seed, bool stratified = true);

/// Dihedral transforms of square images.
enum class Flip { Horizontal, Vertical };
Tensor flip(const Tensor& image, Flip axis);
/// Rotation by quarter_turns * 90 degrees counter-clockwise.
Tensor rotate90(const Tensor& image, int quarter_turns);

/// Adds factor-1 flipped/rotated copies per source image, keeping labels.
LabeledDataset augment(const LabeledDataset& ds, int factor, std::uint64_t seed);

WAGF_END_NAMESPACE
