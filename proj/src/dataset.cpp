#include "wagf/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "wagf/errors.hpp"
#include "wagf/init.hpp"

WAGF_BEGIN_NAMESPACE

namespace fs = std::filesystem;

std::vector<std::string> default_class_names() { return {"akiec", "bcc", "bkl", "df", "mel", "nv", "vasc"}; }

void LabeledDataset::validate() const {
  const auto n = images.size();
  if (labels.size() != n || ids.size() != n || augmentations.size() != n) {
    throw DataError("dataset: per-sample vectors have inconsistent lengths");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_names.size()) {
      throw DataError("dataset: sample " + ids[i] + " has label outside [0," + std::to_string(class_names.size()) + ")");
    }
    if (images[i].shape() != images.front().shape() || images[i].rank() != 3) {
      throw DataError("dataset: sample " + ids[i] + " has shape " + shape_str(images[i].shape()));
    }
  }
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.class_names = class_names;
  for (auto i : indices) {
    out.images.push_back(images.at(i));
    out.labels.push_back(labels.at(i));
    out.ids.push_back(ids.at(i));
    out.augmentations.push_back(augmentations.at(i));
  }
  return out;
}

void LabeledDataset::append(const LabeledDataset& other) {
  if (!class_names.empty() && other.class_names != class_names) throw DataError("dataset: class tables differ");
  class_names = other.class_names;
  images.insert(images.end(), other.images.begin(), other.images.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  ids.insert(ids.end(), other.ids.begin(), other.ids.end());
  augmentations.insert(augmentations.end(), other.augmentations.begin(), other.augmentations.end());
}

std::string LabeledDataset::sample_name(std::size_t i) const {
  return augmentations.at(i).empty() ? ids.at(i) : ids.at(i) + "_" + augmentations.at(i);
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (auto l : labels) ++counts.at(static_cast<std::size_t>(l));
  return counts;
}

namespace {

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

// Reads the next whitespace-separated header token, skipping '#' comments.
std::string ppm_token(const std::vector<char>& buf, std::size_t& pos, const fs::path& path) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos])) && buf[pos] != '#') tok += buf[pos++];
  if (tok.empty()) throw DataError("malformed PPM header in " + path.string());
  return tok;
}

std::size_t parse_positive(const std::string& tok, const fs::path& path) {
  std::size_t v = 0;
  try {
    std::size_t used = 0;
    v = std::stoul(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
  } catch (const std::exception&) {
    throw DataError("malformed PPM header value '" + tok + "' in " + path.string());
  }
  if (v == 0) throw DataError("zero PPM header value in " + path.string());
  return v;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b, 4);
}

std::uint32_t get_u32(const std::vector<char>& buf, std::size_t& pos, const fs::path& path) {
  if (buf.size() - pos < 4) throw DataError("truncated raw tensor " + path.string());
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

Tensor read_ppm(const fs::path& path) {
  const auto buf = slurp(path);
  std::size_t pos = 0;
  if (ppm_token(buf, pos, path) != "P6") throw DataError("not a binary PPM (P6): " + path.string());
  const auto width = parse_positive(ppm_token(buf, pos, path), path);
  const auto height = parse_positive(ppm_token(buf, pos, path), path);
  const auto maxval = parse_positive(ppm_token(buf, pos, path), path);
  if (maxval != 255) throw DataError("unsupported PPM maxval " + std::to_string(maxval) + " in " + path.string());
  ++pos;  // single whitespace byte before the raster
  const std::size_t n = width * height * 3;
  if (pos > buf.size() || buf.size() - pos < n) throw DataError("truncated PPM raster in " + path.string());
  Tensor img({height, width, 3});
  for (std::size_t i = 0; i < n; ++i) img[i] = static_cast<Real>(static_cast<unsigned char>(buf[pos + i])) / Real(255);
  return img;
}

void write_ppm(const fs::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) throw ShapeError("write_ppm: expected [H,W,3], got " + shape_str(image.shape()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << image.dim(1) << ' ' << image.dim(0) << "\n255\n";
  std::vector<char> raster(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const Real v = std::clamp(image[i], Real(0), Real(1));
    raster[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * Real(255))));
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

void write_pgm(const fs::path& path, const std::vector<std::uint8_t>& pixels, std::size_t height, std::size_t width) {
  if (pixels.size() != height * width) throw ShapeError("write_pgm: pixel count does not match dimensions");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Tensor read_wten(const fs::path& path) {
  const auto buf = slurp(path);
  if (buf.size() < 4 || std::string(buf.data(), 4) != "WTEN") throw DataError("not a raw tensor (bad magic): " + path.string());
  std::size_t pos = 4;
  const auto rank = get_u32(buf, pos, path);
  if (rank == 0 || rank > 8) throw DataError("raw tensor has invalid rank in " + path.string());
  Shape shape(rank);
  for (auto& d : shape) {
    d = get_u32(buf, pos, path);
    if (d == 0) throw DataError("raw tensor has a zero dimension in " + path.string());
  }
  const auto n = shape_numel(shape);
  if (buf.size() - pos != n * 4) throw DataError("raw tensor payload size mismatch in " + path.string());
  Tensor t(shape);
  for (auto& v : t.data()) v = static_cast<Real>(std::bit_cast<float>(get_u32(buf, pos, path)));
  return t;
}

void write_wten(const fs::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write("WTEN", 4);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (auto v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) throw DataError("failed writing " + path.string());
}

Tensor resize_nearest(const Tensor& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3) throw ShapeError("resize_nearest: expected [H,W,C], got " + shape_str(image.shape()));
  const std::size_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
  if (H == height && W == width) return image;
  Tensor out({height, width, C});
  for (std::size_t i = 0; i < height; ++i) {
    const std::size_t si = i * H / height;
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t sj = j * W / width;
      for (std::size_t c = 0; c < C; ++c) out[(i * width + j) * C + c] = image[(si * W + sj) * C + c];
    }
  }
  return out;
}

LabeledDataset load_dataset(const fs::path& image_dir, const fs::path& labels_csv, std::size_t height,
                            std::size_t width, std::vector<std::string> class_names) {
  std::ifstream in(labels_csv);
  if (!in) throw DataError("cannot open labels CSV " + labels_csv.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "image_id,label") {
    throw DataError(labels_csv.string() + ": header must be 'image_id,label'");
  }
  std::map<std::string, int> by_name;
  for (std::size_t i = 0; i < class_names.size(); ++i) by_name[class_names[i]] = static_cast<int>(i);

  std::map<std::string, int> rows;  // ordered by image id
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw DataError(labels_csv.string() + " row " + std::to_string(row) + ": expected two fields");
    }
    const auto id = trim(line.substr(0, comma));
    const auto label = trim(line.substr(comma + 1));
    if (id.empty()) throw DataError(labels_csv.string() + " row " + std::to_string(row) + ": empty image id");
    const auto it = by_name.find(label);
    if (it == by_name.end()) {
      throw DataError(labels_csv.string() + " row " + std::to_string(row) + ": unknown label '" + label + "'");
    }
    if (!rows.emplace(id, it->second).second) {
      throw DataError(labels_csv.string() + " row " + std::to_string(row) + ": duplicate image id '" + id + "'");
    }
  }
  LabeledDataset ds;
  ds.class_names = std::move(class_names);
  for (const auto& [id, label] : rows) {
    Tensor img;
    if (fs::exists(image_dir / (id + ".ppm"))) {
      img = read_ppm(image_dir / (id + ".ppm"));
    } else if (fs::exists(image_dir / (id + ".wten"))) {
      img = read_wten(image_dir / (id + ".wten"));
      if (img.rank() != 3 || img.dim(2) != 3) throw DataError("raw tensor " + id + " must be [H,W,3]");
      for (auto v : img.data())
        if (!(v >= Real(0) && v <= Real(1))) throw DataError("raw tensor " + id + " has values outside [0,1]");
    } else {
      throw DataError("missing image file for '" + id + "' in " + image_dir.string());
    }
    ds.images.push_back(resize_nearest(img, height, width));
    ds.labels.push_back(label);
    ds.ids.push_back(id);
    ds.augmentations.emplace_back();
  }
  ds.validate();
  return ds;
}

void save_dataset(const LabeledDataset& ds, const fs::path& image_dir, const fs::path& labels_csv) {
  fs::create_directories(image_dir);
  std::ofstream csv(labels_csv, std::ios::binary | std::ios::trunc);
  if (!csv) throw DataError("cannot write " + labels_csv.string());
  csv << "image_id,label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    write_ppm(image_dir / (ds.sample_name(i) + ".ppm"), ds.images[i]);
    csv << ds.sample_name(i) << ',' << ds.class_names.at(static_cast<std::size_t>(ds.labels[i])) << '\n';
  }
  if (!csv) throw DataError("failed writing " + labels_csv.string());
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& ds, double train_fraction,
                                                        std::uint64_t seed, bool stratified) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("split: train fraction must lie in (0,1)");
  Rng rng(derive_seed(seed, "split"));
  std::vector<std::size_t> train, val;
  auto take = [&](std::vector<std::size_t> idx) {
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    if (idx.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    val.insert(val.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  };
  if (stratified) {
    std::vector<std::vector<std::size_t>> per_class(ds.num_classes());
    for (std::size_t i = 0; i < ds.size(); ++i) per_class.at(static_cast<std::size_t>(ds.labels[i])).push_back(i);
    for (std::size_t k = 0; k < per_class.size(); ++k) {
      if (per_class[k].empty()) throw DataError("split: class '" + ds.class_names[k] + "' has no samples");
      take(per_class[k]);
    }
  } else {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    take(all);
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {ds.subset(train), ds.subset(val)};
}

Tensor flip(const Tensor& image, Flip axis) {
  const std::size_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j) {
      const std::size_t si = axis == Flip::Vertical ? H - 1 - i : i;
      const std::size_t sj = axis == Flip::Horizontal ? W - 1 - j : j;
      for (std::size_t c = 0; c < C; ++c) out[(i * W + j) * C + c] = image[(si * W + sj) * C + c];
    }
  return out;
}

Tensor rotate90(const Tensor& image, int quarter_turns) {
  Tensor cur = image;
  const int turns = ((quarter_turns % 4) + 4) % 4;
  for (int t = 0; t < turns; ++t) {
    const std::size_t H = cur.dim(0), W = cur.dim(1), C = cur.dim(2);
    Tensor out({W, H, C});
    // counter-clockwise: out[i][j] = cur[j][W-1-i]
    for (std::size_t i = 0; i < W; ++i)
      for (std::size_t j = 0; j < H; ++j)
        for (std::size_t c = 0; c < C; ++c) out[(i * H + j) * C + c] = cur[(j * W + (W - 1 - i)) * C + c];
    cur = std::move(out);
  }
  return cur;
}

LabeledDataset augment(const LabeledDataset& ds, int factor, std::uint64_t seed) {
  if (factor < 1) throw ConfigError("augment: factor must be at least 1");
  if (factor == 1) return ds;
  // The seven non-identity elements of the dihedral group of the square.
  struct Op {
    const char* name;
    int turns;
    bool hflip;
  };
  static constexpr Op kOps[] = {{"hflip", 0, true},      {"vflip", 2, true},       {"rot90", 1, false},
                                {"rot180", 2, false},    {"rot270", 3, false},     {"rot90+hflip", 1, true},
                                {"rot270+hflip", 3, true}};
  Rng rng(derive_seed(seed, "augment"));
  LabeledDataset out;
  out.class_names = ds.class_names;
  std::array<std::size_t, 7> order{0, 1, 2, 3, 4, 5, 6};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.images.push_back(ds.images[i]);
    out.labels.push_back(ds.labels[i]);
    out.ids.push_back(ds.ids[i]);
    out.augmentations.push_back(ds.augmentations[i]);
    const bool square = ds.images[i].dim(0) == ds.images[i].dim(1);
    std::shuffle(order.begin(), order.end(), rng);
    for (int f = 1; f < factor; ++f) {
      const auto slot = static_cast<std::size_t>(f - 1);
      Op op = kOps[order[slot % order.size()]];
      if (!square && op.turns % 2 == 1) op = Op{op.hflip ? "vflip" : "rot180", 2, op.hflip};
      Tensor img = rotate90(ds.images[i], op.turns);
      if (op.hflip) img = flip(img, Flip::Horizontal);
      std::string desc = op.name;
      // Distinguish repeats once every dihedral op has been used.
      if (slot >= order.size()) desc += "#" + std::to_string(slot / order.size());
      const auto& prev = ds.augmentations[i];
      out.images.push_back(std::move(img));
      out.labels.push_back(ds.labels[i]);
      out.ids.push_back(ds.ids[i]);
      out.augmentations.push_back(prev.empty() ? desc : prev + "+" + desc);
    }
  }
  return out;
}

WAGF_END_NAMESPACE
