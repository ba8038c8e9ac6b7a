#include "wagf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "wagf/errors.hpp"

WAGF_BEGIN_NAMESPACE

namespace {

constexpr char kMagic[4] = {'W', 'A', 'G', 'F'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void tensor(const std::string& name, const Tensor& t, bool wide) {
    str(name);
    u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) u32(static_cast<std::uint32_t>(d));
    for (auto v : t.data()) {
      if (wide) {
        u64(std::bit_cast<std::uint64_t>(static_cast<double>(v)));
      } else {
        u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : data_(std::move(data)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw CheckpointError("corrupt checkpoint: truncated file");
  }
  bool done() const { return pos_ == data_.size(); }
  std::size_t pos() const { return pos_; }
  const char* at() const { return data_.data() + pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Model& model, const FusionState& fusion, const std::filesystem::path& path,
                     const nlohmann::json& metadata) {
  const bool wide = std::string(kDtypeName) == "f64";
  nlohmann::json header = {{"config", model.config().to_json()},
                           {"dtype", kDtypeName},
                           {"fusion", {{"decay", static_cast<double>(fusion.decay)}, {"initialized", fusion.initialized}}},
                           {"init", Model::init_scheme()},
                           {"metadata", metadata}};
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(header.dump());
  const auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size() + 2));
  for (const auto* p : params) w.tensor(p->name, p->value, wide);
  w.tensor("fusion.g_w_ema", fusion.g_w_ema, wide);
  w.tensor("fusion.g_sa_ema", fusion.g_sa_ema, wide);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  const auto& buf = w.buffer();
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  r.need(4);
  if (std::memcmp(r.at(), kMagic, 4) != 0) throw CheckpointError("not a checkpoint (bad magic): " + path.string());
  r.skip(4);
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  const std::string dtype = header.value("dtype", "f32");
  if (dtype != "f32" && dtype != "f64") throw CheckpointError("unknown payload dtype " + dtype);
  const bool wide = dtype == "f64";

  ModelConfig cfg;
  try {
    cfg = ModelConfig::from_json(header.at("config"));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  Checkpoint ck{Model(cfg), FusionState(), header.value("metadata", nlohmann::json::object())};
  const auto& fj = header.value("fusion", nlohmann::json::object());
  ck.fusion = ck.model.make_fusion_state(static_cast<Real>(fj.value("decay", 0.9)));
  ck.fusion.initialized = fj.value("initialized", false);

  std::map<std::string, Tensor*> targets;
  for (auto* p : ck.model.parameters()) targets[p->name] = &p->value;
  targets["fusion.g_w_ema"] = &ck.fusion.g_w_ema;
  targets["fusion.g_sa_ema"] = &ck.fusion.g_sa_ema;

  const auto count = r.u32();
  if (count != targets.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, config expects " +
                          std::to_string(targets.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = r.str();
    const auto it = targets.find(name);
    if (it == targets.end()) throw CheckpointError("unexpected tensor '" + name + "' in checkpoint");
    const auto rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    Tensor& dst = *it->second;
    if (shape != dst.shape()) {
      throw CheckpointError("tensor '" + name + "' has shape " + shape_str(shape) + ", config expects " +
                            shape_str(dst.shape()));
    }
    r.need(dst.size() * (wide ? 8 : 4));
    for (auto& v : dst.data()) {
      v = wide ? static_cast<Real>(std::bit_cast<double>(r.u64()))
               : static_cast<Real>(std::bit_cast<float>(r.u32()));
    }
    targets.erase(it);
  }
  if (!r.done()) throw CheckpointError("corrupt checkpoint: trailing bytes");
  return ck;
}

WAGF_END_NAMESPACE
