#include "lgg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "lgg/errors.hpp"

namespace lgg {

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t config_digest(const ModelConfig& config) { return fnv1a64(config.canonical_text()); }

std::uint64_t montage_digest(const MontageGraph& montage) { return fnv1a64(serialize_montage(montage)); }

namespace {

constexpr char kMagic[4] = {'L', 'G', 'G', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string section = "header";

  void need(std::size_t n) {
    if (pos + n > buf.size()) {
      throw DataError("checkpoint truncated in section '" + section + "'");
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, ModelParams& params, std::uint64_t cfg_digest,
                     std::uint64_t mnt_digest) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, cfg_digest);
  put_u64(out, mnt_digest);

  std::uint32_t count = 0;
  params.for_each_state([&](const std::string&, Tensor&) { ++count; });
  put_u32(out, count);

  params.for_each_state([&](const std::string& name, Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::int64_t e : t.shape()) put_u64(out, static_cast<std::uint64_t>(e));
    for (std::int64_t i = 0; i < t.size(); ++i) put_f64(out, t[i]);
  });

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open checkpoint file for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint file: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf};
  r.need(4);
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw DataError("not a checkpoint file (bad magic): " + path);
  }
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }

  Checkpoint ckpt;
  ckpt.config_digest = r.u64();
  ckpt.montage_digest = r.u64();
  const std::uint32_t count = r.u32();

  for (std::uint32_t i = 0; i < count; ++i) {
    r.section = "tensor " + std::to_string(i) + " name";
    const std::uint32_t name_len = r.u32();
    if (name_len > 4096) throw DataError("checkpoint tensor name length out of range");
    const std::string name = r.bytes(name_len);
    r.section = "tensor '" + name + "'";
    const std::uint32_t rank = r.u32();
    if (rank > 16) throw DataError("checkpoint tensor rank out of range");
    std::vector<std::int64_t> shape;
    std::int64_t n = 1;
    for (std::uint32_t a = 0; a < rank; ++a) {
      const std::uint64_t e = r.u64();
      if (e == 0 || e > (1ull << 32)) throw DataError("checkpoint tensor extent out of range");
      shape.push_back(static_cast<std::int64_t>(e));
      n *= static_cast<std::int64_t>(e);
    }
    Tensor t(shape);
    for (std::int64_t k = 0; k < n; ++k) t[k] = r.f64();
    ckpt.tensors.emplace_back(name, std::move(t));
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, ModelParams& params) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : ckpt.tensors) by_name[name] = &t;

  params.for_each_state([&](const std::string& name, Tensor& t) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint is missing tensor '" + name + "'");
    if (it->second->shape() != t.shape()) {
      throw DataError("checkpoint tensor '" + name + "' has shape " + it->second->shape_str() +
                      ", expected " + t.shape_str());
    }
    t = *it->second;
    t.node = kNoNode;
  });
}

}  // namespace lgg
