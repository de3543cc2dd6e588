#include "fastqa/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "fastqa/common.hpp"

namespace fastqa {

namespace {

constexpr char kMagic[4] = {'F', 'Q', 'A', 'C'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, uint32_t(s.size()));
  out += s;
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw Error("checkpoint truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_str(out, ckpt.config.dump());
  put_u64(out, ckpt.adam_step);
  put_u32(out, uint32_t(ckpt.hashes.size()));
  for (const auto& [name, hash] : ckpt.hashes) {
    put_str(out, name);
    put_u64(out, hash);
  }
  put_u32(out, uint32_t(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_str(out, name);
    put_u32(out, uint32_t(t.shape.size()));
    for (int64_t d : t.shape) put_u64(out, uint64_t(d));
    for (float v : t.data) put_f32(out, v);
  }

  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write checkpoint: " + tmp);
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw Error("short write on checkpoint: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw Error("cannot move checkpoint into place: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::string buf;
  {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open checkpoint: " + path);
    buf.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  }
  Reader r{buf};
  r.need(4);
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw Error("not a checkpoint file: " + path);
  r.pos = 4;
  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != kVersion)
    throw Error("unsupported checkpoint version " + std::to_string(ckpt.version));
  std::string config_json = r.str();
  try {
    ckpt.config = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("corrupt checkpoint config: ") + e.what());
  }
  ckpt.adam_step = r.u64();
  uint32_t n_hashes = r.u32();
  for (uint32_t i = 0; i < n_hashes; ++i) {
    std::string name = r.str();
    ckpt.hashes[name] = r.u64();
  }
  uint32_t n_tensors = r.u32();
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw Error("corrupt checkpoint tensor rank");
    Shape shape(rank);
    for (uint32_t k = 0; k < rank; ++k) shape[k] = int64_t(r.u64());
    Tensor32 t = zeros<float>(shape);  // validates dims
    for (auto& v : t.data) v = r.f32();
    ckpt.tensors.emplace(std::move(name), std::move(t));
  }
  if (r.pos != buf.size()) throw Error("trailing bytes after checkpoint payload");
  return ckpt;
}

void require_hash(const Checkpoint& ckpt, const std::string& name, uint64_t expected) {
  auto it = ckpt.hashes.find(name);
  if (it == ckpt.hashes.end()) throw Error("checkpoint lacks integrity hash: " + name);
  if (it->second != expected)
    throw Error("checkpoint hash mismatch for " + name +
                ": file was built against a different artifact");
}

}  // namespace fastqa
