#include "vtd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vtd/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes little-endian storage");

namespace vtd {

namespace {

template <typename T>
void write_pod(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error("CheckpointCorrupt", "truncated file");
  return v;
}

}  // namespace

void Checkpoint::add(const std::string& name, Tensor t) {
  for (auto& [n, _] : tensors_)
    if (n == name) throw Error("CheckpointDuplicate", "tensor already present: " + name);
  tensors_.emplace_back(name, std::move(t));
}

bool Checkpoint::has(const std::string& name) const {
  for (auto& [n, _] : tensors_)
    if (n == name) return true;
  return false;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (auto& [n, t] : tensors_)
    if (n == name) return t;
  throw Error("CheckpointMissingTensor", name);
}

Tensor& Checkpoint::get(const std::string& name) {
  for (auto& [n, t] : tensors_)
    if (n == name) return t;
  throw Error("CheckpointMissingTensor", name);
}

void Checkpoint::save(const std::string& path) const {
  if (!meta.contains("version"))
    throw Error("CheckpointMeta", "meta must carry a version field");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("CheckpointIo", "cannot open for write: " + path);
  os.write("VTDC", 4);
  write_pod<uint32_t>(os, kFormatVersion);
  const std::string meta_str = meta.dump();
  write_pod<uint32_t>(os, static_cast<uint32_t>(meta_str.size()));
  os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  write_pod<uint32_t>(os, static_cast<uint32_t>(tensors_.size()));
  for (const auto& [name, t] : tensors_) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint32_t>(os, static_cast<uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) write_pod<int64_t>(os, t.dim(i));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(t.numel())));
  }
  if (!os) throw Error("CheckpointIo", "write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("CheckpointIo", "cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "VTDC", 4) != 0)
    throw Error("CheckpointCorrupt", "bad magic: " + path);
  const uint32_t fmt = read_pod<uint32_t>(is);
  if (fmt != kFormatVersion)
    throw Error("CheckpointVersion", "unsupported format version " + std::to_string(fmt));
  const uint32_t meta_len = read_pod<uint32_t>(is);
  std::string meta_str(meta_len, '\0');
  is.read(meta_str.data(), meta_len);
  if (!is) throw Error("CheckpointCorrupt", "truncated meta");
  Checkpoint ck;
  ck.meta = nlohmann::ordered_json::parse(meta_str, nullptr, false);
  if (ck.meta.is_discarded()) throw Error("CheckpointCorrupt", "meta is not valid JSON");
  if (!ck.meta.contains("version"))
    throw Error("CheckpointMeta", "meta lacks mandatory version field: " + path);
  const uint32_t count = read_pod<uint32_t>(is);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_pod<uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t ndim = read_pod<uint32_t>(is);
    std::vector<int64_t> shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) shape[d] = read_pod<int64_t>(is);
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(t.numel())));
    if (!is) throw Error("CheckpointCorrupt", "truncated tensor data: " + name);
    ck.tensors_.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

bool Checkpoint::tensors_bitwise_equal(const Checkpoint& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].first != other.tensors_[i].first) return false;
    if (!tensors_[i].second.bitwise_equal(other.tensors_[i].second)) return false;
  }
  return true;
}

}  // namespace vtd
