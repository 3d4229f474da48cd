#pragma once

#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "vtd/tensor.hpp"

namespace vtd {

// Single on-disk container for every model artifact: predictor checkpoints,
// full detector checkpoints, and externally supplied embedding matrices.
//
// Layout (little-endian):
//   "VTDC" | u32 format_version | u32 meta_len | meta (UTF-8 JSON)
//   u32 tensor_count | per tensor: u32 name_len | name | u32 ndim | i64 dims | f64 data
//
// meta must carry a "version" field; load() rejects files without one.
class Checkpoint {
 public:
  static constexpr uint32_t kFormatVersion = 1;

  nlohmann::ordered_json meta = nlohmann::ordered_json::object();

  void add(const std::string& name, Tensor t);
  bool has(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  const std::vector<std::pair<std::string, Tensor>>& tensors() const { return tensors_; }

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // byte-level comparison of the named tensor payloads (frozen-component checks)
  bool tensors_bitwise_equal(const Checkpoint& other) const;

 private:
  std::vector<std::pair<std::string, Tensor>> tensors_;
};

}  // namespace vtd
