#pragma once

#include <cmath>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace vtd {

// Result table for evaluation protocols. Serialized as machine-readable JSON
// plus an aligned plain-text table. Byte-identical across re-runs with the
// same inputs and seed: timestamp stays empty unless explicitly stamped.
struct EvalReport {
  struct Row {
    std::string label;
    std::vector<std::optional<double>> cells;  // nullopt renders as FAILED
    std::string note;
  };

  std::string kind;  // eval | cross_generator | robustness | ablation
  uint64_t seed = 0;
  std::string config_hash;
  std::string timestamp;
  std::string corner_label = "Row";  // top-left header cell
  std::vector<std::string> columns;
  std::vector<Row> rows;

  nlohmann::ordered_json to_json() const;
  static EvalReport from_json(const nlohmann::ordered_json& j);
  std::string render_table() const;

  // writes <base>.json and <base>.txt
  void save(const std::string& base_path) const;
  static EvalReport load(const std::string& json_path);
};

// stable short hash of a canonical config encoding
std::string config_hash_of(const nlohmann::ordered_json& j);

}  // namespace vtd
