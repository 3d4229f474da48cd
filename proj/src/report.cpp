#include "vtd/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "vtd/errors.hpp"
#include "vtd/rng.hpp"

namespace vtd {

using json = nlohmann::ordered_json;

json EvalReport::to_json() const {
  json j;
  j["version"] = 1;
  j["kind"] = kind;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["timestamp"] = timestamp;
  j["corner_label"] = corner_label;
  j["columns"] = columns;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    json jr;
    jr["label"] = r.label;
    json cells = json::array();
    for (const auto& c : r.cells) {
      if (c.has_value())
        cells.push_back(*c);
      else
        cells.push_back("FAILED");
    }
    jr["cells"] = cells;
    if (!r.note.empty()) jr["note"] = r.note;
    j["rows"].push_back(jr);
  }
  return j;
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport r;
  r.kind = j.at("kind").get<std::string>();
  r.seed = j.at("seed").get<uint64_t>();
  r.config_hash = j.value("config_hash", "");
  r.timestamp = j.value("timestamp", "");
  r.corner_label = j.value("corner_label", "Row");
  r.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& jr : j.at("rows")) {
    Row row;
    row.label = jr.at("label").get<std::string>();
    for (const auto& c : jr.at("cells")) {
      if (c.is_number())
        row.cells.push_back(c.get<double>());
      else
        row.cells.push_back(std::nullopt);
    }
    row.note = jr.value("note", "");
    r.rows.push_back(std::move(row));
  }
  return r;
}

std::string EvalReport::render_table() const {
  auto fmt_cell = [](const std::optional<double>& c) -> std::string {
    if (!c.has_value()) return "FAILED";
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << *c;
    return os.str();
  };

  std::vector<size_t> widths;
  widths.push_back(corner_label.size());
  for (const auto& r : rows) widths[0] = std::max(widths[0], r.label.size());
  for (size_t c = 0; c < columns.size(); ++c) {
    size_t w = columns[c].size();
    for (const auto& r : rows)
      if (c < r.cells.size()) w = std::max(w, fmt_cell(r.cells[c]).size());
    widths.push_back(w);
  }

  std::ostringstream os;
  auto pad = [&](const std::string& s, size_t w) {
    os << s << std::string(w - s.size(), ' ');
  };
  pad(corner_label, widths[0]);
  for (size_t c = 0; c < columns.size(); ++c) {
    os << " | ";
    pad(columns[c], widths[c + 1]);
  }
  os << "\n";
  size_t total = widths[0];
  for (size_t c = 0; c < columns.size(); ++c) total += 3 + widths[c + 1];
  os << std::string(total, '-') << "\n";
  for (const auto& r : rows) {
    pad(r.label, widths[0]);
    for (size_t c = 0; c < columns.size(); ++c) {
      os << " | ";
      pad(c < r.cells.size() ? fmt_cell(r.cells[c]) : std::string("-"), widths[c + 1]);
    }
    os << "\n";
  }
  return os.str();
}

void EvalReport::save(const std::string& base_path) const {
  {
    std::ofstream os(base_path + ".json", std::ios::binary | std::ios::trunc);
    if (!os) throw Error("IoError", "cannot write report: " + base_path + ".json");
    os << to_json().dump(2) << "\n";
  }
  {
    std::ofstream os(base_path + ".txt", std::ios::binary | std::ios::trunc);
    if (!os) throw Error("IoError", "cannot write report: " + base_path + ".txt");
    os << render_table();
  }
}

EvalReport EvalReport::load(const std::string& json_path) {
  std::ifstream is(json_path, std::ios::binary);
  if (!is) throw Error("IoError", "cannot read report: " + json_path);
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw Error("ParseError", "report is not valid JSON: " + json_path);
  return from_json(j);
}

std::string config_hash_of(const json& j) {
  const uint64_t h = fnv1a64(j.dump());
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace vtd
