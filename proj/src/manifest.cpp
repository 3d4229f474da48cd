#include "vtd/manifest.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace vtd {

using json = nlohmann::ordered_json;

namespace {

json record_to_json(const VideoRecord& r) {
  json j;
  j["path"] = r.path;
  j["label"] = to_string(r.label);
  j["generator_tag"] = r.generator_tag;
  j["split"] = to_string(r.split);
  j["frame_count"] = r.frame_count;
  if (!r.degradation.is_none()) {
    j["operation"] = to_string(r.degradation.operation);
    j["severity"] = r.degradation.severity;
  }
  return j;
}

VideoRecord record_from_json(const json& j) {
  VideoRecord r;
  r.path = j.at("path").get<std::string>();
  r.label = label_from_string(j.at("label").get<std::string>());
  r.generator_tag = j.at("generator_tag").get<std::string>();
  r.split = split_from_string(j.at("split").get<std::string>());
  r.frame_count = j.at("frame_count").get<int64_t>();
  if (j.contains("operation")) {
    r.degradation.operation = degrade_op_from_string(j.at("operation").get<std::string>());
    r.degradation.severity = j.at("severity").get<int>();
  }
  return r;
}

}  // namespace

std::string serialize_manifest(const Manifest& m) {
  std::ostringstream os;
  json header;
  header["vtd_manifest"] = 1;
  header["split_seed"] = m.split_seed;
  header["split_ratio"] = m.split_ratio;
  os << header.dump() << "\n";
  for (const auto& r : m.records) os << record_to_json(r).dump() << "\n";
  return os.str();
}

Manifest parse_manifest(const std::string& text) {
  Manifest m;
  std::istringstream is(text);
  std::string line;
  bool have_header = false;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw Error("ParseError", "manifest line " + std::to_string(line_no) + " is not valid JSON");
    if (!have_header) {
      if (!j.contains("vtd_manifest"))
        throw Error("ParseError", "manifest lacks header line");
      m.split_seed = j.value("split_seed", uint64_t{0});
      if (j.contains("split_ratio")) {
        auto r = j.at("split_ratio");
        for (int i = 0; i < 3; ++i) m.split_ratio[static_cast<size_t>(i)] = r.at(i).get<double>();
      }
      have_header = true;
      continue;
    }
    m.records.push_back(record_from_json(j));
  }
  if (!have_header) throw Error("ParseError", "empty manifest file");
  return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("IoError", "cannot write manifest: " + path);
  os << serialize_manifest(m);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("IoError", "cannot read manifest: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_manifest(ss.str());
}

std::vector<std::string> validate_manifest(const Manifest& m) {
  std::vector<std::string> out;
  const double ratio_sum = m.split_ratio[0] + m.split_ratio[1] + m.split_ratio[2];
  if (std::abs(ratio_sum - 1.0) > 1e-9)
    out.push_back("manifest: split ratios sum != 1");
  for (double r : m.split_ratio)
    if (r < 0.0) out.push_back("manifest: negative split ratio");

  std::set<std::string> seen_ids;
  for (size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    const std::string where = "record " + std::to_string(i);
    if (r.path.empty()) out.push_back(where + ": empty path");
    if (r.frame_count <= 0) out.push_back(where + ": non-positive frame count");
    if (r.label == Label::REAL && !r.generator_tag.empty())
      out.push_back(where + ": REAL record has nonempty generator_tag '" + r.generator_tag + "'");
    if (r.label == Label::FAKE && r.generator_tag.empty())
      out.push_back(where + ": FAKE record lacks generator_tag");
    if (!r.degradation.valid())
      out.push_back(where + ": degradation severity inconsistent with operation");
    if (!r.path.empty() && !seen_ids.insert(r.source_id()).second)
      out.push_back(where + ": duplicate source id '" + r.source_id() + "'");
  }
  return out;
}

}  // namespace vtd
