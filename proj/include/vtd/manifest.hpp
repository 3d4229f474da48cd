#pragma once

#include <string>
#include <vector>

#include "vtd/types.hpp"

namespace vtd {

// Manifest file format: UTF-8, line-delimited JSON. First line is a header
// object {"vtd_manifest": 1, "split_seed": ..., "split_ratio": [...]},
// every following line is one record:
//   {"path": ..., "label": "REAL"|"FAKE", "generator_tag": ...,
//    "split": "TRAIN"|"VAL"|"TEST", "frame_count": N}
// Degraded copies additionally carry "operation" and "severity".
// Field names are frozen by tests/golden/manifest_golden.jsonl.
std::string serialize_manifest(const Manifest& m);
Manifest parse_manifest(const std::string& text);

void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

// Empty result iff every invariant holds; one entry per violation, indexed
// by record where applicable. Violations are data, not errors.
std::vector<std::string> validate_manifest(const Manifest& m);

}  // namespace vtd
