#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtd/transcoder.hpp"
#include "vtd/types.hpp"

namespace vtd {

// Severity -> operation parameter. BIT_ERROR yields bytes-per-error
// {10,5,3}x10^5, H265_ABR the bitrate fraction {0.5,0.25,0.125}, H265_CRF the
// quality factor {27,33,39}. Total on the 3x3 domain; UnknownSeverity outside.
double severity_to_parameter(DegradeOp op, int severity);

// Flips exactly one uniformly random bit in every complete bytes_per_error
// block; the trailing partial block is untouched. Deterministic per seed.
std::vector<uint8_t> inject_bit_errors(const std::vector<uint8_t>& bitstream,
                                       int64_t bytes_per_error, uint64_t seed);

struct AbrOutcome {
  double original_bit_rate = 0.0;  // measured, bits/s
  double target_bit_rate = 0.0;
  double achieved_bit_rate = 0.0;
};

// H.265 ABR re-encode at fraction * measured original stream bitrate.
// Measured rates are returned so callers can check the +-15% encoder tolerance.
AbrOutcome transcode_abr_file(const Transcoder& tc, const std::string& in,
                              const std::string& out, double fraction);

// H.265 CRF re-encode, crf in [0, 51].
void transcode_crf_file(const Transcoder& tc, const std::string& in,
                        const std::string& out, int crf);

// Bitstream-level corruption: extract the H.265 elementary stream, flip one
// bit per block, re-mux. Returns the number of flipped bits.
int64_t bit_error_file(const Transcoder& tc, const std::string& in,
                       const std::string& out, int64_t bytes_per_error, uint64_t seed);

struct DegradeFailure {
  std::string source_path;
  DegradationSpec spec;
  std::string reason;
};

struct DegradeResult {
  Manifest manifest;  // one record per successfully degraded output
  std::vector<DegradeFailure> failures;
};

struct DegradePlan {
  std::vector<DegradationSpec> variants;  // one output per (record, variant)
  uint64_t seed = 0;                      // bit-error position sampling
  std::vector<Split> splits{Split::TEST}; // which source splits to degrade
  int workers = 1;
};

// Produces out_dir/<op>_<severity>/<name>.mp4 per (record, variant); originals
// untouched. Per-file failures are collected, not fatal.
DegradeResult degrade_corpus(const Transcoder& tc, const Manifest& manifest,
                             const DegradePlan& plan, const std::string& out_dir);

}  // namespace vtd
