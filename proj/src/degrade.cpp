#include "vtd/degrade.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "vtd/errors.hpp"
#include "vtd/rng.hpp"

namespace vtd {

namespace fs = std::filesystem;

double severity_to_parameter(DegradeOp op, int severity) {
  if (op == DegradeOp::NONE) throw Error("Precondition", "operation must not be NONE");
  if (severity < 1 || severity > 3)
    throw UnknownSeverity("severity " + std::to_string(severity) + " outside {1,2,3}");
  const int i = severity - 1;
  switch (op) {
    case DegradeOp::BIT_ERROR: {
      static const double kBytesPerError[3] = {10e5, 5e5, 3e5};
      return kBytesPerError[i];
    }
    case DegradeOp::H265_ABR: {
      static const double kRateFraction[3] = {0.5, 0.25, 0.125};
      return kRateFraction[i];
    }
    default: {
      static const double kCrf[3] = {27, 33, 39};
      return kCrf[i];
    }
  }
}

std::vector<uint8_t> inject_bit_errors(const std::vector<uint8_t>& bitstream,
                                       int64_t bytes_per_error, uint64_t seed) {
  if (bytes_per_error < 1) throw Error("Precondition", "bytes_per_error must be >= 1");
  std::vector<uint8_t> out = bitstream;
  Rng rng(seed);
  const int64_t blocks = static_cast<int64_t>(bitstream.size()) / bytes_per_error;
  for (int64_t b = 0; b < blocks; ++b) {
    const uint64_t bit = rng.uniform_int(static_cast<uint64_t>(bytes_per_error) * 8);
    const int64_t byte_index = b * bytes_per_error + static_cast<int64_t>(bit / 8);
    out[static_cast<size_t>(byte_index)] ^= static_cast<uint8_t>(1u << (bit % 8));
  }
  return out;
}

AbrOutcome transcode_abr_file(const Transcoder& tc, const std::string& in,
                              const std::string& out, double fraction) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw Error("Precondition", "bitrate fraction must be in (0, 1]");
  AbrOutcome r;
  const ProbeInfo src = tc.probe(in);
  if (src.stream_bit_rate <= 0.0)
    throw TranscodeFailed("cannot measure original bitrate of " + in);
  r.original_bit_rate = src.stream_bit_rate;
  r.target_bit_rate = fraction * src.stream_bit_rate;
  tc.transcode_abr(in, out, static_cast<int64_t>(std::llround(r.target_bit_rate)));
  r.achieved_bit_rate = tc.probe(out).stream_bit_rate;
  return r;
}

void transcode_crf_file(const Transcoder& tc, const std::string& in,
                        const std::string& out, int crf) {
  if (crf < 0 || crf > 51) throw Error("Precondition", "crf outside [0, 51]");
  tc.transcode_crf(in, out, crf);
}

int64_t bit_error_file(const Transcoder& tc, const std::string& in,
                       const std::string& out, int64_t bytes_per_error, uint64_t seed) {
  const ProbeInfo src = tc.probe(in);
  const std::string stream_path = temp_path(".h265");
  const std::string corrupt_path = temp_path(".h265");
  tc.extract_stream(in, stream_path);

  std::ifstream is(stream_path, std::ios::binary);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  is.close();
  const std::vector<uint8_t> corrupted = inject_bit_errors(bytes, bytes_per_error, seed);
  const int64_t flips = static_cast<int64_t>(bytes.size()) / bytes_per_error;
  std::ofstream os(corrupt_path, std::ios::binary | std::ios::trunc);
  os.write(reinterpret_cast<const char*>(corrupted.data()),
           static_cast<std::streamsize>(corrupted.size()));
  os.close();

  try {
    tc.mux_stream(corrupt_path, out, src.fps_string());
  } catch (...) {
    std::error_code ec;
    fs::remove(stream_path, ec);
    fs::remove(corrupt_path, ec);
    throw;
  }
  std::error_code ec;
  fs::remove(stream_path, ec);
  fs::remove(corrupt_path, ec);
  return flips;
}

namespace {

struct Job {
  const VideoRecord* record;
  DegradationSpec spec;
};

std::string variant_dir_name(const DegradationSpec& s) {
  std::string op;
  switch (s.operation) {
    case DegradeOp::BIT_ERROR: op = "biterror"; break;
    case DegradeOp::H265_ABR: op = "abr"; break;
    case DegradeOp::H265_CRF: op = "crf"; break;
    default: op = "none"; break;
  }
  return op + "_" + std::to_string(s.severity);
}

}  // namespace

DegradeResult degrade_corpus(const Transcoder& tc, const Manifest& manifest,
                             const DegradePlan& plan, const std::string& out_dir) {
  DegradeResult result;
  result.manifest.split_seed = manifest.split_seed;
  result.manifest.split_ratio = manifest.split_ratio;

  for (const auto& spec : plan.variants) {
    if (spec.is_none() || !spec.valid())
      throw Error("Precondition", "degradation plan entries need operation + severity 1..3");
    fs::create_directories(fs::path(out_dir) / variant_dir_name(spec));
  }

  std::vector<Job> jobs;
  for (const auto& rec : manifest.records) {
    if (std::find(plan.splits.begin(), plan.splits.end(), rec.split) == plan.splits.end())
      continue;
    for (const auto& spec : plan.variants) jobs.push_back(Job{&rec, spec});
  }

  struct Slot {
    bool ok = false;
    VideoRecord record;
    DegradeFailure failure;
  };
  std::vector<Slot> slots(jobs.size());

  auto run_job = [&](size_t j) {
    const Job& job = jobs[j];
    const VideoRecord& src = *job.record;
    // variant suffix keeps source ids unique across the degraded manifest
    const std::string name = fs::path(src.path).stem().string() + "__" +
                             variant_dir_name(job.spec) +
                             fs::path(src.path).extension().string();
    const std::string out_path =
        (fs::path(out_dir) / variant_dir_name(job.spec) / name).string();
    try {
      const double param = severity_to_parameter(job.spec.operation, job.spec.severity);
      switch (job.spec.operation) {
        case DegradeOp::H265_ABR:
          transcode_abr_file(tc, src.path, out_path, param);
          break;
        case DegradeOp::H265_CRF:
          transcode_crf_file(tc, src.path, out_path, static_cast<int>(param));
          break;
        case DegradeOp::BIT_ERROR: {
          const uint64_t seed =
              Rng(plan.seed).fork(src.path + "#" + variant_dir_name(job.spec)).seed();
          bit_error_file(tc, src.path, out_path, static_cast<int64_t>(param), seed);
          break;
        }
        default:
          break;
      }
      VideoRecord out_rec = src;
      out_rec.path = out_path;
      out_rec.degradation = job.spec;
      // container frame count survives degradation even when some frames
      // only decode with concealment
      out_rec.frame_count = tc.probe(out_path).frame_count;
      slots[j].ok = true;
      slots[j].record = std::move(out_rec);
    } catch (const std::exception& e) {
      slots[j].failure = DegradeFailure{src.path, job.spec, e.what()};
    }
  };

  const int workers = std::max(1, plan.workers);
  if (workers == 1 || jobs.size() <= 1) {
    for (size_t j = 0; j < jobs.size(); ++j) run_job(j);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          const size_t j = next.fetch_add(1);
          if (j >= jobs.size()) return;
          run_job(j);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  for (auto& slot : slots) {
    if (slot.ok)
      result.manifest.records.push_back(std::move(slot.record));
    else
      result.failures.push_back(std::move(slot.failure));
  }
  return result;
}

}  // namespace vtd
