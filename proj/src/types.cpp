#include "vtd/types.hpp"

#include <cmath>
#include <filesystem>

namespace vtd {

const char* to_string(Label v) { return v == Label::REAL ? "REAL" : "FAKE"; }

const char* to_string(Split v) {
  switch (v) {
    case Split::TRAIN: return "TRAIN";
    case Split::VAL: return "VAL";
    default: return "TEST";
  }
}

const char* to_string(DegradeOp v) {
  switch (v) {
    case DegradeOp::NONE: return "NONE";
    case DegradeOp::BIT_ERROR: return "BIT_ERROR";
    case DegradeOp::H265_ABR: return "H265_ABR";
    default: return "H265_CRF";
  }
}

Label label_from_string(const std::string& s) {
  if (s == "REAL") return Label::REAL;
  if (s == "FAKE") return Label::FAKE;
  throw Error("ParseError", "unknown label: " + s);
}

Split split_from_string(const std::string& s) {
  if (s == "TRAIN") return Split::TRAIN;
  if (s == "VAL") return Split::VAL;
  if (s == "TEST") return Split::TEST;
  throw Error("ParseError", "unknown split: " + s);
}

DegradeOp degrade_op_from_string(const std::string& s) {
  if (s == "NONE") return DegradeOp::NONE;
  if (s == "BIT_ERROR") return DegradeOp::BIT_ERROR;
  if (s == "H265_ABR") return DegradeOp::H265_ABR;
  if (s == "H265_CRF") return DegradeOp::H265_CRF;
  throw Error("ParseError", "unknown degradation operation: " + s);
}

std::string DegradationSpec::row_label() const {
  switch (operation) {
    case DegradeOp::NONE: return "Raw Data / None";
    case DegradeOp::BIT_ERROR: return "Bit Error / " + std::to_string(severity);
    case DegradeOp::H265_ABR: return "H.265 ABR / " + std::to_string(severity);
    default: return "H.265 CRF / " + std::to_string(severity);
  }
}

std::string Frame::violation() const {
  if (pixels.ndim() != 3 || pixels.dim(2) != 3) return "frame is not H x W x 3";
  if (height() < 8 || width() < 8) return "frame smaller than 8 x 8";
  if (!pixels.all_finite()) return "frame has non-finite pixels";
  if ((pixels.data < 0.0).any() || (pixels.data > 1.0).any())
    return "frame has pixels outside [0, 1]";
  if (timestamp_index < 0) return "negative timestamp index";
  return {};
}

std::string Clip::violation(int64_t expected_length) const {
  if (length() != expected_length)
    return "clip has " + std::to_string(length()) + " frames, expected " +
           std::to_string(expected_length);
  for (size_t i = 0; i < frames.size(); ++i) {
    if (auto v = frames[i].violation(); !v.empty())
      return "frame " + std::to_string(i) + ": " + v;
    if (i > 0 && frames[i].timestamp_index != frames[i - 1].timestamp_index + 1)
      return "frame timestamps not strictly consecutive at position " + std::to_string(i);
    if (i > 0 && !frames[i].pixels.same_shape(frames[i - 1].pixels))
      return "frame shapes differ within clip";
  }
  if (label == Label::FAKE && generator_tag.empty())
    return "FAKE clip lacks generator tag";
  if (!degradation.valid()) return "inconsistent degradation spec";
  return {};
}

std::string VideoRecord::source_id() const {
  return std::filesystem::path(path).stem().string();
}

std::vector<VideoRecord> Manifest::in_split(Split s) const {
  std::vector<VideoRecord> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(r);
  return out;
}

}  // namespace vtd
