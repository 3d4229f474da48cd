#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace vtd {

// Operational error with a stable machine-readable code. The CLI prints
// "error: <code>: <detail>" and exits 1; tests match on code().
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

#define VTD_ERROR_TYPE(Name)                                  \
  class Name : public Error {                                 \
   public:                                                    \
    explicit Name(const std::string& detail)                  \
        : Error(#Name, detail) {}                             \
  }

VTD_ERROR_TYPE(DecodeError);
VTD_ERROR_TYPE(EmptyVideo);
VTD_ERROR_TYPE(TranscoderUnavailable);
VTD_ERROR_TYPE(TranscodeFailed);
VTD_ERROR_TYPE(UnknownSeverity);
VTD_ERROR_TYPE(LabelLeakError);
VTD_ERROR_TYPE(ShapeMismatch);
VTD_ERROR_TYPE(ClipTooShort);
VTD_ERROR_TYPE(EmptySequence);
VTD_ERROR_TYPE(DimensionMismatch);
VTD_ERROR_TYPE(NonPositiveVariance);
VTD_ERROR_TYPE(LengthMismatch);
VTD_ERROR_TYPE(MissingSplit);
VTD_ERROR_TYPE(FrozenComponentMissing);
VTD_ERROR_TYPE(EmptyEvalSet);
VTD_ERROR_TYPE(MissingBaseline);
VTD_ERROR_TYPE(UsageError);

#undef VTD_ERROR_TYPE

}  // namespace vtd
