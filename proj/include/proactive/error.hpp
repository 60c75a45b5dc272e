#ifndef PROACTIVE_ERROR_HPP
#define PROACTIVE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace proactive {

/// Machine-readable failure categories. The CLI prints these verbatim as
/// `E_<NAME>` and maps each one to a distinct exit status.
enum class ErrorCode {
  kDimension,
  kNumeric,
  kContract,
  kParse,
  kData,
  kVocab,
  kConfig,
  kIo,
  kNoCheckpoint,
  kDiverged,
  kGradCheck,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimension: return "E_DIMENSION";
    case ErrorCode::kNumeric: return "E_NUMERIC";
    case ErrorCode::kContract: return "E_CONTRACT";
    case ErrorCode::kParse: return "E_PARSE";
    case ErrorCode::kData: return "E_DATA";
    case ErrorCode::kVocab: return "E_VOCAB";
    case ErrorCode::kConfig: return "E_CONFIG";
    case ErrorCode::kIo: return "E_IO";
    case ErrorCode::kNoCheckpoint: return "E_NO_CKPT";
    case ErrorCode::kDiverged: return "E_DIVERGED";
    case ErrorCode::kGradCheck: return "E_GRADCHECK";
  }
  return "E_UNKNOWN";
}

inline int error_exit_status(ErrorCode code) { return 10 + static_cast<int>(code); }

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace proactive

#endif  // PROACTIVE_ERROR_HPP
