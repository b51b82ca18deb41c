#include "ppgcn/error.hpp"

namespace ppgcn {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::UnknownType: return "unknown_type";
    case ErrorCode::SchemaViolation: return "schema_violation";
    case ErrorCode::MissingNode: return "missing_node";
    case ErrorCode::Duplicate: return "duplicate";
    case ErrorCode::ShapeMismatch: return "shape_mismatch";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::Io: return "io_error";
    case ErrorCode::SignatureMismatch: return "signature_mismatch";
    case ErrorCode::StaleCache: return "stale_cache";
  }
  return "unknown";
}

}  // namespace ppgcn
