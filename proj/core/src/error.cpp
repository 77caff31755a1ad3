#include "srlp/error.hpp"

namespace srlp {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::Validation: return "validation_error";
    case ErrorCode::Io: return "io_error";
    case ErrorCode::NoEntryPrice: return "no_entry_price";
    case ErrorCode::NoExitPrice: return "no_exit_price";
    case ErrorCode::EmptyPartition: return "empty_partition";
    case ErrorCode::ShapeMismatch: return "shape_mismatch";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::MissingCache: return "missing_cache";
    case ErrorCode::Unfitted: return "unfitted";
    case ErrorCode::NotDefined: return "not_defined";
    case ErrorCode::Ruin: return "ruin";
  }
  return "unknown";
}

}  // namespace srlp
