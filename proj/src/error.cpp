#include "pcm/error.hpp"

namespace pcm {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::invalid_input: return "invalid input";
    case ErrorCode::degenerate_labels: return "degenerate labels";
    case ErrorCode::empty_events: return "no events";
    case ErrorCode::non_convergence: return "non-convergence";
    case ErrorCode::numerical: return "numerical failure";
    case ErrorCode::bootstrap_failure: return "bootstrap failure";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::parse: return "parse error";
    }
    return "unknown error";
}

}  // namespace pcm
