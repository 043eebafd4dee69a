#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pcm {

enum class ErrorCode {
    invalid_input = 1,
    degenerate_labels,
    empty_events,
    non_convergence,
    numerical,
    bootstrap_failure,
    io,
    parse,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Iterative solver hit its cap; the best iterate found so far travels with the error.
template <class T>
class IterationLimitError : public Error {
public:
    IterationLimitError(const std::string& what, T best)
        : Error(ErrorCode::non_convergence, what), best_(std::move(best)) {}

    const T& best() const noexcept { return best_; }

private:
    T best_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, const std::string& what) {
    if (!condition) fail(ErrorCode::invalid_input, what);
}

}  // namespace pcm
