#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fracbsde {

enum class ErrorCode {
    invalid_argument,
    domain,
    invalid_coefficient,
    constant_violation,
    precondition,
    numerical,
    factorization,
    ill_conditioned,
    generator,
    divergence,
    domain_truncation,
    infeasible,
    io,
};

const char* to_string(ErrorCode code) noexcept;

/// True for errors caused by bad inputs (as opposed to numerical breakdown).
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Cholesky breakdown; carries the offending pivot (0-based row of the factor).
class FactorizationError : public Error {
public:
    FactorizationError(std::size_t pivot, const std::string& what)
        : Error(ErrorCode::factorization, what), pivot_(pivot) {}

    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) throw Error(code, what);
}

}  // namespace fracbsde
