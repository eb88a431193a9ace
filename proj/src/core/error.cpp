#include "core/error.hpp"

namespace fracbsde {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::domain: return "domain";
        case ErrorCode::invalid_coefficient: return "invalid_coefficient";
        case ErrorCode::constant_violation: return "constant_violation";
        case ErrorCode::precondition: return "precondition";
        case ErrorCode::numerical: return "numerical";
        case ErrorCode::factorization: return "factorization";
        case ErrorCode::ill_conditioned: return "ill_conditioned";
        case ErrorCode::generator: return "generator";
        case ErrorCode::divergence: return "divergence";
        case ErrorCode::domain_truncation: return "domain_truncation";
        case ErrorCode::infeasible: return "infeasible";
        case ErrorCode::io: return "io";
    }
    return "unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_argument:
        case ErrorCode::domain:
        case ErrorCode::invalid_coefficient:
        case ErrorCode::constant_violation:
        case ErrorCode::precondition:
        case ErrorCode::io:
            return true;
        default:
            return false;
    }
}

}  // namespace fracbsde
