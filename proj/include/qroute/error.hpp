#pragma once

#include <stdexcept>
#include <string>

namespace qroute {

enum class ErrorCode {
    UNCONNECTABLE,
    INVALID_PARAM,
    INVALID_DEMAND,
    NO_AUXILIARY_PAIR,
    NOT_ADJACENT,
    DIMENSION_MISMATCH,
    DIMENSION_TOO_SMALL,
    INSUFFICIENT_POINTS,
    EMPTY_ROLLOUTS,
    NONCONVERGENCE,
    ACTION_SET_MISMATCH,
    SHAPE_MISMATCH,
    NO_FEASIBLE_ACTION,
    NO_PATH,
    MISSING_RUNS,
    IO_ERROR,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::UNCONNECTABLE: return "UNCONNECTABLE";
        case ErrorCode::INVALID_PARAM: return "INVALID_PARAM";
        case ErrorCode::INVALID_DEMAND: return "INVALID_DEMAND";
        case ErrorCode::NO_AUXILIARY_PAIR: return "NO_AUXILIARY_PAIR";
        case ErrorCode::NOT_ADJACENT: return "NOT_ADJACENT";
        case ErrorCode::DIMENSION_MISMATCH: return "DIMENSION_MISMATCH";
        case ErrorCode::DIMENSION_TOO_SMALL: return "DIMENSION_TOO_SMALL";
        case ErrorCode::INSUFFICIENT_POINTS: return "INSUFFICIENT_POINTS";
        case ErrorCode::EMPTY_ROLLOUTS: return "EMPTY_ROLLOUTS";
        case ErrorCode::NONCONVERGENCE: return "NONCONVERGENCE";
        case ErrorCode::ACTION_SET_MISMATCH: return "ACTION_SET_MISMATCH";
        case ErrorCode::SHAPE_MISMATCH: return "SHAPE_MISMATCH";
        case ErrorCode::NO_FEASIBLE_ACTION: return "NO_FEASIBLE_ACTION";
        case ErrorCode::NO_PATH: return "NO_PATH";
        case ErrorCode::MISSING_RUNS: return "MISSING_RUNS";
        case ErrorCode::IO_ERROR: return "IO_ERROR";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

}  // namespace qroute
