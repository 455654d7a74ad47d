#pragma once

#include <stdexcept>
#include <string>

namespace parajacobi {

enum class ErrorKind {
    config,
    ambiguity,
    unsupported_case,
    consistency,
    extraction,
    out_of_scope,
    singular_point,
    underflow,
    outside_lambda_minus,
    j0_too_small,
    degenerate,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::config: return "config";
    case ErrorKind::ambiguity: return "ambiguity";
    case ErrorKind::unsupported_case: return "unsupported_case";
    case ErrorKind::consistency: return "consistency";
    case ErrorKind::extraction: return "extraction";
    case ErrorKind::out_of_scope: return "out_of_scope";
    case ErrorKind::singular_point: return "singular_point";
    case ErrorKind::underflow: return "underflow";
    case ErrorKind::outside_lambda_minus: return "outside_lambda_minus";
    case ErrorKind::j0_too_small: return "j0_too_small";
    case ErrorKind::degenerate: return "degenerate";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace parajacobi
