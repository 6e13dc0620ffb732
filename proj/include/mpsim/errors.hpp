#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mpsim {

/// Bad construction parameters (degenerate sizes, non-positive rates, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input that references something that does not exist, or a lookup that
/// cannot be satisfied (unknown movement, mismatched window horizons).
class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// A numerical precondition that does not hold (singular routing system,
/// horizon too large for enumeration, series too short).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct Violation {
    std::string entity;
    std::string rule;
};

/// Raised when a constructed network fails its structural invariants.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<Violation> violations);

    [[nodiscard]] const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

}  // namespace mpsim
