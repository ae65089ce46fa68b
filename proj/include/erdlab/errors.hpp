#pragma once

#include <stdexcept>
#include <string>

namespace erdlab {

/// Thrown when a problem or training specification violates its invariants.
class SpecError : public std::invalid_argument {
public:
    explicit SpecError(const std::string& what) : std::invalid_argument(what) {}
};

/// Thrown when a numerical routine cannot produce a trustworthy result
/// (SVD failure, integrator step underflow, divergence).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when two objects that must agree (spaces, families, shapes) do not.
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace erdlab
