// Error taxonomy shared by all wfsim modules. Everything derives from
// wfsim::Error so callers can catch the library as a whole; the subtypes map
// onto the distinct failure categories surfaced by the CLI exit codes.
#pragma once

#include <stdexcept>
#include <string>

namespace wfsim {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension/name mismatches in register layouts or matrix shapes.
struct LayoutError : Error {
    using Error::Error;
};

// Operator applied to a state outside its domain (protocol misuse).
struct DomainError : Error {
    using Error::Error;
};

// A vector or (alpha, beta) pair that should be normalized is not.
struct NormalizationError : Error {
    using Error::Error;
};

// Non-orthonormal or incomplete measurement basis.
struct BasisError : Error {
    using Error::Error;
};

// |beta| >= 1 or other kinematic nonsense.
struct KinematicsError : Error {
    using Error::Error;
};

// Event geometry violating the protocol constraints.
struct GeometryError : Error {
    using Error::Error;
};

// Post-selection onto a (numerically) orthogonal state, zero-norm branch.
struct SingularError : Error {
    using Error::Error;
};

// Friend-record extraction failures (mixed or unrecognizable record).
struct RecordError : Error {
    using Error::Error;
};

// Bad configuration document or command-line arguments.
struct ConfigError : Error {
    using Error::Error;
};

// Contract violation on an operation input (non-density matrix etc.).
struct ContractError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace wfsim
