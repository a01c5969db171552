#pragma once

#include <stdexcept>
#include <string>

namespace kickns {

/// Base of every error raised by the library. The category string names the
/// producing module so the CLI can print a module diagnostic.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(category + ": " + what), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

class InvalidFieldError : public Error {
public:
    explicit InvalidFieldError(const std::string& w) : Error("grid_field", w) {}
};

class EigenSolverError : public Error {
public:
    EigenSolverError(const std::string& w, double residual)
        : Error("grid_field", w + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class GeometryError : public Error {
public:
    explicit GeometryError(const std::string& w) : Error("noise", w) {}
};

/// Raised when an amplitude b_j vanishes: the kick law must be nondegenerate.
class NondegeneracyError : public Error {
public:
    explicit NondegeneracyError(const std::string& w) : Error("noise", w) {}
};

class CflViolation : public Error {
public:
    CflViolation(double cfl, double limit)
        : Error("ns_solver", "CFL number " + std::to_string(cfl) + " exceeds limit " + std::to_string(limit)),
          cfl_(cfl) {}
    double cfl() const noexcept { return cfl_; }

private:
    double cfl_;
};

class SolverError : public Error {
public:
    explicit SolverError(const std::string& w) : Error("ns_solver", w) {}
};

class DissipationFailure : public Error {
public:
    explicit DissipationFailure(const std::string& w) : Error("ns_solver", w) {}
};

class ControllabilityFailure : public Error {
public:
    explicit ControllabilityFailure(const std::string& w) : Error("markov_chain", w) {}
};

class ChainError : public Error {
public:
    ChainError(std::size_t step, const std::string& w)
        : Error("markov_chain", "step " + std::to_string(step) + ": " + w), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class DegeneracyError : public Error {
public:
    DegeneracyError(const std::string& category, const std::string& w) : Error(category, w) {}
};

class InputError : public Error {
public:
    InputError(const std::string& category, const std::string& w) : Error(category, w) {}
};

/// Schema violation in an experiment config; carries the offending key path.
class ConfigError : public Error {
public:
    ConfigError(std::string key_path, const std::string& w)
        : Error("config", key_path + ": " + w), key_path_(std::move(key_path)) {}
    const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

}  // namespace kickns
