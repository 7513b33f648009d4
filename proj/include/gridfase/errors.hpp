#pragma once

#include <stdexcept>
#include <string>

namespace gridfase {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. The message carries file/line/field context.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that violates a model invariant (cycle, orphan bus, phase mismatch, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, double worst_mismatch, int iterations)
        : Error(what), worst_mismatch_(worst_mismatch), iterations_(iterations) {}

    double worst_mismatch() const { return worst_mismatch_; }
    int iterations() const { return iterations_; }

private:
    double worst_mismatch_;
    int iterations_;
};

/// Gain matrix of the static estimator is singular: the measurement set does not observe the state.
class RankDeficient : public Error {
public:
    using Error::Error;
};

/// Innovation covariance is numerically singular (condition number above 1e12).
class SingularInnovation : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class ChecksumMismatch : public Error {
public:
    using Error::Error;
};

}  // namespace gridfase
