// -*- c++ -*-
#ifndef WITS_ERRORS_HPP
#define WITS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace wits {

/// Invalid numeric argument (non-finite input, empty interval, bad tolerance).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Caller supplied inconsistent objects (mismatched m, malformed file, bad flag).
class UsageError : public std::invalid_argument {
public:
    explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

/// An iterative or adaptive procedure stopped before meeting its tolerance.
/// Carries the best estimate reached and the residual at that point.
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, double best_estimate, double residual)
        : std::runtime_error(what), best_estimate_(best_estimate), residual_(residual) {}

    double best_estimate() const noexcept { return best_estimate_; }
    double residual() const noexcept { return residual_; }

private:
    double best_estimate_;
    double residual_;
};

/// A best response left the m-segment class: some segment has no fixed point
/// or two neighbouring basins never trade places. Happens at small sigma.
class StructureLost : public NonConvergence {
public:
    StructureLost(const std::string& what, int segment, double best_estimate, double residual)
        : NonConvergence(what, best_estimate, residual), segment_(segment) {}

    int segment() const noexcept { return segment_; }

private:
    int segment_;
};

} // namespace wits

#endif
