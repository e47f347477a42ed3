#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace topkcert {

using Index = std::ptrdiff_t;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Precondition violations on integer/real parameters (k out of range, eps
// outside (0,1), ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Malformed data (non-finite scores, mismatched dimensions, bad files).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Inputs that are well-formed but leave a quantity undefined.
class DegenerateInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// log(e^a + e^b), exact for -inf operands.
inline double log_add_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

// log(e^a - e^b) for a >= b.
inline double log_sub_exp(double a, double b) {
    if (b == kNegInf) return a;
    if (b >= a) return kNegInf;
    return a + std::log1p(-std::exp(b - a));
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    if (x.size() == 0) return -std::numeric_limits<Scalar>::infinity();
    const Scalar m = x.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((x.derived().array() - m).exp().sum());
}

// 1 / (1 + e^{-x}) without overflow.
inline double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline void require_epsilon(double eps) {
    if (!(eps > 0.0 && eps < 1.0))
        throw DomainError("epsilon must lie in (0, 1), got " + std::to_string(eps));
}

}  // namespace topkcert
