#include "spotmatch/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spotmatch/error.hpp"

namespace spotmatch {

namespace {

void check_market(double a, double b, double c) {
    // Negated comparisons so NaN is rejected too.
    if (!(a >= 0.0) || !(b >= 0.0)) detail::domain_fail("mu: side sizes must be nonnegative");
    if (!(c > 0.0)) detail::domain_fail("mu: thickness constant c must be positive");
}

}  // namespace

double detail::log_expm1(double x) {
    if (x > 30.0) return x + std::log1p(-std::exp(-x));
    return std::log(std::expm1(x));
}

double mu(double a, double b, double c) {
    check_market(a, b, c);
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    if (lo == 0.0) return 0.0;
    // e^{c(lo-hi)} - e^{-c hi} = e^{c(lo-hi)} (1 - e^{-c lo}), always in [0, 1].
    const double tail = -std::exp(c * (lo - hi)) * std::expm1(-c * lo);
    const double value = lo - std::log1p(tail) / c;
    return std::clamp(value, 0.0, lo);
}

double mu(const SpotMarket& market) { return mu(market.a, market.b, market.c); }

MatchPartials mu_partials(double a, double b, double c) {
    check_market(a, b, c);
    const double ca = c * a;
    const double cb = c * b;
    const double top = std::max(ca, cb);
    const double ea = std::exp(ca - top);
    const double eb = std::exp(cb - top);
    // e^{-top}(e^{cb} - 1) written so it stays accurate when cb is tiny.
    const double num_a = -eb * std::expm1(-cb);
    const double num_b = -ea * std::expm1(-ca);
    const double denom = ea + num_a;  // == eb + num_b
    return {std::clamp(num_a / denom, 0.0, 1.0), std::clamp(num_b / denom, 0.0, 1.0)};
}

double match_min(double a, double b) {
    if (!(a >= 0.0) || !(b >= 0.0)) detail::domain_fail("match_min: side sizes must be nonnegative");
    return std::min(a, b);
}

double cobb_douglas(double a, double b, double rho, double omega) {
    if (!(a >= 0.0) || !(b >= 0.0)) detail::domain_fail("cobb_douglas: side sizes must be nonnegative");
    if (!(rho >= 0.0) || !(omega >= 0.0)) detail::domain_fail("cobb_douglas: exponents must be nonnegative");
    return std::pow(a, rho) * std::pow(b, omega);
}

}  // namespace spotmatch
