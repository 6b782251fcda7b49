#pragma once

namespace spotmatch {

/// One period's spot market: scaled side sizes and the thickness constant.
/// Ex ante, each user on one side is compatible with c times the other
/// side's scaled size.
struct SpotMarket {
    double a = 0.0;
    double b = 0.0;
    double c = 1.0;
};

struct MatchPartials {
    double da = 0.0;
    double db = 0.0;
};

/// Large-market size of the sequentially greedy matching between sides of
/// scaled size a and b:
///
///   mu(a, b) = a + b - (1/c) log(e^{ca} + e^{cb} - 1)
///
/// Evaluated as min - (1/c) log1p(e^{-c max} expm1(c min)), which is the
/// same expression with e^{c max} factored out of the log. Never overflows
/// and always lands in [0, min(a, b)].
double mu(double a, double b, double c);
double mu(const SpotMarket& market);

/// Gradient of mu. da = (e^{cb} - 1) / (e^{ca} + e^{cb} - 1), db symmetric.
MatchPartials mu_partials(double a, double b, double c);

/// Fully efficient matching function min(a, b).
double match_min(double a, double b);

/// Cobb-Douglas comparator a^rho * b^omega.
double cobb_douglas(double a, double b, double rho, double omega);

namespace detail {
// log(e^x - 1) for x >= 0; -inf at x = 0.
double log_expm1(double x);
}  // namespace detail

}  // namespace spotmatch
