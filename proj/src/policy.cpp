#include "spotmatch/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spotmatch/error.hpp"
#include "spotmatch/matching.hpp"
#include "spotmatch/parallel.hpp"
#include "spotmatch/rng.hpp"

namespace spotmatch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_agn(const ModelParams& params, const char* who) {
    if (classify_regime(params) != Regime::AGN)
        throw RegimeError(std::string(who) + ": requires the AGN regime (gamma > alpha - alpha_prime)");
}

}  // namespace

const char* to_string(Regime regime) { return regime == Regime::AGD ? "AGD" : "AGN"; }

Regime classify_regime(const ModelParams& params) {
    return params.gamma <= params.alpha - params.alpha_prime ? Regime::AGD : Regime::AGN;
}

double myopic_threshold(const FluidState& state0, const ModelParams& params) {
    const double m0 = matches(state0, params);
    const double growth = non_adoption_growth_benefit(params);
    if (m0 == 0.0 || growth <= 0.0) return kInf;
    const double keep = 1.0 - params.alpha + params.alpha_prime;
    // growth * m0 may underflow to 0, in which case log_expm1 gives -inf and
    // the threshold is +inf as it should be.
    return detail::log_expm1(params.c * keep * m0) - detail::log_expm1(params.c * growth * m0);
}

int myopic_decision(const FluidState& state0, const ModelParams& params) {
    params.validate();
    if (classify_regime(params) == Regime::AGD) return 1;
    const double m0 = matches(state0, params);
    const double d1 = (1.0 - params.beta) * state0.d + params.beta_prime * m0;
    return params.c * d1 <= myopic_threshold(state0, params) ? 1 : 0;
}

std::vector<CurvePoint> m1_curve(const FluidState& state0, const ModelParams& params,
                                 const std::vector<double>& z_grid) {
    std::vector<CurvePoint> curve;
    curve.reserve(z_grid.size());
    for (double z : z_grid) curve.push_back({z, matches(step(state0, z, params), params)});
    return curve;
}

double dm1_dz0(const FluidState& state0, const ModelParams& params, double z) {
    const double m0 = matches(state0, params);
    if (m0 == 0.0) return 0.0;
    const FluidState s1 = step(state0, z, params);
    const double xd = params.c * std::max(0.0, s1.d - s1.k);
    const double xv = params.c * std::max(0.0, s1.v - s1.k);
    const double top = std::max(xd, xv);
    const double ed = std::exp(xd - top);
    const double num = (params.alpha - params.alpha_prime - params.gamma) * ed +
                       (1.0 + params.alpha_prime - params.alpha) * std::exp(-top);
    const double den = ed + std::exp(xv - top) - std::exp(-top);
    return num / den * m0;
}

// ---------------------------------------------------------------------------

std::array<double, 4> mmt_residuals(const ModelParams& params, double d, double v) {
    using detail::log_expm1;
    const double c = params.c;
    const double growth = non_adoption_growth_benefit(params);
    const double keep = 1.0 + params.alpha_prime - params.alpha;
    const double one_minus_beta = 1.0 - params.beta;
    const double v_shrink = 1.0 - params.alpha / (params.alpha_prime + params.gamma_prime);
    const double d_shrink = 1.0 - params.beta / params.beta_prime;

    std::array<double, 4> r{};
    r[0] = c * d - std::log(keep / growth) / one_minus_beta;
    r[1] = c * d - ((log_expm1(c * keep * d) - log_expm1(c * growth * d)) / one_minus_beta -
                    params.beta_prime / one_minus_beta * c * d);
    r[2] = c * d - (log_expm1(c * v) - log_expm1(c * v * v_shrink));
    r[3] = c * v - (log_expm1(c * d) - log_expm1(c * d * d_shrink));
    return r;
}

double mmt_tight_v(const ModelParams& params, double d) {
    const double c = params.c;
    const double d_shrink = 1.0 - params.beta / params.beta_prime;
    return (detail::log_expm1(c * d) - detail::log_expm1(c * d * d_shrink)) / c;
}

MMTSolution solve_mmt(const ModelParams& params, const MMTOptions& options) {
    params.validate();
    require_agn(params, "solve_mmt");
    detail::require(params.beta > 0.0, "solve_mmt: beta must be positive");
    detail::require(params.alpha < params.alpha_prime + params.gamma_prime,
                    "solve_mmt: volunteer pool cannot grow without adoption (alpha >= alpha_prime + gamma_prime)");
    detail::require(options.d_step > 0.0 && options.tol > 0.0, "solve_mmt: step and tolerance must be positive");

    const auto feasible = [&](double d) {
        const auto r = mmt_residuals(params, d, mmt_tight_v(params, d));
        return r[0] >= 0.0 && r[1] >= 0.0 && r[2] >= 0.0;
    };

    const double growth = non_adoption_growth_benefit(params);
    const double keep = 1.0 + params.alpha_prime - params.alpha;
    double d = std::log(keep / growth) / (params.c * (1.0 - params.beta));
    while (mmt_residuals(params, d, 1.0)[0] < 0.0) d = std::nextafter(d, kInf);

    double lo = d;
    double hi = d;
    if (!feasible(d)) {
        for (std::size_t i = 1;; ++i) {
            hi = d + static_cast<double>(i) * options.d_step;
            if (hi > options.d_ceiling)
                throw ConvergenceError("solve_mmt: no feasible thickness below d = " +
                                       std::to_string(options.d_ceiling));
            if (feasible(hi)) break;
            lo = hi;
        }
        while (hi - lo > options.tol) {
            const double mid = 0.5 * (lo + hi);
            (feasible(mid) ? hi : lo) = mid;
        }
    }

    MMTSolution sol;
    sol.d_bar = hi;
    sol.v_bar = mmt_tight_v(params, hi);
    sol.constraint_slack = mmt_residuals(params, sol.d_bar, sol.v_bar);
    return sol;
}

MMTSolution solve_mmt(const ModelParams& params, double d_step, double tol) {
    MMTOptions options;
    options.d_step = d_step;
    options.tol = tol;
    return solve_mmt(params, options);
}

// ---------------------------------------------------------------------------

double approx_factor(const ModelParams& params, double d0, double v0, std::size_t horizon) {
    params.validate();
    require_agn(params, "approx_factor");
    detail::require(d0 > 0.0 && v0 > 0.0, "approx_factor: d0 and v0 must be positive");
    detail::require(horizon >= 1, "approx_factor: horizon must be at least 1");

    const double growth_rate = std::max(1.0 - params.beta + params.beta_prime,
                                        1.0 - params.alpha + params.alpha_prime + params.gamma_prime);
    const double r = params.delta * growth_rate;
    if (r >= 1.0) return 0.0;
    const double a3 = std::max(params.beta_prime, params.alpha_prime + params.gamma_prime);
    const double rt = std::pow(r, static_cast<double>(horizon));
    const double kappa =
        std::min((1.0 / (1.0 - rt) + a3 / (1.0 - r)) * std::log(2.0) / (params.c * std::min(d0, v0)), 1.0);
    return 1.0 - kappa;
}

double match_min_upper_bound(const FluidState& state0, const ModelParams& params, std::size_t horizon) {
    params.validate();
    state0.validate();
    detail::require(horizon >= 1, "match_min_upper_bound: horizon must be at least 1");
    double d = state0.d;
    double v = state0.v;
    double total = 0.0;
    double weight = 1.0;
    for (std::size_t t = 1; t <= horizon; ++t) {
        const double m = match_min(d, v);
        d = (1.0 - params.beta) * d + params.beta_prime * m;
        v = (1.0 - params.alpha) * v + (params.alpha_prime + params.gamma_prime) * m;
        total += weight * match_min(d, v);
        weight *= params.delta;
    }
    return total;
}

double realized_ratio(const FluidState& state0, const ModelParams& params, std::size_t horizon) {
    const double bound = match_min_upper_bound(state0, params, horizon);
    if (!(bound > 0.0)) detail::domain_fail("realized_ratio: upper bound is zero (empty initial market)");
    return discounted_matches(state0, PolicyVector::constant(horizon, 0.0), params) / bound;
}

// ---------------------------------------------------------------------------

namespace {

struct Candidate {
    double value = -kInf;
    std::uint64_t index = 0;
    bool set = false;

    // Exact comparison; equal values go to the larger (lexicographically later) index.
    void offer(double v, std::uint64_t i) {
        if (!set || v > value || (v == value && i > index)) {
            value = v;
            index = i;
            set = true;
        }
    }
};

void decode(std::uint64_t index, const std::vector<double>& candidates, std::vector<double>& z) {
    const std::uint64_t base = candidates.size();
    for (std::size_t t = z.size(); t-- > 0;) {
        z[t] = candidates[index % base];
        index /= base;
    }
}

double evaluate(const FluidState& state0, const std::vector<double>& z, const ModelParams& params) {
    FluidState s = state0;
    double total = 0.0;
    double weight = 1.0;
    for (double zt : z) {
        s = step(s, zt, params);
        total += weight * matches(s, params);
        weight *= params.delta;
    }
    return total;
}

}  // namespace

PolicySearchResult exhaustive_policy_search(const FluidState& state0, const ModelParams& params,
                                            std::size_t horizon, std::vector<double> candidate_set,
                                            const SearchOptions& options) {
    params.validate();
    state0.validate();
    detail::require(horizon >= 1, "exhaustive_policy_search: horizon must be at least 1");
    detail::require(!candidate_set.empty(), "exhaustive_policy_search: candidate set is empty");
    for (double z : candidate_set)
        detail::require(z >= 0.0 && z <= 1.0, "exhaustive_policy_search: candidates must lie in [0, 1]");
    std::sort(candidate_set.begin(), candidate_set.end());
    candidate_set.erase(std::unique(candidate_set.begin(), candidate_set.end()), candidate_set.end());

    std::uint64_t total = 1;
    for (std::size_t t = 0; t < horizon; ++t) {
        if (total > options.budget / candidate_set.size())
            throw BudgetError("exhaustive_policy_search: |candidates|^T exceeds the budget of " +
                              std::to_string(options.budget) + " rollouts");
        total *= candidate_set.size();
    }

    const std::size_t workers = std::min<std::uint64_t>(resolve_threads(options.threads), total);
    std::vector<Candidate> best(workers), best_binary(workers);
    // Chunking depends on the worker count; the exact reduction below does not.
    parallel_for(workers, options.threads, [&](std::size_t w) {
        const auto begin = static_cast<std::uint64_t>(static_cast<detail::uint128>(total) * w / workers);
        const auto end = static_cast<std::uint64_t>(static_cast<detail::uint128>(total) * (w + 1) / workers);
        std::vector<double> z(horizon);
        for (std::uint64_t i = begin; i < end; ++i) {
            decode(i, candidate_set, z);
            const double value = evaluate(state0, z, params);
            best[w].offer(value, i);
            if (std::all_of(z.begin(), z.end(), [](double x) { return x == 0.0 || x == 1.0; }))
                best_binary[w].offer(value, i);
        }
    });

    Candidate overall, overall_binary;
    for (std::size_t w = 0; w < workers; ++w) {
        if (best[w].set) overall.offer(best[w].value, best[w].index);
        if (best_binary[w].set) overall_binary.offer(best_binary[w].value, best_binary[w].index);
    }

    std::vector<double> z(horizon);
    decode(overall.index, candidate_set, z);
    PolicySearchResult result;
    result.best_policy = PolicyVector(z);
    result.best_value = overall.value;
    result.evaluations = total;
    result.all_or_nothing =
        result.best_policy.all_or_nothing() ||
        (overall_binary.set &&
         overall_binary.value >= overall.value - 1e-12 * std::max(1.0, std::abs(overall.value)));
    return result;
}

std::vector<SwitchPoint> myopic_switch_curve(const ModelParams& params, const std::vector<double>& v_grid,
                                             double d_lo, double d_hi, double tol) {
    params.validate();
    detail::require(d_lo >= 0.0 && d_lo < d_hi, "myopic_switch_curve: need 0 <= d_lo < d_hi");
    detail::require(tol > 0.0, "myopic_switch_curve: tolerance must be positive");
    std::vector<SwitchPoint> curve;
    curve.reserve(v_grid.size());
    for (double v : v_grid) {
        const auto decide = [&](double d) { return myopic_decision(FluidState{d, 0.0, v}, params); };
        if (decide(d_lo) != 1 || decide(d_hi) != 0)
            throw BracketError("myopic_switch_curve: no flip of the myopic decision in [" + std::to_string(d_lo) +
                               ", " + std::to_string(d_hi) + "] at v = " + std::to_string(v));
        double lo = d_lo;
        double hi = d_hi;
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            (decide(mid) == 1 ? lo : hi) = mid;
        }
        curve.push_back({v, 0.5 * (lo + hi)});
    }
    return curve;
}

std::vector<ArrowPoint> arrow_field(const ModelParams& params, const std::vector<double>& d_grid,
                                    const std::vector<double>& v_grid, std::size_t horizon,
                                    const SearchOptions& options) {
    params.validate();
    for (double x : d_grid) detail::require(x > 0.0, "arrow_field: grid values must be positive");
    for (double x : v_grid) detail::require(x > 0.0, "arrow_field: grid values must be positive");
    if (horizon >= 64 || (std::uint64_t{1} << horizon) > options.budget)
        throw BudgetError("arrow_field: 2^T exceeds the budget of " + std::to_string(options.budget) + " rollouts");

    std::vector<ArrowPoint> field(d_grid.size() * v_grid.size());
    SearchOptions inner = options;
    inner.threads = 1;
    parallel_for(field.size(), options.threads, [&](std::size_t idx) {
        const double d = d_grid[idx / v_grid.size()];
        const double v = v_grid[idx % v_grid.size()];
        const FluidState s{d, 0.0, v};
        const auto search = exhaustive_policy_search(s, params, horizon, {0.0, 1.0}, inner);
        ArrowPoint& p = field[idx];
        p.d = d;
        p.v = v;
        p.z0_star = search.best_policy[0] == 1.0 ? 1 : 0;
        const FluidState next = step(s, static_cast<double>(p.z0_star), params);
        p.dd = next.d - d;
        p.dv = next.v - v;
        p.myopic_z = myopic_decision(s, params);
    });
    return field;
}

}  // namespace spotmatch
