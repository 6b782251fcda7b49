#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "spotmatch/fluid.hpp"

namespace spotmatch {

/// Adoption Growth Dominance (gamma <= alpha - alpha') or Non-Dominance.
enum class Regime { AGD, AGN };

const char* to_string(Regime regime);

Regime classify_regime(const ModelParams& params);

/// Optimal single-period adoption level (0 or 1). Adoption wins in AGD, and
/// in AGN whenever
///   c d_1 <= log((e^{c(1-alpha+alpha')m_0} - 1) / (e^{c(gamma-alpha+alpha')m_0} - 1)).
/// m_0 = 0 makes the right side +inf, so the answer is 1.
int myopic_decision(const FluidState& state0, const ModelParams& params);

/// The right side of the inequality above (+inf when undefined).
double myopic_threshold(const FluidState& state0, const ModelParams& params);

struct CurvePoint {
    double z = 0.0;
    double m1 = 0.0;
};

/// m_1(z) = matches(step(state0, z)) for every z in the grid.
std::vector<CurvePoint> m1_curve(const FluidState& state0, const ModelParams& params,
                                 const std::vector<double>& z_grid);

/// Closed-form d m_1 / d z_0 at z.
double dm1_dz0(const FluidState& state0, const ModelParams& params, double z);

// ---------------------------------------------------------------------------
// Minimum market thickness

struct MMTSolution {
    double d_bar = 0.0;
    double v_bar = 0.0;
    /// LHS - RHS of constraints (7)..(10), in c*d / c*v units. All >= 0 at a
    /// feasible point; the last one is tight.
    std::array<double, 4> constraint_slack{};
};

struct MMTOptions {
    double d_step = 1e-3;
    double tol = 1e-8;
    double d_ceiling = 100.0;
};

/// Residuals of the four thickness constraints at an arbitrary (d, v).
std::array<double, 4> mmt_residuals(const ModelParams& params, double d, double v);

/// v at which constraint (10) is tight for a given d.
double mmt_tight_v(const ModelParams& params, double d);

/// Smallest d (with its tight v) satisfying the thickness program. Scans d
/// upward from the constraint-(7) bound, then bisects the first feasible
/// step down to tol. Throws RegimeError in AGD and ConvergenceError past the
/// ceiling.
MMTSolution solve_mmt(const ModelParams& params, const MMTOptions& options = {});
MMTSolution solve_mmt(const ModelParams& params, double d_step, double tol);

// ---------------------------------------------------------------------------
// Approximation guarantee for the no-adoption policy

/// 1 - kappa with
///   r     = delta * max(1 - beta + beta', 1 - alpha + alpha' + gamma')
///   kappa = min((1/(1 - r^T) + A3/(1 - r)) log 2 / (c min(d0, v0)), 1),  A3 = max(beta', alpha' + gamma').
/// Returns 0 when r >= 1.
double approx_factor(const ModelParams& params, double d0, double v0, std::size_t horizon);

/// Discounted matches of the z = 0 rollout when every period matches
/// min(d, v). Upper-bounds the value of any policy in AGN.
double match_min_upper_bound(const FluidState& state0, const ModelParams& params, std::size_t horizon);

/// objective(z = 0 rollout) / match_min_upper_bound.
double realized_ratio(const FluidState& state0, const ModelParams& params, std::size_t horizon);

// ---------------------------------------------------------------------------
// Exhaustive search

struct PolicySearchResult {
    PolicyVector best_policy;
    double best_value = 0.0;
    bool all_or_nothing = false;
    std::uint64_t evaluations = 0;
};

struct SearchOptions {
    std::uint64_t budget = 1'000'000;
    unsigned threads = 1;
};

/// Maximizes the discounted objective over candidate_set^T. Ties go to the
/// lexicographically largest policy (toward adoption). The result does not
/// depend on the thread count.
PolicySearchResult exhaustive_policy_search(const FluidState& state0, const ModelParams& params,
                                            std::size_t horizon, std::vector<double> candidate_set,
                                            const SearchOptions& options = {});

struct SwitchPoint {
    double v = 0.0;
    double d_star = 0.0;
};

/// For each v, the d at which the myopic decision from (d, 0, v) flips from
/// adoption to no adoption. Throws BracketError if [d_lo, d_hi] does not
/// contain a flip.
std::vector<SwitchPoint> myopic_switch_curve(const ModelParams& params, const std::vector<double>& v_grid,
                                             double d_lo, double d_hi, double tol);

struct ArrowPoint {
    double d = 0.0;
    double v = 0.0;
    int z0_star = 0;
    double dd = 0.0;
    double dv = 0.0;
    int myopic_z = 0;
};

/// Long-run optimal first decision over {0,1}^T from every (d, 0, v) on the
/// grid, with the one-step state change it causes. Row-major in d then v.
std::vector<ArrowPoint> arrow_field(const ModelParams& params, const std::vector<double>& d_grid,
                                    const std::vector<double>& v_grid, std::size_t horizon,
                                    const SearchOptions& options = {});

}  // namespace spotmatch
