#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spotmatch/fluid.hpp"
#include "spotmatch/rng.hpp"

namespace spotmatch {

/// Integer market at scale n: donations D, adopted pairs K, volunteers V.
struct IntState {
    std::int64_t D = 0;
    std::int64_t K = 0;
    std::int64_t V = 0;

    void validate() const;

    /// Rounds n * (d, k, v) to the nearest integers.
    static IntState scaled(const FluidState& s, std::int64_t n);

    friend bool operator==(const IntState&, const IntState&) = default;
};

enum class MatchMode {
    aggregated,  // per-volunteer success probability 1 - (1-p)^remaining
    pairwise,    // explicit compatibility matrix; small instances only
};

/// How z * M becomes an integer number of adopted matches.
enum class Rounding {
    randomized,  // floor + Bernoulli(fraction); preserves the mean
    exact,       // z * M must already be an integer
};

struct SimConfig {
    std::int64_t n = 1;
    std::uint64_t seed = 0;
    std::uint64_t replications = 1;
    MatchMode match_mode = MatchMode::aggregated;
    unsigned threads = 1;

    void validate() const;
};

/// Largest side the pairwise mode accepts.
inline constexpr std::int64_t kPairwiseMaxSide = 2000;

/// Size of one sequentially greedy spot matching with compatibility
/// probability p between n_don donations and n_vol volunteers.
std::int64_t greedy_spot_match(std::int64_t n_don, std::int64_t n_vol, double p, Philox4x64& rng,
                               MatchMode mode = MatchMode::aggregated);

/// M = K + spot matches at probability c/n.
std::int64_t sim_matches(const IntState& state, const ModelParams& params, std::int64_t n, Philox4x64& rng,
                         MatchMode mode = MatchMode::aggregated);

struct SimStepResult {
    IntState next;
    std::int64_t matches = 0;  // M of the input period
    std::int64_t adopted = 0;  // Z, the matches designated as adoptions
};

/// One stochastic period. Expectations reproduce the fluid step given M.
SimStepResult sim_step(const IntState& state, double z, const ModelParams& params, std::int64_t n,
                       Philox4x64& rng, MatchMode mode = MatchMode::aggregated,
                       Rounding rounding = Rounding::randomized);

struct SimRecord {
    IntState state;
    std::int64_t matches = 0;
};

/// Records (state_t, M_t) for t = 0..T. The last record only matches.
std::vector<SimRecord> run_trajectory(const IntState& state0, const PolicyVector& policy,
                                      const ModelParams& params, std::int64_t n, Philox4x64& rng,
                                      MatchMode mode = MatchMode::aggregated);

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Sample mean and standard error, summed in index order.
Estimate summarize(const std::vector<double>& samples);

struct GapRow {
    std::int64_t n = 0;
    double mean_gap = 0.0;
    double std_error = 0.0;
    double normalized_gap = 0.0;  // mean_gap / mu(a, b, c)
};

/// E[S^n / n] - mu(a, b, c) for two sides of size round(n a), round(n b)
/// at probability c / n. Replication r uses stream (seed, r) for every n.
std::vector<GapRow> convergence_report(const std::vector<std::int64_t>& n_values, double c, double a, double b,
                                       std::uint64_t replications, std::uint64_t seed, unsigned threads = 1,
                                       MatchMode mode = MatchMode::aggregated);

struct SimCurvePoint {
    double z = 0.0;
    double sim_mean = 0.0;
    double sim_stderr = 0.0;
    double fluid_m1 = 0.0;
};

/// Monte Carlo E[M_1 / n] after one period at adoption level z, next to the
/// fluid m_1(z) from state0 / n. Replication r uses stream (seed, r) for
/// every z.
std::vector<SimCurvePoint> simulated_m1_curve(const IntState& state0, const ModelParams& params, std::int64_t n,
                                              const std::vector<double>& z_grid, std::uint64_t replications,
                                              std::uint64_t seed, unsigned threads = 1,
                                              Rounding rounding = Rounding::randomized);

struct ConcentrationRow {
    std::int64_t n = 0;
    Estimate max_gap;  // of max_t |M_t / n - m_t|
};

/// Distance between simulated and fluid match paths from n * state0.
std::vector<ConcentrationRow> concentration_report(const FluidState& state0, const PolicyVector& policy,
                                                   const ModelParams& params,
                                                   const std::vector<std::int64_t>& n_values,
                                                   std::uint64_t replications, std::uint64_t seed,
                                                   unsigned threads = 1);

}  // namespace spotmatch
