#include "spotmatch/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "spotmatch/error.hpp"
#include "spotmatch/matching.hpp"
#include "spotmatch/parallel.hpp"

namespace spotmatch {

namespace {

std::int64_t binomial(std::int64_t trials, double p, Philox4x64& rng) {
    if (trials <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return trials;
    return std::binomial_distribution<std::int64_t>(trials, p)(rng);
}

void check_sim_params(const ModelParams& params, std::int64_t n) {
    params.validate();
    detail::require(n >= 1, "scaling factor n must be at least 1");
    detail::require(params.c <= static_cast<double>(n), "match probability c/n exceeds 1 (c > n)");
    detail::require(params.gamma_prime <= 1.0, "simulation needs gamma_prime <= 1 (per-match join probability)");
}

std::int64_t aggregated_match(std::int64_t n_don, std::int64_t n_vol, double p, Philox4x64& rng) {
    const double log_miss = std::log1p(-p);  // -inf at p = 1
    std::int64_t remaining = n_don;
    std::int64_t matched = 0;
    double hit = -std::expm1(static_cast<double>(remaining) * log_miss);
    for (std::int64_t i = 0; i < n_vol && remaining > 0; ++i) {
        if (rng.uniform() < hit) {
            ++matched;
            --remaining;
            hit = -std::expm1(static_cast<double>(remaining) * log_miss);
        }
    }
    return matched;
}

std::int64_t pairwise_match(std::int64_t n_don, std::int64_t n_vol, double p, Philox4x64& rng) {
    if (std::max(n_don, n_vol) > kPairwiseMaxSide)
        detail::domain_fail("pairwise matching is limited to sides of at most " + std::to_string(kPairwiseMaxSide));
    const auto nd = static_cast<std::size_t>(n_don);
    const auto nv = static_cast<std::size_t>(n_vol);
    std::vector<unsigned char> compatible(nd * nv);
    for (auto& cell : compatible) cell = rng.bernoulli(p) ? 1 : 0;

    std::vector<std::size_t> arrival(nv);
    std::iota(arrival.begin(), arrival.end(), std::size_t{0});
    std::shuffle(arrival.begin(), arrival.end(), rng);

    std::vector<unsigned char> taken(nd, 0);
    std::vector<std::size_t> options;
    std::int64_t matched = 0;
    for (std::size_t vol : arrival) {
        options.clear();
        for (std::size_t don = 0; don < nd; ++don)
            if (!taken[don] && compatible[vol * nd + don]) options.push_back(don);
        if (options.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
        taken[options[pick(rng)]] = 1;
        ++matched;
    }
    return matched;
}

// z * M as an integer; values within rounding noise of an integer snap to it.
std::int64_t adopted_count(double z, std::int64_t m, Philox4x64& rng, Rounding rounding) {
    const double target = z * static_cast<double>(m);
    const double nearest = std::round(target);
    if (std::abs(target - nearest) <= 1e-9 * std::max(1.0, target)) return static_cast<std::int64_t>(nearest);
    if (rounding == Rounding::exact)
        throw IntegralityError("z * M = " + std::to_string(target) + " is not an integer and rounding is disabled");
    const double floor_part = std::floor(target);
    return static_cast<std::int64_t>(floor_part) + (rng.bernoulli(target - floor_part) ? 1 : 0);
}

}  // namespace

void IntState::validate() const {
    if (D < 0 || K < 0 || V < 0) detail::domain_fail("integer state components must be nonnegative");
    if (K > std::min(D, V)) detail::domain_fail("integer state violates K <= min(D, V)");
}

IntState IntState::scaled(const FluidState& s, std::int64_t n) {
    const auto nn = static_cast<double>(n);
    IntState out{std::llround(nn * s.d), std::llround(nn * s.k), std::llround(nn * s.v)};
    out.validate();
    return out;
}

void SimConfig::validate() const {
    detail::require(n >= 1, "n must be at least 1");
    detail::require(replications >= 1, "replications must be at least 1");
}

std::int64_t greedy_spot_match(std::int64_t n_don, std::int64_t n_vol, double p, Philox4x64& rng, MatchMode mode) {
    if (!(p >= 0.0 && p <= 1.0)) detail::domain_fail("compatibility probability must lie in [0, 1]");
    detail::require(n_don >= 0 && n_vol >= 0, "spot market sides must be nonnegative");
    if (n_don == 0 || n_vol == 0) return 0;
    return mode == MatchMode::pairwise ? pairwise_match(n_don, n_vol, p, rng)
                                       : aggregated_match(n_don, n_vol, p, rng);
}

std::int64_t sim_matches(const IntState& state, const ModelParams& params, std::int64_t n, Philox4x64& rng,
                         MatchMode mode) {
    state.validate();
    const double p = params.c / static_cast<double>(n);
    return state.K + greedy_spot_match(state.D - state.K, state.V - state.K, p, rng, mode);
}

SimStepResult sim_step(const IntState& state, double z, const ModelParams& params, std::int64_t n,
                       Philox4x64& rng, MatchMode mode, Rounding rounding) {
    check_sim_params(params, n);
    if (!(z >= 0.0 && z <= 1.0)) detail::domain_fail("adoption fraction must lie in [0, 1]");

    SimStepResult out;
    const std::int64_t m = sim_matches(state, params, n, rng, mode);
    const std::int64_t z_count = adopted_count(z, m, rng, rounding);
    out.matches = m;
    out.adopted = z_count;

    // A departing adopter's donation stays in D and returns to the spot pool.
    const std::int64_t k_next = binomial(z_count, 1.0 - params.gamma, rng);
    const std::int64_t d_unmatched = state.D - m;
    const std::int64_t d_next =
        d_unmatched - binomial(d_unmatched, params.beta, rng) + m + binomial(m, params.beta_prime - params.beta, rng);
    const std::int64_t v_unmatched = state.V - m;
    const std::int64_t v_next = v_unmatched - binomial(v_unmatched, params.alpha, rng) + k_next +
                                binomial(m - z_count, 1.0 - (params.alpha - params.alpha_prime), rng) +
                                binomial(m, params.gamma_prime, rng);
    out.next = IntState{d_next, k_next, v_next};
    out.next.validate();
    return out;
}

std::vector<SimRecord> run_trajectory(const IntState& state0, const PolicyVector& policy,
                                      const ModelParams& params, std::int64_t n, Philox4x64& rng,
                                      MatchMode mode) {
    detail::require(policy.size() >= 1, "run_trajectory: policy horizon must be at least 1");
    std::vector<SimRecord> records;
    records.reserve(policy.size() + 1);
    IntState s = state0;
    for (std::size_t t = 0; t < policy.size(); ++t) {
        const SimStepResult r = sim_step(s, policy[t], params, n, rng, mode);
        records.push_back({s, r.matches});
        s = r.next;
    }
    records.push_back({s, sim_matches(s, params, n, rng, mode)});
    return records;
}

Estimate summarize(const std::vector<double>& samples) {
    Estimate e;
    if (samples.empty()) return e;
    const auto count = static_cast<double>(samples.size());
    double sum = 0.0;
    for (double x : samples) sum += x;
    e.mean = sum / count;
    if (samples.size() > 1) {
        double sq = 0.0;
        for (double x : samples) sq += (x - e.mean) * (x - e.mean);
        e.std_error = std::sqrt(sq / (count - 1.0) / count);
    }
    return e;
}

std::vector<GapRow> convergence_report(const std::vector<std::int64_t>& n_values, double c, double a, double b,
                                       std::uint64_t replications, std::uint64_t seed, unsigned threads,
                                       MatchMode mode) {
    detail::require(a > 0.0 && b > 0.0, "convergence_report: side sizes must be positive");
    detail::require(replications >= 1, "convergence_report: replications must be at least 1");
    const double limit = mu(a, b, c);
    std::vector<GapRow> rows;
    for (std::int64_t n : n_values) {
        detail::require(n >= 1 && c <= static_cast<double>(n), "convergence_report: need 1 <= n and c <= n");
        const auto nn = static_cast<double>(n);
        const std::int64_t side_a = std::llround(nn * a);
        const std::int64_t side_b = std::llround(nn * b);
        std::vector<double> normalized(replications);
        parallel_for(replications, threads, [&](std::size_t r) {
            Philox4x64 rng(seed, r);
            // Volunteers (side b) arrive and scan donations (side a).
            normalized[r] = static_cast<double>(greedy_spot_match(side_a, side_b, c / nn, rng, mode)) / nn;
        });
        const Estimate e = summarize(normalized);
        rows.push_back({n, e.mean - limit, e.std_error, (e.mean - limit) / limit});
    }
    return rows;
}

std::vector<SimCurvePoint> simulated_m1_curve(const IntState& state0, const ModelParams& params, std::int64_t n,
                                              const std::vector<double>& z_grid, std::uint64_t replications,
                                              std::uint64_t seed, unsigned threads, Rounding rounding) {
    check_sim_params(params, n);
    state0.validate();
    detail::require(replications >= 1, "simulated_m1_curve: replications must be at least 1");
    const auto nn = static_cast<double>(n);
    const FluidState fluid0{static_cast<double>(state0.D) / nn, static_cast<double>(state0.K) / nn,
                            static_cast<double>(state0.V) / nn};
    std::vector<SimCurvePoint> curve;
    curve.reserve(z_grid.size());
    for (double z : z_grid) {
        std::vector<double> m1(replications);
        parallel_for(replications, threads, [&](std::size_t r) {
            Philox4x64 rng(seed, r);
            const SimStepResult first = sim_step(state0, z, params, n, rng, MatchMode::aggregated, rounding);
            m1[r] = static_cast<double>(sim_matches(first.next, params, n, rng)) / nn;
        });
        const Estimate e = summarize(m1);
        curve.push_back({z, e.mean, e.std_error, matches(step(fluid0, z, params), params)});
    }
    return curve;
}

std::vector<ConcentrationRow> concentration_report(const FluidState& state0, const PolicyVector& policy,
                                                   const ModelParams& params,
                                                   const std::vector<std::int64_t>& n_values,
                                                   std::uint64_t replications, std::uint64_t seed,
                                                   unsigned threads) {
    detail::require(replications >= 1, "concentration_report: replications must be at least 1");
    const Trajectory fluid = rollout(state0, policy, params);
    std::vector<ConcentrationRow> rows;
    for (std::int64_t n : n_values) {
        check_sim_params(params, n);
        const auto nn = static_cast<double>(n);
        const IntState start = IntState::scaled(state0, n);
        std::vector<double> gaps(replications);
        parallel_for(replications, threads, [&](std::size_t r) {
            Philox4x64 rng(seed, r);
            const auto path = run_trajectory(start, policy, params, n, rng);
            double worst = 0.0;
            for (std::size_t t = 0; t < path.size(); ++t)
                worst = std::max(worst, std::abs(static_cast<double>(path[t].matches) / nn - fluid.matches[t]));
            gaps[r] = worst;
        });
        rows.push_back({n, summarize(gaps)});
    }
    return rows;
}

}  // namespace spotmatch
