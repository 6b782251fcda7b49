#include <cmath>

#include "doctest.h"
#include "spotmatch/error.hpp"
#include "spotmatch/fluid.hpp"
#include "spotmatch/matching.hpp"
#include "test_support.hpp"

using namespace spotmatch;
using spotmatch::testing::baseline_params;
using spotmatch::testing::ParamSampler;

TEST_CASE("ModelParams validation") {
    CHECK_NOTHROW(baseline_params());
    CHECK_THROWS_AS(ModelParams::make(0.0, 0.0, 0.1, 0.1, 0.1, 0.2, 1, 0.5), DomainError);   // alpha
    CHECK_THROWS_AS(ModelParams::make(0.2, 0.3, 0.1, 0.1, 0.1, 0.2, 1, 0.5), DomainError);   // alpha' > alpha
    CHECK_THROWS_AS(ModelParams::make(0.2, 0.1, 1.0, 0.1, 0.1, 0.2, 1, 0.5), DomainError);   // gamma
    CHECK_THROWS_AS(ModelParams::make(0.2, 0.1, 0.1, -0.1, 0.1, 0.2, 1, 0.5), DomainError);  // gamma'
    CHECK_THROWS_AS(ModelParams::make(0.2, 0.1, 0.1, 0.1, 0.2, 0.2, 1, 0.5), DomainError);   // beta' == beta
    CHECK_THROWS_AS(ModelParams::make(0.2, 0.1, 0.1, 0.1, 0.1, 1.2, 1, 0.5), DomainError);   // beta' - beta > 1
    CHECK_THROWS_AS(ModelParams::make(0.2, 0.1, 0.1, 0.1, 0.1, 0.2, 0, 0.5), DomainError);   // c
    CHECK_THROWS_AS(ModelParams::make(0.2, 0.1, 0.1, 0.1, 0.1, 0.2, 1, 1.5), DomainError);   // delta
    CHECK_NOTHROW(ModelParams::make(0.2, 0.1, 0.0, 0.1, 0.0, 0.2, 1, 0.0));
}

TEST_CASE("non-adoption growth benefit") {
    CHECK(non_adoption_growth_benefit(baseline_params()) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(non_adoption_growth_benefit(ModelParams::make(0.3, 0.0, 0.3, 0.1, 0.1, 0.2, 1, 0.5)) == 0.0);
    CHECK(non_adoption_growth_benefit(ModelParams::make(0.3, 0.1, 0.1, 0.1, 0.1, 0.2, 1, 0.5)) ==
          doctest::Approx(-0.1).epsilon(1e-12));
}

TEST_CASE("matches") {
    const ModelParams p = baseline_params();
    CHECK(matches({0.8, 0.8, 0.8}, p) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(std::abs(matches({1.0, 0.0, 1.0}, p) - 0.9306876) < 1e-6);
    const double m = matches({0.8, 0.0, 0.8}, p);
    CHECK(m > 0.0);
    CHECK(m < 0.8);
    CHECK_THROWS_AS(matches({0.5, 0.6, 0.8}, p), DomainError);
    CHECK_THROWS_AS(matches({-0.1, 0.0, 0.8}, p), DomainError);
}

TEST_CASE("step: reference cases") {
    const ModelParams p = baseline_params();

    const FluidState decay = step({0.7, 0.0, 0.0}, 0.4, p);
    CHECK(decay.d == doctest::Approx(0.95 * 0.7).epsilon(1e-15));
    CHECK(decay.k == 0.0);
    CHECK(decay.v == 0.0);

    const FluidState s0{0.8, 0.0, 0.8};
    const double m = matches(s0, p);
    const FluidState adopt = step(s0, 1.0, p);
    CHECK(adopt.k == doctest::Approx(0.94 * m).epsilon(1e-14));
    CHECK(adopt.d == doctest::Approx(0.95 * 0.8 + 0.2 * m).epsilon(1e-14));
    CHECK(adopt.v == doctest::Approx(0.8 * 0.8 + 0.35 * m - 0.01 * m).epsilon(1e-14));
    CHECK(step(s0, 0.0, p).k == 0.0);

    CHECK_THROWS_AS(step(s0, 1.5, p), DomainError);
    CHECK_THROWS_AS(step(s0, -0.1, p), DomainError);
}

TEST_CASE("step: feasibility, z-independence of d, sensitivity bounds") {
    ParamSampler rng(21);
    for (int i = 0; i < 3000; ++i) {
        const ModelParams p = rng.any();
        const FluidState s = rng.state();
        const double z = rng.uniform(0.0, 1.0);
        const FluidState next = step(s, z, p);
        CHECK(next.d >= 0.0);
        CHECK(next.v >= 0.0);
        CHECK(next.k >= 0.0);
        CHECK(next.k <= std::min(next.d, next.v) + 1e-12);
        CHECK(step(s, 0.0, p).d == step(s, 1.0, p).d);

        // Sensitivities of matches to each pool lie in [0, 1].
        const double h = 1e-6;
        const double m = matches(s, p);
        const double dm_dd = (matches({s.d + h, s.k, s.v}, p) - m) / h;
        const double dm_dv = (matches({s.d, s.k, s.v + h}, p) - m) / h;
        CHECK(dm_dd >= -1e-6);
        CHECK(dm_dd <= 1.0 + 1e-6);
        CHECK(dm_dv >= -1e-6);
        CHECK(dm_dv <= 1.0 + 1e-6);
        if (s.k + h <= std::min(s.d, s.v)) {
            const double dm_dk = (matches({s.d, s.k + h, s.v}, p) - m) / h;
            CHECK(dm_dk >= -1e-6);
            CHECK(dm_dk <= 1.0 + 1e-6);
        }
    }
}

TEST_CASE("rollout and objective") {
    const ModelParams p = baseline_params();
    const FluidState s0{0.5, 0.0, 0.5};

    const Trajectory one = rollout(s0, PolicyVector{1.0}, p);
    REQUIRE(one.states.size() == 2);
    CHECK(one.matches[0] == matches(s0, p));
    CHECK(one.matches[1] == matches(step(s0, 1.0, p), p));
    CHECK(objective(one, 0.6) == one.matches[1]);

    const Trajectory traj = rollout(s0, PolicyVector::constant(15, 0.0), p);
    CHECK(traj.horizon() == 15);
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
        const auto& s = traj.states[t];
        CHECK(std::isfinite(s.d));
        CHECK(traj.matches[t] == doctest::Approx(s.k + mu(s.d - s.k, s.v - s.k, p.c)).epsilon(1e-15));
        CHECK(traj.matches[t] >= s.k);
        CHECK(traj.matches[t] <= std::min(s.d, s.v));
    }
    const double value = objective(traj, 0.6);
    CHECK(value > 0.0);
    CHECK(std::isfinite(value));
    CHECK(value == discounted_matches(s0, PolicyVector::constant(15, 0.0), p));

    CHECK(objective(traj, 0.0) == traj.matches[1]);
    Trajectory flat;
    flat.states.assign(5, FluidState{1, 0, 1});
    flat.matches.assign(5, 0.25);
    CHECK(objective(flat, 1.0) == doctest::Approx(4 * 0.25));

    CHECK_THROWS_AS(rollout(s0, PolicyVector{}, p), DomainError);
    CHECK_THROWS_AS(PolicyVector({0.5, 1.2}), DomainError);
}

TEST_CASE("rollout: a fixed point stays put") {
    // Empty market is a fixed point of every policy.
    const ModelParams p = baseline_params();
    const Trajectory traj = rollout({0.0, 0.0, 0.0}, PolicyVector::constant(6, 0.7), p);
    for (const auto& s : traj.states) {
        CHECK(s.d == 0.0);
        CHECK(s.k == 0.0);
        CHECK(s.v == 0.0);
    }
    // No volunteers: donations decay, nothing else moves.
    const Trajectory lone = rollout({0.4, 0.0, 0.0}, PolicyVector::constant(3, 1.0), p);
    CHECK(lone.states[3].d == doctest::Approx(0.4 * std::pow(0.95, 3)));
}

TEST_CASE("pathwise dominance of a superior state") {
    ParamSampler rng(99);
    int checked = 0;
    while (checked < 200) {
        const ModelParams p = rng.any();
        // v' is monotone in m only while adoption does not shrink the volunteer pool per match.
        if (p.gamma > p.alpha + p.gamma_prime) continue;
        const FluidState lo = rng.state(1.5);
        const double d = lo.d + rng.uniform(0.0, 0.5);
        const double v = lo.v + rng.uniform(0.0, 0.5);
        const FluidState hi{d, rng.uniform(0.0, std::min(d, v)), v};
        if (matches(hi, p) < matches(lo, p)) continue;
        const std::size_t T = 1 + static_cast<std::size_t>(rng.uniform(0.0, 10.0)) % 10;
        std::vector<double> z(T);
        for (auto& x : z) x = rng.uniform(0.0, 1.0) < 0.3 ? static_cast<double>(rng.uniform(0.0, 1.0) < 0.5)
                                                           : rng.uniform(0.0, 1.0);
        const PolicyVector policy(z);
        const Trajectory a = rollout(hi, policy, p);
        const Trajectory b = rollout(lo, policy, p);
        for (std::size_t t = 0; t <= T; ++t) {
            CHECK(a.states[t].d >= b.states[t].d - 1e-12);
            CHECK(a.states[t].v >= b.states[t].v - 1e-12);
            CHECK(a.matches[t] >= b.matches[t] - 1e-12);
        }
        ++checked;
    }
}

TEST_CASE("dominance breaks when adopter loss outweighs growth") {
    const ModelParams p = ModelParams::make(0.1, 0.0, 0.9, 0.0, 0.1, 0.2, 10.0, 0.5);
    const FluidState lo{0.5, 0.0, 1.0};
    const FluidState hi{1.0, 0.0, 1.0};
    REQUIRE(matches(hi, p) > matches(lo, p));
    CHECK(step(hi, 1.0, p).v < step(lo, 1.0, p).v);
}
