#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "spotmatch/error.hpp"
#include "spotmatch/fluid.hpp"
#include "spotmatch/matching.hpp"
#include "spotmatch/policy.hpp"
#include "test_support.hpp"

using namespace spotmatch;
using spotmatch::testing::baseline_params;
using spotmatch::testing::central_difference;
using spotmatch::testing::ParamSampler;

namespace {

std::vector<double> unit_grid(int points) {
    std::vector<double> z(points);
    for (int i = 0; i < points; ++i) z[i] = static_cast<double>(i) / (points - 1);
    z.back() = 1.0;
    return z;
}

double m1_of(const FluidState& s, const ModelParams& p, double z) { return matches(step(s, z, p), p); }

// Brute force over every binary policy, written independently of the search.
double best_binary_value(const FluidState& s, const ModelParams& p, std::size_t T) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << T); ++code) {
        FluidState x = s;
        double value = 0.0;
        double weight = 1.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double z = static_cast<double>((code >> (T - 1 - t)) & 1U);
            x = step(x, z, p);
            value += weight * matches(x, p);
            weight *= p.delta;
        }
        best = std::max(best, value);
    }
    return best;
}

}  // namespace

TEST_CASE("regime classification") {
    CHECK(classify_regime(baseline_params()) == Regime::AGN);
    CHECK(classify_regime(ModelParams::make(0.3, 0.1, 0.1, 0.1, 0.1, 0.2, 5, 0.5)) == Regime::AGD);
    CHECK(classify_regime(ModelParams::make(0.3, 0.0, 0.3, 0.1, 0.1, 0.2, 5, 0.5)) == Regime::AGD);
    CHECK(std::string(to_string(Regime::AGN)) == "AGN");
    CHECK(std::string(to_string(Regime::AGD)) == "AGD");
}

TEST_CASE("myopic decision on the two reference states") {
    const ModelParams p = baseline_params();
    const FluidState left{0.8, 0.0, 0.8};
    const FluidState right{1.6, 0.0, 0.8};
    CHECK(myopic_decision(left, p) == 1);
    CHECK(myopic_decision(right, p) == 0);
    CHECK(m1_of(left, p, 1.0) > m1_of(left, p, 0.0));
    CHECK(m1_of(right, p, 0.0) > m1_of(right, p, 1.0));

    const auto curve_l = m1_curve(left, p, unit_grid(101));
    const auto curve_r = m1_curve(right, p, unit_grid(101));
    const auto by_m1 = [](const CurvePoint& a, const CurvePoint& b) { return a.m1 < b.m1; };
    CHECK(std::max_element(curve_l.begin(), curve_l.end(), by_m1)->z == 1.0);
    CHECK(std::max_element(curve_r.begin(), curve_r.end(), by_m1)->z == 0.0);
}

TEST_CASE("myopic decision edge cases") {
    const ModelParams p = baseline_params();
    CHECK(myopic_decision({1.0, 0.0, 0.0}, p) == 1);  // m0 = 0
    CHECK(std::isinf(myopic_threshold({1.0, 0.0, 0.0}, p)));
    const ModelParams boundary = ModelParams::make(0.5, 0.25, 0.25, 0.2, 0.05, 0.2, 10, 0.6);
    CHECK(std::isinf(myopic_threshold({5.0, 0.0, 5.0}, boundary)));
    CHECK(myopic_decision({5.0, 0.0, 5.0}, boundary) == 1);
    ParamSampler rng(3);
    for (int i = 0; i < 200; ++i) CHECK(myopic_decision(rng.state(), rng.agd()) == 1);
}

TEST_CASE("m1 curve: endpoint argmax, no interior bump, agreement with the rule") {
    ParamSampler rng(4);
    const auto grid = unit_grid(101);
    for (int i = 0; i < 500; ++i) {
        const ModelParams p = rng.any();
        const FluidState s = rng.state();
        const auto curve = m1_curve(s, p, grid);
        REQUIRE(curve.size() == grid.size());
        double best = -1.0;
        for (const auto& pt : curve) best = std::max(best, pt.m1);
        CHECK(std::max(curve.front().m1, curve.back().m1) >= best - 1e-9);
        for (std::size_t j = 1; j + 1 < curve.size(); ++j) {
            const bool bump = curve[j].m1 > curve[j - 1].m1 + 1e-12 && curve[j].m1 > curve[j + 1].m1 + 1e-12;
            CHECK_FALSE(bump);
        }
        // The closed-form rule against a direct comparison, skipping near-ties.
        const double m_one = m1_of(s, p, 1.0);
        const double m_zero = m1_of(s, p, 0.0);
        if (std::abs(m_one - m_zero) > 1e-10 * std::max(1.0, m_one)) {
            CHECK(myopic_decision(s, p) == (m_one > m_zero ? 1 : 0));
        }
    }
}

TEST_CASE("m1 curve on a saturated spot market") {
    // Every period-0 match is an adoption. The curve falls, then rises: once
    // it starts increasing it never turns down again.
    const ModelParams p = baseline_params();
    const auto curve = m1_curve({0.8, 0.8, 0.8}, p, unit_grid(101));
    bool rising = false;
    for (std::size_t j = 1; j < curve.size(); ++j) {
        const double diff = curve[j].m1 - curve[j - 1].m1;
        if (diff > 1e-15) rising = true;
        if (rising) CHECK(diff >= -1e-15);
    }
    CHECK((curve.back().m1 > curve.front().m1) == (myopic_decision({0.8, 0.8, 0.8}, p) == 1));
}

TEST_CASE("dm1/dz0 against finite differences") {
    const ModelParams p = baseline_params();
    const FluidState left{0.8, 0.0, 0.8};
    const auto f = [&](double z) { return m1_of(left, p, z); };
    CHECK(std::abs(dm1_dz0(left, p, 0.5) - central_difference(f, 0.5)) < 1e-6);
    CHECK(dm1_dz0({1.0, 0.0, 0.0}, p, 0.3) == 0.0);

    ParamSampler rng(5);
    for (int i = 0; i < 500; ++i) {
        const ModelParams q = rng.any();
        const FluidState s = rng.state();
        const double z = rng.uniform(0.01, 0.99);
        const auto g = [&](double x) { return m1_of(s, q, x); };
        CHECK(std::abs(dm1_dz0(s, q, z) - central_difference(g, z)) < 1e-6);
    }
    for (int i = 0; i < 200; ++i) {
        const ModelParams q = rng.agd();
        const FluidState s = rng.state();
        for (double z = 0.0; z <= 1.0; z += 0.1) CHECK(dm1_dz0(s, q, z) >= -1e-15);
    }
}

TEST_CASE("minimum market thickness on the reference parameters") {
    const ModelParams p = baseline_params();
    const MMTSolution sol = solve_mmt(p);
    const double bound7 = std::log(0.95 / 0.21) / 0.95 / 10.0;
    CHECK(bound7 == doctest::Approx(0.15888).epsilon(1e-4));
    CHECK(sol.d_bar >= bound7 - 1e-12);
    for (double r : sol.constraint_slack) CHECK(r >= 0.0);
    CHECK(sol.constraint_slack[3] <= 1e-8);
    const auto res = mmt_residuals(p, sol.d_bar, sol.v_bar);
    for (std::size_t i = 0; i < 4; ++i) CHECK(res[i] == doctest::Approx(sol.constraint_slack[i]).epsilon(1e-12));

    // Dense brute-force scan: nothing feasible with d noticeably below d_bar.
    const auto feasible = [&](double d, double v) {
        const auto r = mmt_residuals(p, d, v);
        return r[0] >= 0 && r[1] >= 0 && r[2] >= 0 && r[3] >= 0;
    };
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 800; ++i) {
        const double d = 0.0025 * i;
        for (int j = 1; j <= 800; ++j) {
            if (feasible(d, 0.0025 * j)) {
                best_d = std::min(best_d, d);
                break;
            }
        }
        if (best_d < std::numeric_limits<double>::infinity()) break;
    }
    CHECK(best_d >= sol.d_bar - 1e-9);
    CHECK(best_d <= sol.d_bar + 0.0025 + 1e-9);

    // Absorbing region.
    const FluidState start{sol.d_bar + 0.01, 0.0, sol.v_bar + 0.01};
    const FluidState next = step(start, 0.0, p);
    CHECK(next.d >= sol.d_bar);
    CHECK(next.v >= sol.v_bar);
    CHECK(myopic_decision(start, p) == 0);
    CHECK(myopic_decision(next, p) == 0);

    const MMTSolution coarse = solve_mmt(p, 1e-2, 1e-10);
    CHECK(coarse.d_bar == doctest::Approx(sol.d_bar).epsilon(1e-7));
}

TEST_CASE("minimum market thickness: random AGN instances") {
    ParamSampler rng(6);
    int solved = 0;
    for (int i = 0; i < 300 && solved < 60; ++i) {
        const ModelParams p = rng.agn();
        if (p.alpha >= p.alpha_prime + p.gamma_prime) continue;
        MMTSolution sol;
        try {
            sol = solve_mmt(p);
        } catch (const ConvergenceError&) {
            continue;
        }
        ++solved;
        for (double r : sol.constraint_slack) CHECK(r >= -1e-12);
        CHECK(sol.constraint_slack[3] <= 1e-8);
        // A hair below d_bar some constraint other than (10) is violated
        // for every v, in particular for the tight one.
        const double d = sol.d_bar - 1e-5;
        if (d > 0) {
            const auto r = mmt_residuals(p, d, mmt_tight_v(p, d));
            CHECK((r[0] < 0 || r[1] < 0 || r[2] < 0));
        }
        for (int j = 0; j < 5; ++j) {
            const FluidState s{sol.d_bar + rng.uniform(0, 1), 0.0, sol.v_bar + rng.uniform(0, 1)};
            const FluidState n = step(s, 0.0, p);
            CHECK(n.d >= sol.d_bar * (1 - 1e-12));
            CHECK(n.v >= sol.v_bar * (1 - 1e-12));
            CHECK(myopic_decision(s, p) == 0);
        }
    }
    CHECK(solved >= 20);
}

TEST_CASE("minimum market thickness errors") {
    CHECK_THROWS_AS(solve_mmt(ModelParams::make(0.3, 0.1, 0.1, 0.1, 0.1, 0.2, 5, 0.5)), RegimeError);
    CHECK_THROWS_AS(solve_mmt(ModelParams::make(0.2, 0.15, 0.06, 0.2, 0.0, 0.2, 10, 0.6)), DomainError);
    MMTOptions tiny;
    tiny.d_ceiling = 0.1;
    CHECK_THROWS_AS(solve_mmt(baseline_params(), tiny), ConvergenceError);
}

TEST_CASE("approximation factor") {
    const ModelParams p = baseline_params(0.6);
    CHECK(approx_factor(p, 0.5, 0.5, 15) == doctest::Approx(0.704).epsilon(0.001 / 0.704));
    // Oracle: the formula evaluated term by term.
    const double r = 0.6 * std::max(1 - 0.05 + 0.2, 1 - 0.2 + 0.15 + 0.2);
    const double a3 = std::max(0.2, 0.15 + 0.2);
    const double kappa = (1 / (1 - std::pow(r, 15)) + a3 / (1 - r)) * std::log(2.0) / (10 * 0.5);
    CHECK(approx_factor(p, 0.5, 0.5, 15) == doctest::Approx(1 - kappa).epsilon(1e-12));
    CHECK(approx_factor(p, 0.05, 0.5, 15) == 0.0);
    CHECK(approx_factor(p, 1e6, 1e6, 15) > 0.999999);
    CHECK(approx_factor(baseline_params(1.0), 0.5, 0.5, 15) == 0.0);
    CHECK_THROWS_AS(approx_factor(ModelParams::make(0.3, 0.1, 0.1, 0.1, 0.1, 0.2, 5, 0.5), 1, 1, 5), RegimeError);

    const FluidState s0{0.5, 0.0, 0.5};
    const double ratio = realized_ratio(s0, p, 15);
    CHECK(ratio >= approx_factor(p, 0.5, 0.5, 15));
    CHECK(ratio <= 1.0);
    const double U = match_min_upper_bound(s0, p, 15);
    CHECK(ratio * U == doctest::Approx(discounted_matches(s0, PolicyVector::constant(15, 0.0), p)));
    CHECK_THROWS_AS(realized_ratio({0.0, 0.0, 0.5}, p, 15), DomainError);
}

TEST_CASE("match-min upper bound") {
    // One step with no dropout: both pools grow by their coefficient times min(a, b).
    const ModelParams p = ModelParams::make(1e-9, 0.0, 0.5, 0.3, 0.0, 0.4, 10, 0.9);
    const double U = match_min_upper_bound({0.6, 0.0, 1.0}, p, 1);
    CHECK(U == doctest::Approx(std::min(0.6 + 0.4 * 0.6, 1.0 * (1 - 1e-9) + 0.3 * 0.6)).epsilon(1e-12));

    ParamSampler rng(7);
    int checked = 0;
    while (checked < 100) {
        const ModelParams q = rng.agn();
        const FluidState s = rng.state(2.0, false);
        if (std::min(s.d, s.v) <= 1e-3) continue;
        const std::size_t T = 1 + checked % 10;
        std::vector<double> z(T);
        for (auto& x : z) x = rng.uniform(0, 1) < 0.5 ? 0.0 : 1.0;
        const double ub = match_min_upper_bound(s, q, T);
        CHECK(ub >= discounted_matches(s, PolicyVector(z), q) - 1e-12);
        CHECK(ub >= discounted_matches(s, PolicyVector::constant(T, 0.0), q) - 1e-12);
        const double ratio = realized_ratio(s, q, T);
        CHECK(ratio <= 1.0 + 1e-12);
        const double r = q.delta * std::max(1 - q.beta + q.beta_prime, 1 - q.alpha + q.alpha_prime + q.gamma_prime);
        if (r < 1) CHECK(ratio >= approx_factor(q, s.d, s.v, T) - 1e-12);
        ++checked;
    }
}

TEST_CASE("exhaustive search") {
    const ModelParams p = baseline_params();
    const FluidState s0{0.5, 0.0, 0.5};

    SUBCASE("T = 1 agrees with the myopic rule") {
        ParamSampler rng(8);
        for (int i = 0; i < 200; ++i) {
            const ModelParams q = rng.any();
            const FluidState s = rng.state();
            const double m_one = m1_of(s, q, 1.0);
            const double m_zero = m1_of(s, q, 0.0);
            if (std::abs(m_one - m_zero) <= 1e-12) continue;
            const auto res = exhaustive_policy_search(s, q, 1, {0.0, 1.0});
            CHECK(res.best_policy[0] == myopic_decision(s, q));
        }
    }

    SUBCASE("AGD favours full adoption") {
        ParamSampler rng(9);
        for (int i = 0; i < 20; ++i) {
            const auto res = exhaustive_policy_search(rng.state(), rng.agd(), 5, {0.0, 0.5, 1.0});
            CHECK(res.best_policy == PolicyVector::constant(5, 1.0));
            CHECK(res.all_or_nothing);
        }
    }

    SUBCASE("thick market favours no adoption") {
        const MMTSolution sol = solve_mmt(p);
        const FluidState thick{sol.d_bar + 0.05, 0.0, sol.v_bar + 0.05};
        const auto res = exhaustive_policy_search(thick, p, 8, {0.0, 1.0});
        CHECK(res.best_policy == PolicyVector::constant(8, 0.0));
    }

    SUBCASE("value, bookkeeping and brute-force agreement") {
        const auto res = exhaustive_policy_search(s0, p, 10, {1.0, 0.0, 0.0});
        CHECK(res.evaluations == 1024);
        CHECK(res.best_value == discounted_matches(s0, res.best_policy, p));
        CHECK(res.best_value == doctest::Approx(best_binary_value(s0, p, 10)).epsilon(1e-14));
        CHECK(res.all_or_nothing);
    }

    SUBCASE("finer candidates never lose to binary ones") {
        const auto fine = exhaustive_policy_search(s0, p, 5, {0.0, 0.25, 0.5, 0.75, 1.0});
        const auto coarse = exhaustive_policy_search(s0, p, 5, {0.0, 1.0});
        CHECK(fine.best_value >= coarse.best_value);
        CHECK(fine.evaluations == 3125);
    }

    SUBCASE("ties break toward adoption") {
        // An empty donation pool: every policy is worth zero.
        const auto res = exhaustive_policy_search({0.0, 0.0, 1.0}, p, 3, {0.0, 1.0});
        CHECK(res.best_policy == PolicyVector::constant(3, 1.0));
        CHECK(res.best_value == 0.0);
    }

    SUBCASE("thread count does not change the answer") {
        SearchOptions one;
        SearchOptions many;
        many.threads = 4;
        const auto a = exhaustive_policy_search(s0, p, 7, {0.0, 0.5, 1.0}, one);
        const auto b = exhaustive_policy_search(s0, p, 7, {0.0, 0.5, 1.0}, many);
        CHECK(a.best_policy == b.best_policy);
        CHECK(a.best_value == b.best_value);
        CHECK(a.evaluations == b.evaluations);
    }

    SUBCASE("budget") {
        SearchOptions small;
        small.budget = 100;
        CHECK_THROWS_AS(exhaustive_policy_search(s0, p, 7, {0.0, 1.0}, small), BudgetError);
        CHECK_THROWS_AS(exhaustive_policy_search(s0, p, 40, {0.0, 1.0}), BudgetError);
        CHECK_THROWS_AS(exhaustive_policy_search(s0, p, 3, {}), DomainError);
        CHECK_THROWS_AS(exhaustive_policy_search(s0, p, 3, {0.0, 1.5}), DomainError);
    }
}

TEST_CASE("myopic switch curve") {
    const ModelParams p = baseline_params();
    const double tol = 1e-8;
    std::vector<double> v_grid;
    for (int i = 1; i <= 30; ++i) v_grid.push_back(0.05 * i);
    const auto curve = myopic_switch_curve(p, v_grid, 1e-6, 10.0, tol);
    REQUIRE(curve.size() == v_grid.size());
    for (const auto& pt : curve) {
        CHECK(myopic_decision({pt.d_star - 2 * tol, 0.0, pt.v}, p) == 1);
        CHECK(myopic_decision({pt.d_star + 2 * tol, 0.0, pt.v}, p) == 0);
    }
    const auto at08 = myopic_switch_curve(p, {0.8}, 1e-6, 10.0, tol);
    CHECK(at08[0].d_star > 0.8);
    CHECK(at08[0].d_star < 1.6);

    CHECK_THROWS_AS(myopic_switch_curve(ModelParams::make(0.3, 0.1, 0.1, 0.1, 0.1, 0.2, 5, 0.5), {0.8}, 1e-6, 10, tol),
                    BracketError);
    CHECK_THROWS_AS(myopic_switch_curve(p, {0.8}, 2.0, 10.0, tol), BracketError);
}

TEST_CASE("arrow field") {
    const ModelParams p = baseline_params(0.6);
    std::vector<double> grid;
    for (int i = 1; i <= 15; ++i) grid.push_back(0.1 * i);
    const auto field = arrow_field(p, grid, grid, 12);
    REQUIRE(field.size() == grid.size() * grid.size());
    CHECK(field[1].d == grid[0]);
    CHECK(field[1].v == grid[1]);

    const MMTSolution sol = solve_mmt(p);
    bool disagrees_with_myopic = false;
    for (const auto& pt : field) {
        const FluidState s{pt.d, 0.0, pt.v};
        const FluidState next = step(s, pt.z0_star, p);
        CHECK(pt.dd == doctest::Approx(next.d - pt.d).epsilon(1e-14));
        CHECK(pt.dv == doctest::Approx(next.v - pt.v).epsilon(1e-14));
        CHECK(pt.myopic_z == myopic_decision(s, p));
        if (pt.d >= sol.d_bar && pt.v >= sol.v_bar) CHECK(pt.z0_star == 0);
        if (pt.myopic_z == 1 && pt.z0_star == 0) disagrees_with_myopic = true;
    }
    CHECK(disagrees_with_myopic);

    SearchOptions small;
    small.budget = 10;
    CHECK_THROWS_AS(arrow_field(p, {0.5}, {0.5}, 5, small), BudgetError);
}
