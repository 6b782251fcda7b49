#include "spotmatch/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spotmatch/error.hpp"
#include "spotmatch/matching.hpp"

namespace spotmatch {

namespace {

bool is_prob(double x) { return x >= 0.0 && x <= 1.0; }

void check_z(double z) {
    if (!is_prob(z)) detail::domain_fail("adoption fraction must lie in [0, 1], got " + std::to_string(z));
}

double feasibility_slack(const FluidState& s) {
    return FluidState::kTolerance * std::max(1.0, std::max(s.d, s.v));
}

}  // namespace

void ModelParams::validate() const {
    using detail::require;
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    require(alpha_prime >= 0.0 && alpha_prime <= alpha, "alpha_prime must lie in [0, alpha]");
    require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
    require(gamma_prime >= 0.0 && std::isfinite(gamma_prime), "gamma_prime must be finite and nonnegative");
    require(beta >= 0.0 && beta < beta_prime, "beta must satisfy 0 <= beta < beta_prime");
    require(beta_prime - beta <= 1.0, "beta_prime - beta must be a probability");
    require(c > 0.0 && std::isfinite(c), "c must be finite and positive");
    require(is_prob(delta), "delta must lie in [0, 1]");
}

ModelParams ModelParams::make(double alpha, double alpha_prime, double gamma, double gamma_prime,
                              double beta, double beta_prime, double c, double delta) {
    ModelParams p{alpha, alpha_prime, gamma, gamma_prime, beta, beta_prime, c, delta};
    p.validate();
    return p;
}

double non_adoption_growth_benefit(const ModelParams& params) {
    return params.gamma - params.alpha + params.alpha_prime;
}

void FluidState::validate() const {
    if (!(d >= 0.0) || !(v >= 0.0) || !(k >= 0.0) || !std::isfinite(d) || !std::isfinite(v))
        detail::domain_fail("fluid state components must be finite and nonnegative");
    if (k > std::min(d, v) + feasibility_slack(*this))
        detail::domain_fail("fluid state violates k <= min(d, v)");
}

PolicyVector::PolicyVector(std::vector<double> z) : z_(std::move(z)) {
    for (double x : z_) check_z(x);
}

PolicyVector::PolicyVector(std::initializer_list<double> z) : PolicyVector(std::vector<double>(z)) {}

PolicyVector PolicyVector::constant(std::size_t horizon, double z) {
    return PolicyVector(std::vector<double>(horizon, z));
}

bool PolicyVector::all_or_nothing() const {
    return std::all_of(z_.begin(), z_.end(), [](double x) { return x == 0.0 || x == 1.0; });
}

double matches(const FluidState& state, const ModelParams& params) {
    state.validate();
    // Within-tolerance excess of k is treated as an empty spot side.
    const double a = std::max(0.0, state.d - state.k);
    const double b = std::max(0.0, state.v - state.k);
    return state.k + mu(a, b, params.c);
}

FluidState step(const FluidState& state, double z, const ModelParams& params) {
    check_z(z);
    const double m = matches(state, params);
    const double growth = non_adoption_growth_benefit(params);
    FluidState next;
    next.d = (1.0 - params.beta) * state.d + params.beta_prime * m;
    next.k = (1.0 - params.gamma) * z * m;
    next.v = (1.0 - params.alpha) * state.v + (params.alpha_prime + params.gamma_prime) * m - growth * z * m;
    if (next.k > std::min(next.d, next.v) + feasibility_slack(next) || next.v < 0.0)
        throw Error("step produced an infeasible state (k > min(d, v)); parameters or state are inconsistent");
    return next;
}

Trajectory rollout(const FluidState& state0, const PolicyVector& policy, const ModelParams& params) {
    if (policy.size() == 0) detail::domain_fail("rollout: policy horizon must be at least 1");
    Trajectory traj;
    traj.states.reserve(policy.size() + 1);
    traj.matches.reserve(policy.size() + 1);
    FluidState s = state0;
    for (std::size_t t = 0; t < policy.size(); ++t) {
        traj.states.push_back(s);
        traj.matches.push_back(matches(s, params));
        s = step(s, policy[t], params);
    }
    traj.states.push_back(s);
    traj.matches.push_back(matches(s, params));
    return traj;
}

double objective(const Trajectory& traj, double delta) {
    if (traj.matches.size() < 2 || traj.matches.size() != traj.states.size())
        detail::domain_fail("objective: trajectory must hold m_0..m_T with T >= 1");
    double total = 0.0;
    double weight = 1.0;
    for (std::size_t t = 1; t < traj.matches.size(); ++t) {
        total += weight * traj.matches[t];
        weight *= delta;
    }
    return total;
}

double discounted_matches(const FluidState& state0, const PolicyVector& policy,
                          const ModelParams& params) {
    if (policy.size() == 0) detail::domain_fail("policy horizon must be at least 1");
    FluidState s = state0;
    double total = 0.0;
    double weight = 1.0;
    for (std::size_t t = 0; t < policy.size(); ++t) {
        s = step(s, policy[t], params);
        total += weight * matches(s, params);
        weight *= params.delta;
    }
    return total;
}

}  // namespace spotmatch
