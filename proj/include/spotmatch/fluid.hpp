#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace spotmatch {

/// Behavioral probabilities of the repeated market.
///
///   alpha        dropout of an unmatched volunteer
///   alpha_prime  dropout reduction for a matched non-adopter (dropout alpha - alpha_prime)
///   gamma        dropout of an adopter
///   gamma_prime  new volunteers per match
///   beta         dropout of an uncompleted donation
///   beta_prime   donation growth coefficient (beta_prime - beta new donations per match)
///   c            market thickness constant
///   delta        discount factor
struct ModelParams {
    double alpha = 0.0;
    double alpha_prime = 0.0;
    double gamma = 0.0;
    double gamma_prime = 0.0;
    double beta = 0.0;
    double beta_prime = 0.0;
    double c = 1.0;
    double delta = 1.0;

    /// Throws DomainError unless every invariant holds.
    void validate() const;

    /// Builds and validates in one go.
    static ModelParams make(double alpha, double alpha_prime, double gamma, double gamma_prime,
                            double beta, double beta_prime, double c, double delta);
};

/// gamma - alpha + alpha_prime: extra volunteer growth from turning one
/// adopted match into a one-time match.
double non_adoption_growth_benefit(const ModelParams& params);

/// Scaled pool sizes: donations d, adopted pairs k, volunteers v.
struct FluidState {
    double d = 0.0;
    double k = 0.0;
    double v = 0.0;

    // Feasibility slack for k <= min(d, v) on states produced by arithmetic.
    static constexpr double kTolerance = 1e-12;

    void validate() const;
};

/// Per-period adoption fractions z_0..z_{T-1}, each in [0, 1].
class PolicyVector {
public:
    PolicyVector() = default;
    explicit PolicyVector(std::vector<double> z);
    PolicyVector(std::initializer_list<double> z);

    static PolicyVector constant(std::size_t horizon, double z);

    std::size_t size() const { return z_.size(); }
    double operator[](std::size_t t) const { return z_[t]; }
    const std::vector<double>& values() const { return z_; }

    bool all_or_nothing() const;

    friend bool operator==(const PolicyVector&, const PolicyVector&) = default;

private:
    std::vector<double> z_;
};

/// States s_0..s_T and matches m_0..m_T of one fluid rollout.
struct Trajectory {
    std::vector<FluidState> states;
    std::vector<double> matches;

    std::size_t horizon() const { return states.empty() ? 0 : states.size() - 1; }
};

/// m = k + mu(d - k, v - k, c).
double matches(const FluidState& state, const ModelParams& params);

/// One period of the deterministic dynamics under adoption fraction z.
FluidState step(const FluidState& state, double z, const ModelParams& params);

Trajectory rollout(const FluidState& state0, const PolicyVector& policy, const ModelParams& params);

/// sum_{t=1}^T delta^{t-1} m_t. m_0 is not part of the objective.
double objective(const Trajectory& traj, double delta);

/// Convenience: objective(rollout(state0, policy, params), params.delta), but
/// without materializing the trajectory.
double discounted_matches(const FluidState& state0, const PolicyVector& policy,
                          const ModelParams& params);

}  // namespace spotmatch
