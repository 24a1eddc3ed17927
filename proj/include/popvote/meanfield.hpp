#pragma once

#include "popvote/protocol.hpp"

#include <cstdint>
#include <vector>

namespace popvote::meanfield {

/// Setting for the binary-voting drift analysis: n agents of uniform
/// degree d, initial vote fractions rho1 < rho2 with rho1 + rho2 = 1.
/// Time throughout this module is in runtime units (interactions / n);
/// multiply by n to convert a time axis to interaction counts.
struct Params {
    std::uint32_t agents = 0;  // n
    std::uint32_t degree = 0;  // d
    double rho1 = 0.0;
    double rho2 = 0.0;

    double minority_count() const { return rho1 * agents; }  // x(0)
    double majority_count() const { return rho2 * agents; }  // y(0)

    /// Throws std::invalid_argument unless n >= 2, d >= 1,
    /// 0 <= rho1 < rho2 <= 1 and rho1 + rho2 = 1. Operations with
    /// stricter preconditions (rho1 > 0, n*rho1 > 1) check those
    /// themselves.
    void validate() const;
};

struct TrajectoryPoint {
    double t = 0.0;
    double value = 0.0;
};

/// Uniformly sampled (time, value) curve, one point per integrator step.
using Trajectory = std::vector<TrajectoryPoint>;

/// Phase-1 bound on the expected number of minority singletons:
/// integrates dx/dt = -(1 - ((1-x/n)^(d+1) + (1-y/n)^(d+1)
/// - (1-(x+y)/n)^(d+1))) with y = x + (y0 - x0), x(0) = n*rho1, by
/// classical fixed-step RK4, clamping x at 0.
Trajectory phase1_ode(const Params& params, double t_end, double dt = 0.01);

/// Closed-form approximation of the phase-1 curve,
/// x(t) = (y0-x0) / ((y0/x0) * exp(d(d+1)(y0-x0) t / n^2) - 1).
/// Requires rho1 > 0.
double phase1_closed_form(const Params& params, double t);

/// Upper bound on the phase-1 completion time:
/// n / (d(d+1)(rho2-rho1)) * (log(rho1/rho2) + log(n(rho2-rho1)+1)).
/// Requires rho1 > 0.
double t_c1_bound(const Params& params);

/// Constant decay rate of the phase-2 bound:
/// (1/n) * (1 - (1 - (y0-x0)/n)^d).
double phase2_rate(const Params& params);

/// Phase-2 bound on the expected number of wrong memories: integrates
/// dz/dt = -phase2_rate * z from z(0) = z0 (requires 0 <= z0 <= n*rho1).
Trajectory phase2_ode(const Params& params, double z0, double t_end, double dt = 0.01);

/// Upper bound on the phase-2 completion time:
/// n / (d (rho2-rho1)) * log(n rho1). Requires n*rho1 > 1.
double t_c2_bound(const Params& params);

/// Probability of observing a participant split (v2i, m1i, m2i) over a
/// (d+1)-agent interaction under uniform mixing in the second phase
/// (census.v1 must be 0): the multinomial
///   (d+1)! / (v2i! m1i! m2i!) * (v2/n)^v2i (m1/n)^m1i (m2/n)^m2i.
/// The counts must sum to d+1.
double assignment_probability(int v2i, int m1i, int m2i, const GroupCensus& groups,
                              std::uint32_t n, std::uint32_t d);

/// Expected one-interaction change of the wrong-memory group size m1,
/// obtained by enumerating all participant splits of a (d+1)-agent
/// interaction and applying the broadcast memory semantics at the group
/// level: with any {c2} singleton present the value plurality is c2 and
/// all m1i wrong memories flip; with none, the memory plurality decides;
/// a double tie leaves memories unchanged. Requires census.v1 == 0 and
/// d == 4 (the degree the group-level reduction is stated for).
double expected_m1_drift(const GroupCensus& groups, std::uint32_t n, std::uint32_t d = 4);

/// The degree-4 drift polynomial m1 * (m2(m2^3-m1^3) + 4m1^3v2 + ...):
/// the expected drift equals -c times this for a positive constant c.
double drift_polynomial(const GroupCensus& groups);

struct DriftFit {
    double c = 0.0;                  // fitted positive constant
    double relative_residual = 0.0;  // ||drift + c*poly|| / ||drift||
};

/// Least-squares fit of the drift constant over the full (m1, m2) grid
/// with v1 = 0, v2 = n - m1 - m2.
DriftFit fit_drift_constant(std::uint32_t n, std::uint32_t d = 4);

} // namespace popvote::meanfield
