#include "popvote/meanfield.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace popvote::meanfield {

void Params::validate() const
{
    if (agents < 2) {
        throw std::invalid_argument("meanfield: need at least 2 agents");
    }
    if (degree < 1) {
        throw std::invalid_argument("meanfield: degree must be at least 1");
    }
    if (rho1 < 0.0 || rho2 > 1.0 || !(rho1 < rho2)) {
        throw std::invalid_argument("meanfield: need 0 <= rho1 < rho2 <= 1");
    }
    if (std::abs(rho1 + rho2 - 1.0) > 1e-9) {
        throw std::invalid_argument("meanfield: rho1 + rho2 must equal 1");
    }
}

namespace {

/// Fixed-step classical RK4 on an autonomous scalar ODE, clamped at 0.
template <typename F>
Trajectory integrate_rk4(double y0, double t_end, double dt, F deriv)
{
    if (!(dt > 0.0)) {
        throw std::invalid_argument("meanfield: dt must be positive");
    }
    if (t_end < 0.0) {
        throw std::invalid_argument("meanfield: t_end must be nonnegative");
    }
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));
    Trajectory out;
    out.reserve(steps + 1);
    double y = y0;
    out.push_back({0.0, y});
    for (std::size_t i = 0; i < steps; ++i) {
        const double k1 = deriv(y);
        const double k2 = deriv(y + 0.5 * dt * k1);
        const double k3 = deriv(y + 0.5 * dt * k2);
        const double k4 = deriv(y + dt * k3);
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (y < 0.0) {
            y = 0.0;
        }
        out.push_back({static_cast<double>(i + 1) * dt, y});
    }
    return out;
}

double clamped_pow(double base, double exponent)
{
    if (base < 0.0) base = 0.0;
    if (base > 1.0) base = 1.0;
    return std::pow(base, exponent);
}

} // namespace

Trajectory phase1_ode(const Params& params, double t_end, double dt)
{
    params.validate();
    const double n = params.agents;
    const double e = params.degree + 1.0;
    const double gap = params.majority_count() - params.minority_count();  // y0 - x0
    auto deriv = [n, e, gap](double x) {
        if (x < 0.0) x = 0.0;
        const double y = x + gap;
        const double none_of_either = clamped_pow(1.0 - x / n, e) + clamped_pow(1.0 - y / n, e) -
                                      clamped_pow(1.0 - (x + y) / n, e);
        return -(1.0 - none_of_either);
    };
    return integrate_rk4(params.minority_count(), t_end, dt, deriv);
}

double phase1_closed_form(const Params& params, double t)
{
    params.validate();
    if (!(params.rho1 > 0.0)) {
        throw std::invalid_argument("phase1_closed_form: requires rho1 > 0");
    }
    const double n = params.agents;
    const double d = params.degree;
    const double x0 = params.minority_count();
    const double y0 = params.majority_count();
    const double rate = d * (d + 1.0) * (y0 - x0) / (n * n);
    return (y0 - x0) / ((y0 / x0) * std::exp(rate * t) - 1.0);
}

double t_c1_bound(const Params& params)
{
    params.validate();
    if (!(params.rho1 > 0.0)) {
        throw std::invalid_argument("t_c1_bound: requires rho1 > 0");
    }
    const double n = params.agents;
    const double d = params.degree;
    const double gap = params.rho2 - params.rho1;
    return n / (d * (d + 1.0) * gap) *
           (std::log(params.rho1 / params.rho2) + std::log(n * gap + 1.0));
}

double phase2_rate(const Params& params)
{
    params.validate();
    const double n = params.agents;
    const double gap = params.majority_count() - params.minority_count();
    return (1.0 / n) * (1.0 - std::pow(1.0 - gap / n, static_cast<double>(params.degree)));
}

Trajectory phase2_ode(const Params& params, double z0, double t_end, double dt)
{
    params.validate();
    if (z0 < 0.0 || z0 > params.minority_count()) {
        throw std::invalid_argument("phase2_ode: z0 must lie in [0, n*rho1]");
    }
    const double rate = phase2_rate(params);
    return integrate_rk4(z0, t_end, dt, [rate](double z) { return -rate * z; });
}

double t_c2_bound(const Params& params)
{
    params.validate();
    if (!(params.minority_count() > 1.0)) {
        throw std::invalid_argument("t_c2_bound: requires n*rho1 > 1");
    }
    const double n = params.agents;
    const double d = params.degree;
    return n / (d * (params.rho2 - params.rho1)) * std::log(params.minority_count());
}

double assignment_probability(int v2i, int m1i, int m2i, const GroupCensus& groups,
                              std::uint32_t n, std::uint32_t d)
{
    if (groups.v1 != 0) {
        throw std::invalid_argument("assignment_probability: second phase requires v1 == 0");
    }
    if (v2i < 0 || m1i < 0 || m2i < 0 ||
        v2i + m1i + m2i != static_cast<int>(d) + 1) {
        throw std::invalid_argument("assignment_probability: counts must sum to d+1");
    }
    double coefficient = 1.0;
    // (d+1)! / (v2i! m1i! m2i!) built as a product of binomials to stay exact.
    int slots = v2i + m1i + m2i;
    for (int taken : {v2i, m1i, m2i}) {
        for (int i = 1; i <= taken; ++i) {
            coefficient *= static_cast<double>(slots--);
            coefficient /= static_cast<double>(i);
        }
    }
    const double nn = n;
    return coefficient * std::pow(groups.v2 / nn, v2i) * std::pow(groups.m1 / nn, m1i) *
           std::pow(groups.m2 / nn, m2i);
}

double expected_m1_drift(const GroupCensus& groups, std::uint32_t n, std::uint32_t d)
{
    if (groups.v1 != 0) {
        throw std::invalid_argument("expected_m1_drift: second phase requires v1 == 0");
    }
    if (d != 4) {
        throw std::invalid_argument("expected_m1_drift: stated for degree 4");
    }
    const int participants = static_cast<int>(d) + 1;
    double drift = 0.0;
    for (int v2i = 0; v2i <= participants; ++v2i) {
        for (int m1i = 0; m1i + v2i <= participants; ++m1i) {
            const int m2i = participants - v2i - m1i;
            int delta;
            if (v2i > 0 || m2i > m1i) {
                // The value sets (or memories) elect c2; every wrong
                // memory among the participants flips.
                delta = -m1i;
            } else if (m1i > m2i) {
                // No {c2} singleton and c1 wins the memory plurality: all
                // participants keep non-singleton values and end with
                // memory c1.
                delta = m2i;
            } else {
                delta = 0;
            }
            if (delta != 0) {
                drift += assignment_probability(v2i, m1i, m2i, groups, n, d) * delta;
            }
        }
    }
    return drift;
}

double drift_polynomial(const GroupCensus& groups)
{
    const double m1 = groups.m1;
    const double m2 = groups.m2;
    const double v2 = groups.v2;
    const double inner = m2 * (m2 * m2 * m2 - m1 * m1 * m1) + 4 * m1 * m1 * m1 * v2 +
                         4 * m1 * m2 * m2 * (m2 - m1) + 12 * m1 * m1 * m2 * v2 +
                         6 * m1 * m1 * v2 * v2 + 12 * m1 * m2 * m2 * v2 +
                         12 * m1 * m2 * v2 * v2 + 4 * m1 * v2 * v2 * v2 +
                         4 * m2 * m2 * m2 * v2 + 6 * m2 * m2 * v2 * v2 +
                         4 * m2 * v2 * v2 * v2 + v2 * v2 * v2 * v2;
    return m1 * inner;
}

DriftFit fit_drift_constant(std::uint32_t n, std::uint32_t d)
{
    // Least squares for drift = -c * poly over all splits of n into
    // (m1, m2, v2): c = -sum(drift*poly) / sum(poly^2).
    double cross = 0.0;
    double poly_sq = 0.0;
    double drift_sq = 0.0;
    std::vector<std::pair<double, double>> samples;
    for (std::uint32_t m1 = 0; m1 <= n; ++m1) {
        for (std::uint32_t m2 = 0; m1 + m2 <= n; ++m2) {
            const GroupCensus g{0, n - m1 - m2, m1, m2};
            const double drift = expected_m1_drift(g, n, d);
            const double poly = drift_polynomial(g);
            samples.emplace_back(drift, poly);
            cross += drift * poly;
            poly_sq += poly * poly;
            drift_sq += drift * drift;
        }
    }
    DriftFit fit;
    fit.c = poly_sq > 0.0 ? -cross / poly_sq : 0.0;
    double resid_sq = 0.0;
    for (const auto& [drift, poly] : samples) {
        const double r = drift + fit.c * poly;
        resid_sq += r * r;
    }
    fit.relative_residual = drift_sq > 0.0 ? std::sqrt(resid_sq / drift_sq) : 0.0;
    return fit;
}

} // namespace popvote::meanfield
