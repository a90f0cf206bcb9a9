#ifndef HETCGGM_PENALTY_HPP
#define HETCGGM_PENALTY_HPP

#include "hetcggm/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

// Minimax concave penalty (MCP), its derivative, and the closed-form
// thresholding/proximal operators used by the solvers. All pure.

namespace hetcggm {

template <typename Scalar = double>
struct McpSpec {
    Scalar lambda = 0;
    Scalar a = 3;
};

/// p(t, lambda) = lambda*t - t^2/(2a) for t <= a*lambda, a*lambda^2/2 beyond.
template <typename Scalar>
Scalar mcp_value(Scalar t, const McpSpec<Scalar>& spec) {
    if (t < 0) throw std::invalid_argument("mcp_value: t must be nonnegative");
    if (t >= spec.a * spec.lambda) return spec.a * spec.lambda * spec.lambda / 2;
    return spec.lambda * t - t * t / (2 * spec.a);
}

/// p'(t, lambda) = (lambda - t/a)_+ ; p'(0+) = lambda.
template <typename Scalar>
Scalar mcp_deriv(Scalar t, const McpSpec<Scalar>& spec) {
    if (t < 0) throw std::invalid_argument("mcp_deriv: t must be nonnegative");
    return std::max(spec.lambda - t / spec.a, Scalar(0));
}

/// S(t, lambda) = (|t| - lambda)_+ * sign(t).
template <typename Scalar>
Scalar soft_threshold(Scalar t, Scalar lambda) {
    const Scalar mag = std::abs(t) - lambda;
    if (mag <= 0) return Scalar(0);
    return t > 0 ? mag : -mag;
}

/// argmin_xi (kappa/2)(xi - u)^2 + p(|xi|, lambda). Firm thresholding:
/// S(u, lambda/kappa)/(1 - 1/(a*kappa)) inside |u| <= a*lambda, identity
/// beyond. Requires a*kappa > 1 (the inner piece is convex exactly then).
template <typename Scalar>
Scalar mcp_prox_scalar(Scalar u, Scalar lambda, Scalar a, Scalar kappa) {
    if (!(a * kappa > 1))
        throw std::invalid_argument("mcp_prox_scalar: requires a*kappa > 1");
    if (lambda <= 0) return u;
    if (std::abs(u) > a * lambda) return u;
    return soft_threshold(u, lambda / kappa) / (1 - 1 / (a * kappa));
}

namespace detail {

// Collinear reduction of the group prox: with v = c * w/||w||, c >= 0,
// the objective is g(c) = (kp/2)(c - r)^2 + p(sqrt(eta + c^2), lambda).
// For a*kp > 1, g is C^1 with nondecreasing derivative, hence convex:
// the minimizer is the unique root of g' (or an endpoint).
template <typename Scalar>
Scalar group_prox_magnitude(Scalar r, Scalar eta, Scalar lambda, Scalar a, Scalar kp) {
    if (lambda <= 0 || r <= 0) return std::max(r, Scalar(0));
    const Scalar plateau = a * lambda;  // penalty constant once sqrt(eta + c^2) >= a*lambda
    if (eta >= plateau * plateau) return r;
    if (eta == 0) {
        // Standard group-MCP magnitude rule.
        if (r > plateau) return r;
        return soft_threshold(r, lambda / kp) / (1 - 1 / (a * kp));
    }
    const Scalar cb = std::sqrt(plateau * plateau - eta);  // region boundary
    auto gprime = [&](Scalar c) {
        Scalar d = kp * (c - r);
        const Scalar s = std::sqrt(eta + c * c);
        if (s < plateau) d += c * (lambda / s - 1 / a);
        return d;
    };
    if (gprime(cb) <= 0) return r;  // minimizer sits in the plateau region, at c = r
    // Root of g' in [0, cb]; g'(0) = -kp*r < 0. Newton with bisection fallback.
    Scalar lo = 0, hi = cb;
    Scalar c = std::min(r, cb);
    for (int it = 0; it < 200; ++it) {
        const Scalar s = std::sqrt(eta + c * c);
        const Scalar g1 = kp * (c - r) + c * (lambda / s - 1 / a);
        if (g1 > 0) hi = c; else lo = c;
        const Scalar g2 = kp + lambda * eta / (s * s * s) - 1 / a;
        Scalar cn = c - g1 / g2;
        if (!(cn > lo && cn < hi)) cn = (lo + hi) / 2;
        if (std::abs(cn - c) <= Scalar(1e-16) * (1 + std::abs(c))) { c = cn; break; }
        c = cn;
    }
    return c;
}

}  // namespace detail

/// argmin_v (kappa'/2)||v - w||^2 + p(sqrt(eta + ||v||^2), lambda).
/// Output is collinear with w; the magnitude solves the reduced 1-D
/// problem exactly (the closed form quoted in the literature is only
/// exact at eta = 0). Requires a*kappa' > 1, eta >= 0.
template <typename Scalar>
Vector<Scalar> group_mcp_prox(const Vector<Scalar>& w, Scalar eta, Scalar lambda,
                              Scalar a, Scalar kappa_prime) {
    if (!(a * kappa_prime > 1))
        throw std::invalid_argument("group_mcp_prox: requires a*kappa_prime > 1");
    if (eta < 0) throw std::invalid_argument("group_mcp_prox: eta must be nonnegative");
    const Scalar r = w.norm();
    if (r == 0) return Vector<Scalar>::Zero(w.size());
    const Scalar c = detail::group_prox_magnitude(r, eta, lambda, a, kappa_prime);
    return w * (c / r);
}

}  // namespace hetcggm

#endif  // HETCGGM_PENALTY_HPP
