#pragma once

#include <utility>
#include <vector>

#include "lqstack/model.hpp"

namespace lqstack {

struct gamma_not_invertible : error {
    using error::error;
};

struct no_convergence : error {
    long iterations;
    double last_delta;
    no_convergence(const std::string& what, long it, double delta)
        : error(what), iterations(it), last_delta(delta) {}
};

// stage-gain bundle evaluated at a fixed (P1, P2) pair
struct gain_bundle {
    matrix Gamma1, S, M1, Gamma2, Y2, K2, Y1, K1;
};

inline gain_bundle stage_gains(const matrix& P1, const matrix& P2, const system_model& mdl,
                               const cost_weights& w) {
    gain_bundle g;
    const matrix& A = mdl.A;
    const matrix& B1 = mdl.B1;
    const matrix& B2 = mdl.B2;
    const matrix B1t = transpose(B1);
    const matrix B2t = transpose(B2);

    g.Gamma1 = symmetrize(w.R11 + B1t * P1 * B1);
    try {
        cholesky(g.Gamma1);
    } catch (const not_positive_definite&) {
        throw gamma_not_invertible("stage_gains: Gamma1 not positive definite");
    }
    g.S = solve_linear(g.Gamma1, B1t * P1);
    g.M1 = matrix::identity(mdl.n()) - B1 * g.S;

    const matrix M1tP2M1 = transpose(g.M1) * P2 * g.M1;
    const matrix StR21S = transpose(g.S) * w.R21 * g.S;
    g.Gamma2 = symmetrize(w.R22 + B2t * M1tP2M1 * B2 + B2t * StR21S * B2);
    try {
        cholesky(g.Gamma2);
    } catch (const not_positive_definite&) {
        throw gamma_not_invertible("stage_gains: Gamma2 not positive definite");
    }
    g.Y2 = B2t * M1tP2M1 * A + B2t * StR21S * A;
    g.K2 = -solve_linear(g.Gamma2, g.Y2);
    g.Y1 = B1t * P1 * A + B1t * P1 * B2 * g.K2;
    g.K1 = -solve_linear(g.Gamma1, g.Y1);
    return g;
}

inline std::pair<matrix, matrix> riccati_update(const matrix& P1, const matrix& P2,
                                                const system_model& mdl, const cost_weights& w,
                                                const gain_bundle& g) {
    const matrix& A = mdl.A;
    const matrix AB2K2 = A + mdl.B2 * g.K2;
    const matrix P1n = symmetrize(w.Q1 + transpose(AB2K2) * P1 * AB2K2 -
                                  transpose(g.Y1) * solve_linear(g.Gamma1, g.Y1) +
                                  transpose(g.K2) * w.R12 * g.K2);
    const matrix M1A = g.M1 * A;
    const matrix SA = g.S * A;
    const matrix P2n = symmetrize(w.Q2 + transpose(M1A) * P2 * M1A +
                                  transpose(SA) * w.R21 * SA -
                                  transpose(g.Y2) * solve_linear(g.Gamma2, g.Y2));
    return {P1n, P2n};
}

struct iterate_result {
    matrix P1, P2;
    gain_bundle gains;
};

inline iterate_result stackelberg_iterate(const matrix& P1, const matrix& P2,
                                          const system_model& mdl, const cost_weights& w) {
    iterate_result r;
    r.gains = stage_gains(P1, P2, mdl, w);
    std::tie(r.P1, r.P2) = riccati_update(P1, P2, mdl, w, r.gains);
    return r;
}

struct stackelberg_solution {
    matrix P1, P2;
    matrix K1, K2;
    matrix Gamma1, Gamma2, S, M1, Y1, Y2;
    long iterations = 0;
    double r1 = 0.0, r2 = 0.0;   // stationarity residuals of the final pair
    bool monotone = true;        // diagnostic: P iterates nondecreasing in PSD order
};

inline std::pair<double, double> riccati_residuals(const stackelberg_solution& sol,
                                                   const system_model& mdl,
                                                   const cost_weights& w) {
    const auto g = stage_gains(sol.P1, sol.P2, mdl, w);
    const auto [rhs1, rhs2] = riccati_update(sol.P1, sol.P2, mdl, w, g);
    return {spectral_norm(rhs1 - sol.P1), spectral_norm(rhs2 - sol.P2)};
}

inline stackelberg_solution solve_are(const system_model& mdl, const cost_weights& w,
                                      double tol = 1e-12, long max_iter = 100000) {
    if (tol <= 0.0) throw error("solve_are: tol must be positive");
    mdl.validate();
    w.validate(mdl);

    matrix P1(mdl.n(), mdl.n());
    matrix P2(mdl.n(), mdl.n());
    bool monotone = true;
    long it = 0;
    double delta = 0.0;
    bool converged = false;
    for (; it < max_iter; ++it) {
        auto step = stackelberg_iterate(P1, P2, mdl, w);
        delta = std::max(spectral_norm(step.P1 - P1), spectral_norm(step.P2 - P2));
        if (monotone) {
            const double scale = std::max(1.0, std::max(mat_max_abs(step.P1), mat_max_abs(step.P2)));
            const auto e1 = sym_eig(step.P1 - P1);
            const auto e2 = sym_eig(step.P2 - P2);
            if (e1.values.back() < -1e-10 * scale || e2.values.back() < -1e-10 * scale)
                monotone = false;
        }
        P1 = step.P1;
        P2 = step.P2;
        if (delta < tol) {
            converged = true;
            ++it;
            break;
        }
    }
    if (!converged)
        throw no_convergence("solve_are: no convergence within iteration budget", max_iter, delta);

    // gains recomputed at the fixed point so the stored bundle is exactly
    // consistent with the returned P pair
    const auto g = stage_gains(P1, P2, mdl, w);
    stackelberg_solution sol;
    sol.P1 = P1;
    sol.P2 = P2;
    sol.K1 = g.K1;
    sol.K2 = g.K2;
    sol.Gamma1 = g.Gamma1;
    sol.Gamma2 = g.Gamma2;
    sol.S = g.S;
    sol.M1 = g.M1;
    sol.Y1 = g.Y1;
    sol.Y2 = g.Y2;
    sol.iterations = it;
    sol.monotone = monotone;
    std::tie(sol.r1, sol.r2) = riccati_residuals(sol, mdl, w);
    return sol;
}

// ---------------------------------------------------------------------------
// Stagewise optimality: residual identities plus a brute-force grid probe of
// the stage-plus-continuation values around the computed gains.

struct stagewise_report {
    double follower_br_residual = 0.0;  // ‖K1 + Γ1⁻¹B1ᵀP1(A+B2K2)‖₂
    double leader_foc_residual = 0.0;   // ‖Γ2K2 + Y2‖₂
    double worst_follower_gap = 0.0;    // min over grid of J(perturbed) − J(unperturbed)
    double worst_leader_gap = 0.0;
    bool follower_grid_ok = false;
    bool leader_grid_ok = false;

    bool pass(double tol = 1e-10) const {
        return follower_br_residual < tol && leader_foc_residual < tol && follower_grid_ok &&
               leader_grid_ok;
    }
};

namespace detail {

inline double quad(const matrix& v, const matrix& m) { return (transpose(v) * m * v)(0, 0); }

// enumerate a uniform grid over [-radius, radius]^dims, invoking f with each
// offset column vector
template <class F>
inline void for_each_grid_point(std::size_t dims, double radius, int points, F&& f) {
    std::vector<int> idx(dims, 0);
    matrix delta(dims, 1);
    while (true) {
        for (std::size_t d = 0; d < dims; ++d)
            delta(d, 0) = (points == 1) ? 0.0
                                        : -radius + 2.0 * radius * idx[d] / (points - 1);
        f(delta);
        std::size_t d = 0;
        while (d < dims && ++idx[d] == points) idx[d++] = 0;
        if (d == dims) break;
    }
}

}  // namespace detail

inline stagewise_report stagewise_optimality_check(const stackelberg_solution& sol,
                                                   const system_model& mdl,
                                                   const cost_weights& w, const matrix& x,
                                                   double grid_radius = 0.5,
                                                   int grid_points = 41) {
    stagewise_report rep;
    const matrix& A = mdl.A;
    const matrix AB2K2 = A + mdl.B2 * sol.K2;

    rep.follower_br_residual =
        spectral_norm(sol.K1 + solve_linear(sol.Gamma1, transpose(mdl.B1) * sol.P1 * AB2K2));
    rep.leader_foc_residual = spectral_norm(sol.Gamma2 * sol.K2 + sol.Y2);

    // follower stage problem: leader's announced action held at K2 x
    const matrix u2_fixed = sol.K2 * x;
    const matrix base_f = A * x + mdl.B2 * u2_fixed;
    auto follower_value = [&](const matrix& u1) {
        const matrix xp = base_f + mdl.B1 * u1;
        return detail::quad(x, w.Q1) + detail::quad(u1, w.R11) + detail::quad(u2_fixed, w.R12) +
               detail::quad(xp, sol.P1);
    };
    const matrix u1_star = sol.K1 * x;
    const double f0 = follower_value(u1_star);
    double worst_f = 0.0;
    detail::for_each_grid_point(mdl.m1(), grid_radius, grid_points, [&](const matrix& d) {
        worst_f = std::min(worst_f, follower_value(u1_star + d) - f0);
    });
    rep.worst_follower_gap = worst_f;
    rep.follower_grid_ok = worst_f >= -1e-10;

    // leader stage problem under the follower's rational reaction
    auto leader_value = [&](const matrix& u2) {
        const matrix ax_b2u2 = A * x + mdl.B2 * u2;
        const matrix u1r = -(sol.S * ax_b2u2);
        const matrix xp = sol.M1 * ax_b2u2;
        return detail::quad(x, w.Q2) + detail::quad(u1r, w.R21) + detail::quad(u2, w.R22) +
               detail::quad(xp, sol.P2);
    };
    const matrix u2_star = sol.K2 * x;
    const double l0 = leader_value(u2_star);
    double worst_l = 0.0;
    detail::for_each_grid_point(mdl.m2(), grid_radius, grid_points, [&](const matrix& d) {
        worst_l = std::min(worst_l, leader_value(u2_star + d) - l0);
    });
    rep.worst_leader_gap = worst_l;
    rep.leader_grid_ok = worst_l >= -1e-10;
    return rep;
}

}  // namespace lqstack
