#pragma once

// Closed-loop simulation of the plant together with both observers, plus the
// augmented closed-loop matrix used by the cost-analysis module.

#include <vector>

#include "lqstack/observer.hpp"

namespace lqstack {

struct sim_state {
    long k = 0;
    matrix x, xhat1, xhat2;  // n x 1 columns
};

struct sim_record {
    long k = 0;
    matrix x, xhat1, xhat2;
    matrix xtilde1, xtilde2;  // x - xhat_i
    matrix u1, u2;
    matrix y1, y2;
    double stage_cost_1 = 0.0;
    double stage_cost_2 = 0.0;
};

struct trajectory {
    std::vector<sim_record> records;
    std::size_t size() const { return records.size(); }
    const sim_record& operator[](std::size_t i) const { return records[i]; }
};

inline sim_state step(const sim_state& st, const system_model& mdl, const matrix& K1,
                      const matrix& K2, const matrix& L1, const matrix& L2) {
    const matrix y1 = mdl.H1 * st.x;
    const matrix y2 = mdl.H2 * st.x;
    const matrix u1 = K1 * st.xhat1;
    const matrix u2 = K2 * st.xhat2;
    sim_state next;
    next.k = st.k + 1;
    next.x = mdl.A * st.x + mdl.B1 * u1 + mdl.B2 * u2;
    next.xhat1 = mdl.A * st.xhat1 + mdl.B1 * u1 + mdl.B2 * (K2 * st.xhat1) +
                 L1 * (y1 - mdl.H1 * st.xhat1);
    next.xhat2 = mdl.A * st.xhat2 + mdl.B1 * (K1 * st.xhat2) + mdl.B2 * u2 +
                 L2 * (y2 - mdl.H2 * st.xhat2);
    if (!is_finite(next.x) || !is_finite(next.xhat1) || !is_finite(next.xhat2))
        throw error("simulation produced a non-finite state at step " + std::to_string(next.k));
    return next;
}

namespace detail {

inline sim_record make_record(const sim_state& st, const system_model& mdl,
                              const cost_weights& w, const matrix& K1, const matrix& K2) {
    sim_record r;
    r.k = st.k;
    r.x = st.x;
    r.xhat1 = st.xhat1;
    r.xhat2 = st.xhat2;
    r.xtilde1 = st.x - st.xhat1;
    r.xtilde2 = st.x - st.xhat2;
    r.u1 = K1 * st.xhat1;
    r.u2 = K2 * st.xhat2;
    r.y1 = mdl.H1 * st.x;
    r.y2 = mdl.H2 * st.x;
    r.stage_cost_1 = quad(r.x, w.Q1) + quad(r.u1, w.R11) + quad(r.u2, w.R12);
    r.stage_cost_2 = quad(r.x, w.Q2) + quad(r.u1, w.R21) + quad(r.u2, w.R22);
    return r;
}

inline void require_column(const matrix& v, std::size_t n, const char* name) {
    if (v.rows() != n || v.cols() != 1)
        throw dimension_mismatch(std::string(name) + ": expected a " + std::to_string(n) +
                                 "-entry column");
}

}  // namespace detail

inline trajectory simulate(const system_model& mdl, const matrix& K1, const matrix& K2,
                           const matrix& L1, const matrix& L2, const cost_weights& w,
                           const matrix& x0, const matrix& xhat1_0, const matrix& xhat2_0,
                           long steps) {
    if (steps < 0) throw error("simulate: steps must be nonnegative");
    mdl.validate();
    w.validate(mdl);
    detail::require_column(x0, mdl.n(), "x0");
    detail::require_column(xhat1_0, mdl.n(), "xhat1_0");
    detail::require_column(xhat2_0, mdl.n(), "xhat2_0");

    trajectory traj;
    traj.records.reserve(static_cast<std::size_t>(steps) + 1);
    sim_state st{0, x0, xhat1_0, xhat2_0};
    traj.records.push_back(detail::make_record(st, mdl, w, K1, K2));
    for (long k = 0; k < steps; ++k) {
        st = step(st, mdl, K1, K2, L1, L2);
        traj.records.push_back(detail::make_record(st, mdl, w, K1, K2));
    }
    return traj;
}

struct augmented_system {
    matrix A_bar;     // 3n x 3n: [[A+B1K1+B2K2, script_B], [0, script_A]]
    matrix script_B;  // n x 2n: [-B1K1, -B2K2]
};

inline augmented_system augmented_matrix(const system_model& mdl, const matrix& K1,
                                         const matrix& K2, const matrix& L1, const matrix& L2) {
    const std::size_t n = mdl.n();
    const matrix b1k1 = mdl.B1 * K1;
    const matrix b2k2 = mdl.B2 * K2;
    augmented_system aug;
    aug.script_B = hcat(-1.0 * b1k1, -1.0 * b2k2);
    const matrix closed = mdl.A + b1k1 + b2k2;
    const matrix script_a = assemble_error_matrix(mdl, K1, K2, L1, L2);
    aug.A_bar = vcat(hcat(closed, aug.script_B), hcat(matrix::zero(2 * n, n), script_a));
    return aug;
}

// checks the gain identity -B1 K1 = B1 S (A + B2 K2) that makes the error
// dynamics autonomous before assembling
inline augmented_system augmented_matrix(const system_model& mdl, const stackelberg_solution& sol,
                                         const matrix& L1, const matrix& L2) {
    const matrix lhs = -1.0 * (mdl.B1 * sol.K1);
    const matrix rhs = mdl.B1 * (sol.S * (mdl.A + mdl.B2 * sol.K2));
    const double scale = std::max(1.0, mat_max_abs(lhs));
    if (mat_max_abs(lhs - rhs) > 1e-10 * scale)
        throw error("augmented_matrix: supplied solution violates the follower gain identity");
    return augmented_matrix(mdl, sol.K1, sol.K2, L1, L2);
}

inline double error_dynamics_defect(const trajectory& traj, const matrix& script_A) {
    if (traj.records.empty()) throw error("error_dynamics_defect: empty trajectory");
    double defect = 0.0;
    for (std::size_t i = 0; i + 1 < traj.records.size(); ++i) {
        const matrix xt = vcat(traj.records[i].xtilde1, traj.records[i].xtilde2);
        const matrix xt_next = vcat(traj.records[i + 1].xtilde1, traj.records[i + 1].xtilde2);
        defect = std::max(defect, frobenius_norm(xt_next - script_A * xt));
    }
    return defect;
}

}  // namespace lqstack
