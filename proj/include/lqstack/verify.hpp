#pragma once

// End-to-end invariant suite over a loaded configuration. Each check is
// independent; exceptions are caught and reported as failures so one
// broken stage cannot mask the rest.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "cost.hpp"
#include "io.hpp"
#include "observer.hpp"
#include "reports.hpp"
#include "simulate.hpp"
#include "stackelberg.hpp"

namespace lqstack {

struct check_result {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct verify_report {
    std::vector<check_result> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

namespace detail {

inline void run_check(verify_report& rep, const std::string& name,
                      const std::function<std::pair<bool, std::string>()>& body) {
    check_result r;
    r.name = name;
    try {
        auto [ok, detail_msg] = body();
        r.pass = ok;
        r.detail = detail_msg;
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
    }
    rep.checks.push_back(r);
}

inline bool same_trajectory(const trajectory& a, const trajectory& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& r = a[i];
        const auto& s = b[i];
        if (r.k != s.k) return false;
        for (auto [ma, mb] : {std::pair<const matrix*, const matrix*>{&r.x, &s.x},
                              {&r.xhat1, &s.xhat1},
                              {&r.xhat2, &s.xhat2},
                              {&r.u1, &s.u1},
                              {&r.u2, &s.u2}})
            if (mat_max_abs(*ma - *mb) != 0.0) return false;
        if (r.stage_cost_1 != s.stage_cost_1 || r.stage_cost_2 != s.stage_cost_2) return false;
    }
    return true;
}

inline matrix matrix_from_json(const nlohmann::json& v) {
    matrix m(v.size(), v[0].size());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = v[i][j].get<double>();
    return m;
}

}  // namespace detail

// inject_fault perturbs the solved K1 before the checks run; the suite
// must then report at least one failure
inline verify_report run_verification(const run_config& cfg, bool inject_fault = false) {
    verify_report rep;

    stackelberg_solution sol = solve_are(cfg.model, cfg.weights, cfg.solver.tol,
                                         cfg.solver.max_iter);
    if (inject_fault) sol.K1(0, 0) += 0.05;

    observer_design design;
    bool have_design = false;
    try {
        if (cfg.observer.L1 && cfg.observer.L2)
            design = design_from_gains(cfg.model, sol.K1, sol.K2, *cfg.observer.L1,
                                       *cfg.observer.L2);
        else {
            observer_options opts;
            opts.method = cfg.observer.method;
            opts.margin = cfg.observer.margin;
            design = design_observer(cfg.model, sol.K1, sol.K2, opts);
        }
        have_design = true;
    } catch (const std::exception&) {
        have_design = false;
    }

    detail::run_check(rep, "riccati_residuals", [&]() -> std::pair<bool, std::string> {
        auto [r1, r2] = riccati_residuals(sol, cfg.model, cfg.weights);
        const bool ok = r1 < 1e-10 && r2 < 1e-10;
        return {ok, "r1=" + format_real(r1) + " r2=" + format_real(r2)};
    });

    detail::run_check(rep, "gain_identity", [&]() -> std::pair<bool, std::string> {
        const matrix lhs = sol.K1;
        const matrix rhs = -1.0 * (sol.S * (cfg.model.A + cfg.model.B2 * sol.K2));
        const double gap = mat_max_abs(lhs - rhs);
        const double scale = std::max(1.0, mat_max_abs(lhs));
        return {gap <= 1e-10 * scale, "max deviation " + format_real(gap)};
    });

    detail::run_check(rep, "stagewise_optimality", [&]() -> std::pair<bool, std::string> {
        matrix probe = cfg.x0;
        if (mat_max_abs(probe) == 0.0) probe = matrix(cfg.model.n(), 1, 1.0);
        auto sw = stagewise_optimality_check(sol, cfg.model, cfg.weights, probe);
        return {sw.pass(1e-10), "br=" + format_real(sw.follower_br_residual) +
                                    " foc=" + format_real(sw.leader_foc_residual)};
    });

    detail::run_check(rep, "observer_certified", [&]() -> std::pair<bool, std::string> {
        if (!have_design) return {false, "design stage failed"};
        return {design.verdict.stable(),
                std::string(to_string(design.method)) + ", verdict " +
                    verdict_label(design.verdict)};
    });

    detail::run_check(rep, "error_matrix_affinity", [&]() -> std::pair<bool, std::string> {
        if (!have_design) return {false, "design stage failed"};
        const std::size_t n = cfg.model.n();
        const matrix with_l = design.script_A;
        const matrix zero_l = assemble_error_matrix(
            cfg.model, sol.K1, sol.K2, matrix::zero(n, cfg.model.s1()),
            matrix::zero(n, cfg.model.s2()));
        const double off1 = mat_max_abs(block_of(with_l, 0, n, n, n) -
                                        block_of(zero_l, 0, n, n, n));
        const double off2 = mat_max_abs(block_of(with_l, n, 0, n, n) -
                                        block_of(zero_l, n, 0, n, n));
        return {off1 == 0.0 && off2 == 0.0, "coupling blocks shift by " +
                                                format_real(std::max(off1, off2))};
    });

    detail::run_check(rep, "error_dynamics_consistency", [&]() -> std::pair<bool, std::string> {
        if (!have_design) return {false, "design stage failed"};
        const long steps = std::min<long>(cfg.sim.steps, 200);
        auto traj = simulate(cfg.model, sol.K1, sol.K2, design.L1, design.L2, cfg.weights,
                             cfg.x0, cfg.xhat1_0, cfg.xhat2_0, steps);
        const double defect = error_dynamics_defect(traj, design.script_A);
        const double scale = 1.0 + frobenius_norm(design.script_A);
        return {defect <= 1e-9 * scale, "defect " + format_real(defect)};
    });

    detail::run_check(rep, "augmented_propagation", [&]() -> std::pair<bool, std::string> {
        if (!have_design) return {false, "design stage failed"};
        const auto aug = augmented_matrix(cfg.model, sol, design.L1, design.L2);
        const long steps = std::min<long>(cfg.sim.steps, 50);
        auto traj = simulate(cfg.model, sol.K1, sol.K2, design.L1, design.L2, cfg.weights,
                             cfg.x0, cfg.xhat1_0, cfg.xhat2_0, steps);
        double worst = 0.0;
        matrix z = detail::stack_z0(cfg.model, cfg.x0, cfg.xhat1_0, cfg.xhat2_0);
        for (std::size_t k = 1; k < traj.size(); ++k) {
            z = aug.A_bar * z;
            const auto& r = traj[k];
            const matrix zk = vcat(vcat(r.x, r.xtilde1), r.xtilde2);
            worst = std::max(worst, mat_max_abs(zk - z));
        }
        return {worst <= 1e-8 * (1.0 + mat_max_abs(z)), "max deviation " + format_real(worst)};
    });

    detail::run_check(rep, "cost_telescoping", [&]() -> std::pair<bool, std::string> {
        if (!have_design) return {false, "design stage failed"};
        auto costs = exact_costs(cfg.model, sol, design.L1, design.L2, cfg.weights, cfg.x0,
                                 cfg.xhat1_0, cfg.xhat2_0);
        const long M = 10;
        auto traj = simulate(cfg.model, sol.K1, sol.K2, design.L1, design.L2, cfg.weights,
                             cfg.x0, cfg.xhat1_0, cfg.xhat2_0, M + 1);
        double acc1 = 0.0, acc2 = 0.0;
        for (long k = 0; k <= M; ++k) {
            acc1 += traj[static_cast<std::size_t>(k)].stage_cost_1;
            acc2 += traj[static_cast<std::size_t>(k)].stage_cost_2;
        }
        const auto& tail = traj[static_cast<std::size_t>(M + 1)];
        const matrix z = vcat(vcat(tail.x, tail.xtilde1), tail.xtilde2);
        const double lhs1 = acc1 + detail::quad(z, costs.X1);
        const double lhs2 = acc2 + detail::quad(z, costs.X2);
        const double gap1 = std::abs(lhs1 - costs.J1_obs) / (1.0 + std::abs(costs.J1_obs));
        const double gap2 = std::abs(lhs2 - costs.J2_obs) / (1.0 + std::abs(costs.J2_obs));
        return {gap1 <= 1e-9 && gap2 <= 1e-9,
                "gaps " + format_real(gap1) + ", " + format_real(gap2)};
    });

    detail::run_check(rep, "decay_envelope", [&]() -> std::pair<bool, std::string> {
        if (!have_design) return {false, "design stage failed"};
        const matrix z0 = detail::stack_z0(cfg.model, cfg.x0, cfg.xhat1_0, cfg.xhat2_0);
        auto prof = decay_profile(cfg.model, sol, design.L1, design.L2, cfg.weights, z0,
                                  cfg.analysis.N_list);
        auto costs = exact_costs(cfg.model, sol, design.L1, design.L2, cfg.weights, cfg.x0,
                                 cfg.xhat1_0, cfg.xhat2_0);
        const double gap0 = std::abs(prof.delta_J1_at_N.front() - costs.delta_J1);
        const bool ok = prof.lambda_hat < 1.0 &&
                        gap0 <= 1e-8 * (1.0 + std::abs(costs.delta_J1));
        return {ok, "lambda_hat=" + format_real(prof.lambda_hat) +
                        " c_bar=" + format_real(prof.c_bar)};
    });

    detail::run_check(rep, "determinism", [&]() -> std::pair<bool, std::string> {
        const std::string once = solution_report_json(sol);
        const std::string twice = solution_report_json(sol);
        std::string design_once, design_twice;
        if (have_design) {
            design_once = design_report_json(design);
            design_twice = design_report_json(design);
        }
        const bool ok = once == twice && design_once == design_twice;
        return {ok, ok ? "byte-identical reports" : "serialization differs between calls"};
    });

    detail::run_check(rep, "round_trip", [&]() -> std::pair<bool, std::string> {
        if (!have_design) return {false, "design stage failed"};
        const auto sol_doc = nlohmann::json::parse(solution_report_json(sol));
        const auto des_doc = nlohmann::json::parse(design_report_json(design));
        const matrix k1 = detail::matrix_from_json(sol_doc.at("K1"));
        const matrix k2 = detail::matrix_from_json(sol_doc.at("K2"));
        const matrix l1 = detail::matrix_from_json(des_doc.at("L1"));
        const matrix l2 = detail::matrix_from_json(des_doc.at("L2"));
        const long steps = std::min<long>(cfg.sim.steps, 100);
        auto direct = simulate(cfg.model, sol.K1, sol.K2, design.L1, design.L2, cfg.weights,
                               cfg.x0, cfg.xhat1_0, cfg.xhat2_0, steps);
        auto reloaded = simulate(cfg.model, k1, k2, l1, l2, cfg.weights, cfg.x0, cfg.xhat1_0,
                                 cfg.xhat2_0, steps);
        const bool ok = detail::same_trajectory(direct, reloaded);
        return {ok, ok ? "reloaded gains reproduce the trajectory"
                       : "trajectories differ after reload"};
    });

    return rep;
}

}  // namespace lqstack
