#include <catch2/catch_amalgamated.hpp>

#include "lqstack/stackelberg.hpp"
#include "oracles.hpp"
#include "reference_case.hpp"

using namespace lqstack;

namespace {

double max_abs_diff(const matrix& a, const matrix& b) { return mat_max_abs(a - b); }

bool close_rel(const matrix& a, const matrix& b, double tol) {
    return max_abs_diff(a, b) <= tol * std::max(1.0, mat_max_abs(b));
}

struct random_instance {
    system_model mdl;
    cost_weights w;
};

// state matrix scaled to spectral norm 0.9 so the fixed-point iteration is
// guaranteed to converge regardless of the sampled cost weights
random_instance sample_instance(oracle::xorshift64& rng, std::size_t n, std::size_t m1, std::size_t m2) {
    random_instance ri;
    matrix a = oracle::random_matrix(rng, n, n, 1.0);
    double sn = spectral_norm(a);
    ri.mdl.A = (0.9 / (sn > 1e-12 ? sn : 1.0)) * a;
    ri.mdl.B1 = oracle::random_matrix(rng, n, m1, 1.0);
    ri.mdl.B2 = oracle::random_matrix(rng, n, m2, 1.0);
    ri.mdl.H1 = oracle::random_matrix(rng, 1, n, 1.0);
    ri.mdl.H2 = oracle::random_matrix(rng, 1, n, 1.0);
    ri.w.Q1 = oracle::random_psd(rng, n, 0.8) + 0.1 * matrix::identity(n);
    ri.w.Q2 = oracle::random_psd(rng, n, 0.8) + 0.1 * matrix::identity(n);
    ri.w.R11 = oracle::random_psd(rng, m1, 0.5) + matrix::identity(m1);
    ri.w.R22 = oracle::random_psd(rng, m2, 0.5) + matrix::identity(m2);
    ri.w.R12 = oracle::random_psd(rng, m2, 0.3);
    ri.w.R21 = oracle::random_psd(rng, m1, 0.3);
    return ri;
}

}  // namespace

TEST_CASE("single iteration from zero matches closed forms") {
    auto mdl = refcase::model();
    auto w = refcase::weights();
    std::size_t n = mdl.n();
    matrix z1 = matrix::zero(n, n), z2 = matrix::zero(n, n);

    auto g = stage_gains(z1, z2, mdl, w);
    CHECK(max_abs_diff(g.Gamma1, w.R11) == 0.0);
    CHECK(mat_max_abs(g.S) == 0.0);
    CHECK(max_abs_diff(g.M1, matrix::identity(n)) == 0.0);
    CHECK(max_abs_diff(g.Gamma2, w.R22) == 0.0);
    CHECK(mat_max_abs(g.K1) == 0.0);
    CHECK(mat_max_abs(g.K2) == 0.0);

    auto next = riccati_update(z1, z2, mdl, w, g);
    CHECK(max_abs_diff(next.first, w.Q1) == 0.0);
    CHECK(max_abs_diff(next.second, w.Q2) == 0.0);
}

TEST_CASE("iteration with A = 0 keeps gains at zero and P at Q") {
    auto mdl = refcase::model();
    auto w = refcase::weights();
    mdl.A = matrix::zero(2, 2);

    oracle::xorshift64 rng(0x51ec7a11u);
    matrix p1 = oracle::random_psd(rng, 2, 1.0);
    matrix p2 = oracle::random_psd(rng, 2, 1.0);
    auto g = stage_gains(p1, p2, mdl, w);
    CHECK(mat_max_abs(g.K1) <= 1e-14);
    CHECK(mat_max_abs(g.K2) <= 1e-14);
    auto next = riccati_update(p1, p2, mdl, w, g);
    CHECK(max_abs_diff(next.first, w.Q1) <= 1e-14);
    CHECK(max_abs_diff(next.second, w.Q2) <= 1e-14);
}

TEST_CASE("scalar instance reproduces hand-computed first two iterations") {
    // a = 1, b1 = b2 = 1, q1 = q2 = r11 = r22 = 1, r12 = r21 = 0
    system_model mdl;
    mdl.A = matrix{{1.0}};
    mdl.B1 = matrix{{1.0}};
    mdl.B2 = matrix{{1.0}};
    mdl.H1 = matrix{{1.0}};
    mdl.H2 = matrix{{1.0}};
    cost_weights w;
    w.Q1 = matrix{{1.0}};
    w.Q2 = matrix{{1.0}};
    w.R11 = matrix{{1.0}};
    w.R12 = matrix{{0.0}};
    w.R21 = matrix{{0.0}};
    w.R22 = matrix{{1.0}};

    matrix p1 = matrix::zero(1, 1), p2 = matrix::zero(1, 1);
    auto it1 = stackelberg_iterate(p1, p2, mdl, w);
    CHECK(it1.P1(0, 0) == Catch::Approx(1.0).margin(1e-15));
    CHECK(it1.P2(0, 0) == Catch::Approx(1.0).margin(1e-15));

    auto it2 = stackelberg_iterate(it1.P1, it1.P2, mdl, w);
    CHECK(it2.gains.Gamma1(0, 0) == Catch::Approx(2.0).margin(1e-15));
    CHECK(it2.gains.S(0, 0) == Catch::Approx(0.5).margin(1e-15));
    CHECK(it2.gains.M1(0, 0) == Catch::Approx(0.5).margin(1e-15));
    CHECK(it2.gains.Gamma2(0, 0) == Catch::Approx(1.25).margin(1e-15));
    CHECK(it2.gains.Y2(0, 0) == Catch::Approx(0.25).margin(1e-15));
    CHECK(it2.gains.K2(0, 0) == Catch::Approx(-0.2).margin(1e-15));
    CHECK(it2.gains.Y1(0, 0) == Catch::Approx(0.8).margin(1e-15));
    CHECK(it2.gains.K1(0, 0) == Catch::Approx(-0.4).margin(1e-15));
    CHECK(it2.P1(0, 0) == Catch::Approx(1.32).margin(1e-14));
    CHECK(it2.P2(0, 0) == Catch::Approx(1.2).margin(1e-14));
}

TEST_CASE("reference case solves to the frozen fixed point") {
    auto sol = solve_are(refcase::model(), refcase::weights());

    CHECK(max_abs_diff(sol.K1, refcase::frozen_K1()) <= 1e-8);
    CHECK(max_abs_diff(sol.K2, refcase::frozen_K2()) <= 1e-8);
    CHECK(max_abs_diff(sol.P1, refcase::frozen_P1()) <= 1e-10);
    CHECK(max_abs_diff(sol.P2, refcase::frozen_P2()) <= 1e-10);

    // agreement with the 4-decimal reference values
    CHECK(max_abs_diff(sol.K1, refcase::ref_K1()) <= 1e-3);
    CHECK(max_abs_diff(sol.K2, refcase::ref_K2()) <= 1e-3);

    CHECK(is_positive_definite(sol.P1));
    CHECK(is_positive_definite(sol.P2));
    CHECK(sol.iterations < 2000);
    CHECK(sol.r1 <= 1e-10);
    CHECK(sol.r2 <= 1e-10);
    // the coupled iteration overshoots slightly on this instance before
    // settling, so the PSD-order diagnostic reports false
    CHECK_FALSE(sol.monotone);

    // closed loop is stable
    matrix acl = sol.P1;  // shape placeholder
    acl = refcase::model().A + refcase::model().B1 * sol.K1 + refcase::model().B2 * sol.K2;
    CHECK(power_stability(acl).stable());
}

TEST_CASE("inert leader reduces the follower problem to a single-player regulator") {
    system_model mdl;
    mdl.A = matrix{{0.9, 0.2}, {0.0, 0.8}};
    mdl.B1 = matrix{{1.0}, {0.5}};
    mdl.B2 = matrix::zero(2, 1);
    mdl.H1 = matrix{{1.0, 0.0}};
    mdl.H2 = matrix{{0.0, 1.0}};
    cost_weights w;
    w.Q1 = matrix::identity(2);
    w.Q2 = matrix::identity(2);
    w.R11 = matrix{{1.0}};
    w.R12 = matrix{{0.0}};
    w.R21 = matrix{{0.0}};
    w.R22 = matrix{{1.0}};

    auto sol = solve_are(mdl, w);
    CHECK(mat_max_abs(sol.K2) <= 1e-12);

    matrix p_lqr = oracle::lqr_value_iteration(mdl.A, mdl.B1, w.Q1, w.R11);
    CHECK(max_abs_diff(sol.P1, p_lqr) <= 1e-9);
}

TEST_CASE("A = 0 solves immediately with P = Q") {
    auto mdl = refcase::model();
    auto w = refcase::weights();
    mdl.A = matrix::zero(2, 2);
    auto sol = solve_are(mdl, w);
    CHECK(max_abs_diff(sol.P1, w.Q1) <= 1e-14);
    CHECK(max_abs_diff(sol.P2, w.Q2) <= 1e-14);
    CHECK(mat_max_abs(sol.K1) <= 1e-14);
    CHECK(mat_max_abs(sol.K2) <= 1e-14);
    CHECK(sol.r1 == 0.0);
    CHECK(sol.r2 == 0.0);
    CHECK(sol.monotone);
}

TEST_CASE("residuals detect a perturbed fixed point") {
    auto mdl = refcase::model();
    auto w = refcase::weights();
    auto sol = solve_are(mdl, w);
    REQUIRE(sol.r1 <= 1e-10);

    auto perturbed = sol;
    perturbed.P1 = sol.P1 + 0.1 * matrix::identity(2);
    auto rs = riccati_residuals(perturbed, mdl, w);
    CHECK(rs.first >= 0.01);
}

TEST_CASE("stagewise optimality holds at the solution and fails off it") {
    auto mdl = refcase::model();
    auto w = refcase::weights();
    auto sol = solve_are(mdl, w);

    matrix x = colvec({1.0, -1.0});
    auto rep = stagewise_optimality_check(sol, mdl, w, x);
    CHECK(rep.follower_br_residual <= 1e-10);
    CHECK(rep.leader_foc_residual <= 1e-10);
    CHECK(rep.follower_grid_ok);
    CHECK(rep.leader_grid_ok);
    CHECK(rep.worst_follower_gap >= -1e-10);
    CHECK(rep.worst_leader_gap >= -1e-10);
    CHECK(rep.pass());

    // at x = 0 every deviation is pure control cost, still nonnegative
    matrix origin = colvec({0.0, 0.0});
    auto rep0 = stagewise_optimality_check(sol, mdl, w, origin);
    CHECK(rep0.pass());

    // a wrong K1 breaks the follower first-order condition
    auto bad = sol;
    bad.K1 = sol.K1 + matrix{{0.05, 0.0}};
    auto repb = stagewise_optimality_check(bad, mdl, w, x);
    CHECK(repb.follower_br_residual > 1e-3);
    CHECK_FALSE(repb.pass());
}

TEST_CASE("follower cost scaling leaves K1, K2, P2 unchanged and scales P1") {
    oracle::xorshift64 rng(0xabcd1234u);
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t n = 2 + static_cast<std::size_t>(trial % 3);
        auto ri = sample_instance(rng, n, 1 + trial % 2, 1);
        auto base = solve_are(ri.mdl, ri.w);

        for (double alpha : {0.1, 3.0}) {
            auto ws = ri.w;
            ws.Q1 = alpha * ws.Q1;
            ws.R11 = alpha * ws.R11;
            ws.R12 = alpha * ws.R12;
            auto scaled = solve_are(ri.mdl, ws);
            CHECK(close_rel(scaled.K1, base.K1, 1e-9));
            CHECK(close_rel(scaled.K2, base.K2, 1e-9));
            CHECK(close_rel(scaled.P2, base.P2, 1e-9));
            CHECK(close_rel(scaled.P1, alpha * base.P1, 1e-9));
        }
    }
}

TEST_CASE("leader cost scaling leaves K1, K2, P1 unchanged and scales P2") {
    oracle::xorshift64 rng(0x7f3e9d01u);
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t n = 2 + static_cast<std::size_t>(trial % 3);
        auto ri = sample_instance(rng, n, 1, 1 + trial % 2);
        auto base = solve_are(ri.mdl, ri.w);

        for (double alpha : {0.1, 3.0}) {
            auto ws = ri.w;
            ws.Q2 = alpha * ws.Q2;
            ws.R21 = alpha * ws.R21;
            ws.R22 = alpha * ws.R22;
            auto scaled = solve_are(ri.mdl, ws);
            CHECK(close_rel(scaled.K1, base.K1, 1e-9));
            CHECK(close_rel(scaled.K2, base.K2, 1e-9));
            CHECK(close_rel(scaled.P1, base.P1, 1e-9));
            CHECK(close_rel(scaled.P2, alpha * base.P2, 1e-9));
        }
    }
}

TEST_CASE("follower gain satisfies K1 = -S (A + B2 K2)") {
    auto mdl = refcase::model();
    auto w = refcase::weights();
    auto sol = solve_are(mdl, w);
    matrix lhs = sol.K1;
    matrix rhs = -1.0 * (sol.S * (mdl.A + mdl.B2 * sol.K2));
    CHECK(max_abs_diff(lhs, rhs) <= 1e-12);

    oracle::xorshift64 rng(0x00c0ffeeu);
    for (int trial = 0; trial < 5; ++trial) {
        auto ri = sample_instance(rng, 3, 2, 1);
        auto s = solve_are(ri.mdl, ri.w);
        matrix r = -1.0 * (s.S * (ri.mdl.A + ri.mdl.B2 * s.K2));
        CHECK(max_abs_diff(s.K1, r) <= 1e-10 * std::max(1.0, mat_max_abs(s.K1)));
    }
}

TEST_CASE("iterates stay symmetric and positive semidefinite") {
    auto mdl = refcase::model();
    auto w = refcase::weights();
    matrix p1 = matrix::zero(2, 2), p2 = matrix::zero(2, 2);
    for (int k = 0; k < 10; ++k) {
        auto it = stackelberg_iterate(p1, p2, mdl, w);
        p1 = it.P1;
        p2 = it.P2;
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < i; ++j) {
                CHECK(p1(i, j) == p1(j, i));
                CHECK(p2(i, j) == p2(j, i));
            }
        CHECK(is_positive_definite(p1 + 1e-12 * matrix::identity(2)));
        CHECK(is_positive_definite(p2 + 1e-12 * matrix::identity(2)));
    }
}

TEST_CASE("indefinite P makes the follower curvature check throw") {
    auto mdl = refcase::model();
    auto w = refcase::weights();
    // Gamma1 = R11 + B1' P1 B1 = 1 - 26 < 0
    matrix p1 = -1.0 * matrix::identity(2);
    matrix p2 = matrix::zero(2, 2);
    CHECK_THROWS_AS(stage_gains(p1, p2, mdl, w), gamma_not_invertible);
}

TEST_CASE("nonconvergence reports iteration count and final delta") {
    auto mdl = refcase::model();
    auto w = refcase::weights();
    try {
        solve_are(mdl, w, 1e-12, 3);
        FAIL("expected no_convergence");
    } catch (const no_convergence& e) {
        CHECK(e.iterations == 3);
        CHECK(e.last_delta > 0.0);
    }
}

TEST_CASE("model and weight validation reject malformed inputs") {
    auto mdl = refcase::model();
    auto w = refcase::weights();

    auto bad = mdl;
    bad.B1 = matrix::zero(3, 1);
    CHECK_THROWS_AS(solve_are(bad, w), validation_error);

    auto wq = w;
    wq.Q1 = matrix{{-1.0, 0.0}, {0.0, 1.0}};
    CHECK_THROWS_AS(solve_are(mdl, wq), validation_error);

    auto wr = w;
    wr.R11 = matrix{{0.0}};
    CHECK_THROWS_AS(solve_are(mdl, wr), validation_error);

    auto wa = w;
    wa.Q2 = matrix{{1.0, 0.2}, {0.0, 1.0}};
    CHECK_THROWS_AS(solve_are(mdl, wa), validation_error);
}
