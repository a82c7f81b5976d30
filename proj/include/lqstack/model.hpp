#pragma once

#include <string>

#include "lqstack/matrix.hpp"

namespace lqstack {

struct validation_error : error {
    std::string field;
    validation_error(std::string f, const std::string& reason)
        : error(f + ": " + reason), field(std::move(f)) {}
};

// plant: x⁺ = Ax + B1 u1 + B2 u2, y1 = H1 x, y2 = H2 x
struct system_model {
    matrix A;   // n x n
    matrix B1;  // n x m1, follower input
    matrix B2;  // n x m2, leader input
    matrix H1;  // s1 x n, follower measurement
    matrix H2;  // s2 x n, leader measurement

    std::size_t n() const { return A.rows(); }
    std::size_t m1() const { return B1.cols(); }
    std::size_t m2() const { return B2.cols(); }
    std::size_t s1() const { return H1.rows(); }
    std::size_t s2() const { return H2.rows(); }

    void validate() const {
        if (A.rows() == 0 || A.rows() != A.cols())
            throw validation_error("A", "must be square and nonempty");
        if (B1.rows() != n() || B1.cols() == 0)
            throw validation_error("B1", "must have n rows and at least one column");
        if (B2.rows() != n() || B2.cols() == 0)
            throw validation_error("B2", "must have n rows and at least one column");
        if (H1.cols() != n() || H1.rows() == 0)
            throw validation_error("H1", "must have n columns and at least one row");
        if (H2.cols() != n() || H2.rows() == 0)
            throw validation_error("H2", "must have n columns and at least one row");
        for (auto [m, name] : {std::pair<const matrix*, const char*>{&A, "A"},
                               {&B1, "B1"},
                               {&B2, "B2"},
                               {&H1, "H1"},
                               {&H2, "H2"}})
            if (!is_finite(*m)) throw validation_error(name, "contains NaN or Inf");
    }
};

struct cost_weights {
    matrix Q1, Q2;  // n x n
    matrix R11;     // m1 x m1, follower on own input
    matrix R12;     // m2 x m2, follower on leader input
    matrix R21;     // m1 x m1, leader on follower input
    matrix R22;     // m2 x m2, leader on own input

    void validate(const system_model& model) const {
        auto check_dims = [](const matrix& m, std::size_t d, const char* name) {
            if (m.rows() != d || m.cols() != d)
                throw validation_error(name, "wrong dimensions");
            if (!is_finite(m)) throw validation_error(name, "contains NaN or Inf");
            if (!is_symmetric(m)) throw validation_error(name, "not symmetric");
        };
        check_dims(Q1, model.n(), "Q1");
        check_dims(Q2, model.n(), "Q2");
        check_dims(R11, model.m1(), "R11");
        check_dims(R12, model.m2(), "R12");
        check_dims(R21, model.m1(), "R21");
        check_dims(R22, model.m2(), "R22");

        auto check_psd = [](const matrix& m, const char* name) {
            auto e = sym_eig(m);
            const double tol = 1e-12 * std::max(1.0, std::fabs(e.values.front()));
            if (e.values.back() < -tol)
                throw validation_error(name, "not positive semidefinite");
        };
        check_psd(Q1, "Q1");
        check_psd(Q2, "Q2");
        check_psd(R12, "R12");
        check_psd(R21, "R21");

        auto check_pd = [](const matrix& m, const char* name) {
            if (!is_positive_definite(m))
                throw validation_error(name, "not positive definite");
        };
        check_pd(R11, "R11");
        check_pd(R22, "R22");
    }
};

}  // namespace lqstack
