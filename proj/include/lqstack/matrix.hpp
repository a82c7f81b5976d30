#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lqstack {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct dimension_mismatch : error {
    using error::error;
};
struct not_square : error {
    using error::error;
};
struct not_symmetric : error {
    using error::error;
};
struct not_positive_definite : error {
    using error::error;
};
struct singular_matrix : error {
    using error::error;
};

template <class T>
class basic_matrix {
public:
    basic_matrix() = default;

    basic_matrix(std::size_t r, std::size_t c, T fill = T{})
        : rows_(r), cols_(c), data_(r * c, fill) {}

    basic_matrix(std::initializer_list<std::initializer_list<T>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_)
                throw dimension_mismatch("ragged matrix initializer");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static basic_matrix identity(std::size_t n) {
        basic_matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
        return m;
    }

    static basic_matrix zero(std::size_t r, std::size_t c) { return basic_matrix(r, c); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    T& operator()(std::size_t i, std::size_t j) {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }
    const T& operator()(std::size_t i, std::size_t j) const {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }

    const std::vector<T>& data() const { return data_; }
    std::vector<T>& data() { return data_; }

    bool same_shape(const basic_matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<T> data_;
};

using matrix = basic_matrix<double>;

inline matrix colvec(std::initializer_list<double> v) {
    matrix m(v.size(), 1);
    std::size_t i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

inline matrix colvec(const std::vector<double>& v) {
    matrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
}

inline matrix operator+(const matrix& a, const matrix& b) {
    if (!a.same_shape(b)) throw dimension_mismatch("operator+: shape mismatch");
    matrix r = a;
    for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] += b.data()[i];
    return r;
}

inline matrix operator-(const matrix& a, const matrix& b) {
    if (!a.same_shape(b)) throw dimension_mismatch("operator-: shape mismatch");
    matrix r = a;
    for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] -= b.data()[i];
    return r;
}

inline matrix operator-(const matrix& a) {
    matrix r = a;
    for (auto& x : r.data()) x = -x;
    return r;
}

inline matrix operator*(const matrix& a, const matrix& b) {
    if (a.cols() != b.rows()) throw dimension_mismatch("operator*: inner dimensions differ");
    matrix r(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) r(i, j) += aik * b(k, j);
        }
    return r;
}

inline matrix operator*(double s, const matrix& a) {
    matrix r = a;
    for (auto& x : r.data()) x *= s;
    return r;
}

inline matrix operator*(const matrix& a, double s) { return s * a; }

inline matrix transpose(const matrix& a) {
    matrix r(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) r(j, i) = a(i, j);
    return r;
}

inline double mat_max_abs(const matrix& a) {
    double m = 0.0;
    for (double x : a.data()) m = std::max(m, std::fabs(x));
    return m;
}

inline double frobenius_norm(const matrix& a) {
    double s = 0.0;
    for (double x : a.data()) s += x * x;
    return std::sqrt(s);
}

inline bool is_finite(const matrix& a) {
    for (double x : a.data())
        if (!std::isfinite(x)) return false;
    return true;
}

inline matrix symmetrize(const matrix& a) {
    if (a.rows() != a.cols()) throw not_square("symmetrize: matrix not square");
    matrix r = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) r(i, j) = 0.5 * (a(i, j) + a(j, i));
    return r;
}

// relative symmetry test used by the factorizations below; asymmetric inputs
// are rejected rather than silently symmetrized
inline bool is_symmetric(const matrix& a, double rel_tol = 1e-12) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, mat_max_abs(a));
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::fabs(a(i, j) - a(j, i)) > rel_tol * scale) return false;
    return true;
}

inline void require_square(const matrix& a, const char* who) {
    if (a.rows() != a.cols()) throw not_square(std::string(who) + ": matrix not square");
}

inline void require_symmetric(const matrix& a, const char* who) {
    require_square(a, who);
    if (!is_symmetric(a)) throw not_symmetric(std::string(who) + ": matrix not symmetric");
}

inline matrix block_of(const matrix& m, std::size_t r0, std::size_t c0, std::size_t r,
                       std::size_t c) {
    if (r0 + r > m.rows() || c0 + c > m.cols())
        throw dimension_mismatch("block_of: block exceeds matrix");
    matrix b(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) b(i, j) = m(r0 + i, c0 + j);
    return b;
}

inline void set_block(matrix& m, std::size_t r0, std::size_t c0, const matrix& b) {
    if (r0 + b.rows() > m.rows() || c0 + b.cols() > m.cols())
        throw dimension_mismatch("set_block: block exceeds matrix");
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) m(r0 + i, c0 + j) = b(i, j);
}

inline matrix hcat(const matrix& a, const matrix& b) {
    if (a.rows() != b.rows()) throw dimension_mismatch("hcat: row counts differ");
    matrix r(a.rows(), a.cols() + b.cols());
    set_block(r, 0, 0, a);
    set_block(r, 0, a.cols(), b);
    return r;
}

inline matrix vcat(const matrix& a, const matrix& b) {
    if (a.cols() != b.cols()) throw dimension_mismatch("vcat: column counts differ");
    matrix r(a.rows() + b.rows(), a.cols());
    set_block(r, 0, 0, a);
    set_block(r, a.rows(), 0, b);
    return r;
}

// ---------------------------------------------------------------------------
// Cholesky; doubles as the positive-definiteness test.

inline matrix cholesky(const matrix& m) {
    require_symmetric(m, "cholesky");
    const std::size_t n = m.rows();
    matrix L(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = m(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
        if (d <= 0.0) throw not_positive_definite("cholesky: nonpositive pivot");
        L(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / L(j, j);
        }
    }
    return L;
}

inline bool is_positive_definite(const matrix& m) {
    try {
        cholesky(m);
        return true;
    } catch (const not_positive_definite&) {
        return false;
    }
}

// ---------------------------------------------------------------------------
// LU with partial pivoting: linear solves and determinants.

namespace detail {

struct lu_factors {
    matrix lu;
    std::vector<std::size_t> perm;
    int sign = 1;
    bool singular = false;
    std::size_t first_bad_pivot = 0;
};

inline lu_factors lu_decompose(const matrix& a, double pivot_tol) {
    lu_factors f;
    f.lu = a;
    const std::size_t n = a.rows();
    f.perm.resize(n);
    std::iota(f.perm.begin(), f.perm.end(), std::size_t{0});
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::fabs(f.lu(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::fabs(f.lu(i, k));
            if (v > best) {
                best = v;
                p = i;
            }
        }
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(p, j));
            std::swap(f.perm[k], f.perm[p]);
            f.sign = -f.sign;
        }
        if (best <= pivot_tol) {
            if (!f.singular) {
                f.singular = true;
                f.first_bad_pivot = k;
            }
            continue;
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            f.lu(i, k) /= f.lu(k, k);
            const double lik = f.lu(i, k);
            if (lik == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) f.lu(i, j) -= lik * f.lu(k, j);
        }
    }
    return f;
}

}  // namespace detail

inline matrix solve_linear(const matrix& a, const matrix& b) {
    require_square(a, "solve_linear");
    if (a.rows() != b.rows()) throw dimension_mismatch("solve_linear: rhs row count");
    const std::size_t n = a.rows();
    const double pivot_tol = 1e-13 * mat_max_abs(a);
    auto f = detail::lu_decompose(a, pivot_tol);
    if (f.singular) throw singular_matrix("solve_linear: pivot below tolerance");
    matrix x(n, b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) {
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = b(f.perm[i], c);
            for (std::size_t j = 0; j < i; ++j) s -= f.lu(i, j) * y[j];
            y[i] = s;
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t j = ii + 1; j < n; ++j) s -= f.lu(ii, j) * x(j, c);
            x(ii, c) = s / f.lu(ii, ii);
        }
    }
#ifndef NDEBUG
    const double resid = frobenius_norm(a * x - b);
    assert(resid <= 1e-10 * (1.0 + frobenius_norm(b)));
#endif
    return x;
}

inline double determinant(const matrix& a) {
    require_square(a, "determinant");
    if (a.rows() == 0) return 1.0;
    auto f = detail::lu_decompose(a, 0.0);
    double d = f.sign;
    for (std::size_t i = 0; i < a.rows(); ++i) d *= f.lu(i, i);
    return d;
}

// ---------------------------------------------------------------------------
// Cyclic Jacobi eigendecomposition for symmetric matrices.

struct eig_result {
    std::vector<double> values;  // descending
    matrix vectors;              // columns match values
};

inline eig_result sym_eig(const matrix& m) {
    require_symmetric(m, "sym_eig");
    const std::size_t n = m.rows();
    matrix a = symmetrize(m);
    matrix v = matrix::identity(n);
    const double scale = frobenius_norm(a);
    const double stop = (scale == 0.0) ? 0.0 : 1e-14 * scale;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        off = std::sqrt(2.0 * off);
        if (off <= stop) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::fabs(apq) <= stop / (2.0 * n)) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
    eig_result r;
    r.values.resize(n);
    r.vectors = matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        r.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) r.vectors(i, j) = v(i, order[j]);
    }
    return r;
}

inline matrix psd_project(const matrix& m, double floor) {
    require_symmetric(m, "psd_project");
    auto e = sym_eig(m);
    const std::size_t n = m.rows();
    matrix r(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double lam = std::max(e.values[k], floor);
        if (lam == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const double vik = e.vectors(i, k);
            if (vik == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) r(i, j) += lam * vik * e.vectors(j, k);
        }
    }
    return symmetrize(r);
}

// ---------------------------------------------------------------------------
// Spectral norm by power iteration on MᵀM, two deterministic starts.

namespace detail {

inline double rayleigh_run(const matrix& b, std::vector<double> v) {
    const std::size_t n = v.size();
    double nv = 0.0;
    for (double x : v) nv += x * x;
    nv = std::sqrt(nv);
    if (nv == 0.0) return 0.0;
    for (auto& x : v) x /= nv;
    double lam_prev = -1.0;
    int calm = 0;
    for (int it = 0; it < 50000; ++it) {
        std::vector<double> w(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) w[i] += b(i, j) * v[j];
        double lam = 0.0, nw = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            lam += v[i] * w[i];
            nw += w[i] * w[i];
        }
        nw = std::sqrt(nw);
        if (nw == 0.0) return 0.0;
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
        if (std::fabs(lam - lam_prev) <= 1e-13 * std::max(1.0, std::fabs(lam))) {
            if (++calm >= 3) return lam;
        } else {
            calm = 0;
        }
        lam_prev = lam;
    }
    return lam_prev;
}

}  // namespace detail

inline double spectral_norm(const matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    const matrix b = transpose(m) * m;
    const std::size_t n = b.rows();
    if (mat_max_abs(b) == 0.0) return 0.0;
    std::vector<double> ones(n, 1.0);
    std::vector<double> shifted(n);
    for (std::size_t i = 0; i < n; ++i)
        shifted[i] = 1.0 + 0.5 * static_cast<double>(i + 1) * ((i % 2) ? -1.0 : 1.0);
    const double lam = std::max(detail::rayleigh_run(b, ones), detail::rayleigh_run(b, shifted));
    return std::sqrt(std::max(lam, 0.0));
}

// ---------------------------------------------------------------------------
// Stability certification by repeated squaring: ρ(M) ≤ ‖Mᵏ‖^{1/k}, so any
// power with norm < 1 proves the spectral radius is inside the unit circle.

struct stability_verdict {
    enum class kind_t { stable, not_certified, diverged };
    kind_t kind = kind_t::not_certified;
    long power = 0;    // stable: witness; not_certified: max checked; diverged: blowup power
    double norm = 0.0; // ‖M^power‖₂ observed there

    bool stable() const { return kind == kind_t::stable; }
};

inline stability_verdict power_stability(const matrix& m, long k_max = 4096,
                                         double blowup = 1e12) {
    require_square(m, "power_stability");
    if (k_max < 1) throw error("power_stability: k_max must be >= 1");
    matrix mk = m;
    long k = 1;
    stability_verdict out;
    while (true) {
        const double nk = spectral_norm(mk);
        if (!std::isfinite(nk) || nk > blowup) {
            out.kind = stability_verdict::kind_t::diverged;
            out.power = k;
            out.norm = nk;
            return out;
        }
        if (nk < 1.0) {
            out.kind = stability_verdict::kind_t::stable;
            out.power = k;
            out.norm = nk;
            return out;
        }
        if (2 * k > k_max) {
            out.kind = stability_verdict::kind_t::not_certified;
            out.power = k;
            out.norm = nk;
            return out;
        }
        mk = mk * mk;
        k *= 2;
    }
}

}  // namespace lqstack
