#pragma once

// JSON run-configuration loading. Strict schema: unknown keys are
// rejected ("_comment" is allowed at any object level), every matrix is
// a row-major nested array, vectors are flat arrays.

#include <algorithm>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "matrix.hpp"
#include "model.hpp"
#include "observer.hpp"

namespace lqstack {

struct parse_error : error {
    std::size_t line;
    parse_error(std::size_t line_, const std::string& message)
        : error("line " + std::to_string(line_) + ": " + message), line(line_) {}
};

struct run_config {
    system_model model;
    cost_weights weights;
    matrix x0;
    matrix xhat1_0, xhat2_0;  // default: zero columns

    struct {
        double tol = 1e-12;
        long max_iter = 100000;
    } solver;

    struct {
        design_method method = design_method::automatic;
        double margin = 1e-6;
        std::optional<matrix> L1, L2;  // both present: user-supplied gains
    } observer;

    struct {
        long steps = 200;
    } sim;

    struct {
        std::vector<long> N_list;  // default 0,10,...,200
    } analysis;
};

namespace detail {

using nl_json = nlohmann::json;

inline std::size_t line_of_byte(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

inline void reject_unknown_keys(const nl_json& obj, const std::string& where,
                                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string& key = it.key();
        if (key == "_comment") continue;
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            throw validation_error(where.empty() ? key : where + "." + key, "unknown key");
    }
}

inline double number_at(const nl_json& v, const std::string& field) {
    if (!v.is_number()) throw validation_error(field, "must be a number");
    return v.get<double>();
}

inline matrix matrix_field(const nl_json& obj, const std::string& field) {
    const nl_json& v = obj.at(field);
    if (!v.is_array() || v.empty()) throw validation_error(field, "must be a nested array");
    const std::size_t rows = v.size();
    std::size_t cols = 0;
    if (!v[0].is_array() || v[0].empty())
        throw validation_error(field, "rows must be nonempty arrays");
    cols = v[0].size();
    matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!v[i].is_array() || v[i].size() != cols)
            throw validation_error(field, "rows must all have the same length");
        for (std::size_t j = 0; j < cols; ++j)
            m(i, j) = number_at(v[i][j], field);
    }
    return m;
}

inline matrix column_field(const nl_json& obj, const std::string& field) {
    const nl_json& v = obj.at(field);
    if (!v.is_array() || v.empty()) throw validation_error(field, "must be a flat array");
    matrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = number_at(v[i], field);
    return m;
}

inline void require_keys(const nl_json& obj, std::initializer_list<const char*> keys) {
    for (const char* k : keys)
        if (!obj.contains(k)) throw validation_error(k, "required");
}

}  // namespace detail

inline run_config parse_config_text(const std::string& text) {
    using detail::nl_json;
    nl_json root;
    try {
        root = nl_json::parse(text);
    } catch (const nl_json::parse_error& e) {
        throw parse_error(detail::line_of_byte(text, e.byte), e.what());
    }
    if (!root.is_object()) throw parse_error(1, "top-level value must be an object");

    detail::reject_unknown_keys(root, "",
                                {"A", "B1", "B2", "H1", "H2", "Q1", "Q2", "R11", "R12", "R21",
                                 "R22", "x0", "xhat1_0", "xhat2_0", "solver", "observer", "sim",
                                 "analysis"});
    detail::require_keys(root, {"A", "B1", "B2", "H1", "H2", "Q1", "Q2", "R11", "R12", "R21",
                                "R22", "x0"});

    run_config cfg;
    cfg.model.A = detail::matrix_field(root, "A");
    cfg.model.B1 = detail::matrix_field(root, "B1");
    cfg.model.B2 = detail::matrix_field(root, "B2");
    cfg.model.H1 = detail::matrix_field(root, "H1");
    cfg.model.H2 = detail::matrix_field(root, "H2");
    cfg.weights.Q1 = detail::matrix_field(root, "Q1");
    cfg.weights.Q2 = detail::matrix_field(root, "Q2");
    cfg.weights.R11 = detail::matrix_field(root, "R11");
    cfg.weights.R12 = detail::matrix_field(root, "R12");
    cfg.weights.R21 = detail::matrix_field(root, "R21");
    cfg.weights.R22 = detail::matrix_field(root, "R22");
    cfg.model.validate();
    cfg.weights.validate(cfg.model);

    cfg.x0 = detail::column_field(root, "x0");
    if (cfg.x0.rows() != cfg.model.n())
        throw validation_error("x0", "must have n entries");
    cfg.xhat1_0 = matrix::zero(cfg.model.n(), 1);
    cfg.xhat2_0 = matrix::zero(cfg.model.n(), 1);
    if (root.contains("xhat1_0")) {
        cfg.xhat1_0 = detail::column_field(root, "xhat1_0");
        if (cfg.xhat1_0.rows() != cfg.model.n())
            throw validation_error("xhat1_0", "must have n entries");
    }
    if (root.contains("xhat2_0")) {
        cfg.xhat2_0 = detail::column_field(root, "xhat2_0");
        if (cfg.xhat2_0.rows() != cfg.model.n())
            throw validation_error("xhat2_0", "must have n entries");
    }

    if (root.contains("solver")) {
        const auto& s = root["solver"];
        if (!s.is_object()) throw validation_error("solver", "must be an object");
        detail::reject_unknown_keys(s, "solver", {"tol", "max_iter"});
        if (s.contains("tol")) {
            cfg.solver.tol = detail::number_at(s["tol"], "solver.tol");
            if (!(cfg.solver.tol > 0)) throw validation_error("solver.tol", "must be positive");
        }
        if (s.contains("max_iter")) {
            if (!s["max_iter"].is_number_integer())
                throw validation_error("solver.max_iter", "must be an integer");
            cfg.solver.max_iter = s["max_iter"].get<long>();
            if (cfg.solver.max_iter < 1)
                throw validation_error("solver.max_iter", "must be at least 1");
        }
    }

    if (root.contains("observer")) {
        const auto& o = root["observer"];
        if (!o.is_object()) throw validation_error("observer", "must be an object");
        detail::reject_unknown_keys(o, "observer", {"method", "margin", "L1", "L2"});
        if (o.contains("method")) {
            if (!o["method"].is_string())
                throw validation_error("observer.method", "must be a string");
            const std::string m = o["method"].get<std::string>();
            if (m == "lmi")
                cfg.observer.method = design_method::lmi;
            else if (m == "dual-riccati")
                cfg.observer.method = design_method::dual_riccati;
            else if (m == "auto")
                cfg.observer.method = design_method::automatic;
            else
                throw validation_error("observer.method",
                                       "must be one of lmi, dual-riccati, auto");
        }
        if (o.contains("margin")) {
            cfg.observer.margin = detail::number_at(o["margin"], "observer.margin");
            if (!(cfg.observer.margin > 0))
                throw validation_error("observer.margin", "must be positive");
        }
        if (o.contains("L1") != o.contains("L2"))
            throw validation_error("observer.L1", "L1 and L2 must be supplied together");
        if (o.contains("L1")) {
            cfg.observer.L1 = detail::matrix_field(o, "L1");
            cfg.observer.L2 = detail::matrix_field(o, "L2");
            if (cfg.observer.L1->rows() != cfg.model.n() ||
                cfg.observer.L1->cols() != cfg.model.s1())
                throw validation_error("observer.L1", "must be n x s1");
            if (cfg.observer.L2->rows() != cfg.model.n() ||
                cfg.observer.L2->cols() != cfg.model.s2())
                throw validation_error("observer.L2", "must be n x s2");
        }
    }

    if (root.contains("sim")) {
        const auto& s = root["sim"];
        if (!s.is_object()) throw validation_error("sim", "must be an object");
        detail::reject_unknown_keys(s, "sim", {"steps"});
        if (s.contains("steps")) {
            if (!s["steps"].is_number_integer())
                throw validation_error("sim.steps", "must be an integer");
            cfg.sim.steps = s["steps"].get<long>();
            if (cfg.sim.steps < 0) throw validation_error("sim.steps", "must be nonnegative");
        }
    }

    for (long n = 0; n <= 200; n += 10) cfg.analysis.N_list.push_back(n);
    if (root.contains("analysis")) {
        const auto& a = root["analysis"];
        if (!a.is_object()) throw validation_error("analysis", "must be an object");
        detail::reject_unknown_keys(a, "analysis", {"N_list"});
        if (a.contains("N_list")) {
            if (!a["N_list"].is_array() || a["N_list"].empty())
                throw validation_error("analysis.N_list", "must be a nonempty array");
            cfg.analysis.N_list.clear();
            for (const auto& v : a["N_list"]) {
                if (!v.is_number_integer())
                    throw validation_error("analysis.N_list", "entries must be integers");
                cfg.analysis.N_list.push_back(v.get<long>());
            }
            for (std::size_t i = 0; i < cfg.analysis.N_list.size(); ++i) {
                if (cfg.analysis.N_list[i] < 0)
                    throw validation_error("analysis.N_list", "entries must be nonnegative");
                if (i && cfg.analysis.N_list[i] <= cfg.analysis.N_list[i - 1])
                    throw validation_error("analysis.N_list", "must be strictly increasing");
            }
        }
    }

    return cfg;
}

inline run_config parse_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw parse_error(0, "cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

}  // namespace lqstack
