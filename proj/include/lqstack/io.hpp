#pragma once

// Deterministic text serialization: fixed 17-significant-digit reals,
// LF line endings, insertion-ordered JSON. Identical inputs must give
// byte-identical files.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "matrix.hpp"
#include "simulate.hpp"

namespace lqstack {

struct io_error : error {
    using error::error;
};

inline std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline std::string json_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    out += '"';
    return out;
}

inline std::string json_matrix(const matrix& m) {
    std::string out = "[";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (i) out += ", ";
        out += '[';
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out += ", ";
            out += format_real(m(i, j));
        }
        out += ']';
    }
    out += ']';
    return out;
}

// flat JSON document builder; fields appear in call order
class json_doc {
public:
    void field(const std::string& key, double v) { add(key, format_real(v)); }
    void field(const std::string& key, long v) { add(key, std::to_string(v)); }
    void field(const std::string& key, bool v) { add(key, v ? "true" : "false"); }
    void field(const std::string& key, const std::string& v) { add(key, json_string(v)); }
    void field(const std::string& key, const char* v) { add(key, json_string(v)); }
    void field(const std::string& key, const matrix& v) { add(key, json_matrix(v)); }
    void raw_field(const std::string& key, const std::string& payload) { add(key, payload); }

    std::string str() const {
        std::string out = "{\n";
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            out += "  " + json_string(entries_[i].first) + ": " + entries_[i].second;
            if (i + 1 < entries_.size()) out += ',';
            out += '\n';
        }
        out += "}\n";
        return out;
    }

private:
    void add(const std::string& key, const std::string& payload) {
        entries_.emplace_back(key, payload);
    }
    std::vector<std::pair<std::string, std::string>> entries_;
};

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw io_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for reading: " + path);
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return content;
}

namespace detail {

inline void csv_group(std::string& header, const std::string& stem, std::size_t count) {
    for (std::size_t i = 1; i <= count; ++i)
        header += "," + stem + "_" + std::to_string(i);
}

inline void csv_cells(std::string& row, const matrix& column) {
    for (std::size_t i = 0; i < column.rows(); ++i)
        row += "," + format_real(column(i, 0));
}

}  // namespace detail

// column order is part of the file contract; see README
inline std::string trajectory_csv(const system_model& mdl, const trajectory& traj) {
    std::string out = "k";
    detail::csv_group(out, "x", mdl.n());
    detail::csv_group(out, "xhat1", mdl.n());
    detail::csv_group(out, "xhat2", mdl.n());
    detail::csv_group(out, "xtilde1", mdl.n());
    detail::csv_group(out, "xtilde2", mdl.n());
    detail::csv_group(out, "u1", mdl.m1());
    detail::csv_group(out, "u2", mdl.m2());
    detail::csv_group(out, "y1", mdl.s1());
    detail::csv_group(out, "y2", mdl.s2());
    out += ",stage_cost_1,stage_cost_2\n";
    for (const auto& r : traj.records) {
        std::string row = std::to_string(r.k);
        detail::csv_cells(row, r.x);
        detail::csv_cells(row, r.xhat1);
        detail::csv_cells(row, r.xhat2);
        detail::csv_cells(row, r.xtilde1);
        detail::csv_cells(row, r.xtilde2);
        detail::csv_cells(row, r.u1);
        detail::csv_cells(row, r.u2);
        detail::csv_cells(row, r.y1);
        detail::csv_cells(row, r.y2);
        row += "," + format_real(r.stage_cost_1);
        row += "," + format_real(r.stage_cost_2);
        out += row + "\n";
    }
    return out;
}

}  // namespace lqstack
