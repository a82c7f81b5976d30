#pragma once

// Report documents written by the command-line driver and checked by the
// verification suite. Field order is fixed so identical inputs serialize
// to identical bytes.

#include <string>

#include "cost.hpp"
#include "io.hpp"
#include "observer.hpp"
#include "stackelberg.hpp"

namespace lqstack {

inline const char* verdict_label(const stability_verdict& v) {
    switch (v.kind) {
        case stability_verdict::kind_t::stable: return "stable";
        case stability_verdict::kind_t::diverged: return "diverged";
        default: return "not_certified";
    }
}

inline std::string solution_report_json(const stackelberg_solution& sol) {
    json_doc doc;
    doc.field("K1", sol.K1);
    doc.field("K2", sol.K2);
    doc.field("P1", sol.P1);
    doc.field("P2", sol.P2);
    doc.field("residual_1", sol.r1);
    doc.field("residual_2", sol.r2);
    doc.field("iterations", sol.iterations);
    doc.field("monotone", sol.monotone);
    return doc.str();
}

inline std::string design_report_json(const observer_design& d) {
    json_doc doc;
    doc.field("method", to_string(d.method));
    doc.field("L1", d.L1);
    doc.field("L2", d.L2);
    doc.field("stable", d.verdict.stable());
    doc.field("verdict", verdict_label(d.verdict));
    doc.field("witness_power", d.verdict.power);
    doc.field("witness_norm", d.verdict.norm);
    if (d.certificate) {
        json_doc cert;
        cert.field("margin", d.certificate->margin);
        cert.field("level", d.certificate->level);
        cert.field("iterations", d.certificate->iterations);
        cert.field("P1", d.certificate->P1);
        cert.field("P2", d.certificate->P2);
        std::string payload = cert.str();
        if (!payload.empty() && payload.back() == '\n') payload.pop_back();
        std::string indented;
        for (char ch : payload) {
            indented += ch;
            if (ch == '\n') indented += "  ";
        }
        doc.raw_field("certificate", indented);
    }
    return doc.str();
}

inline std::string cost_report_json(const cost_report& r, const correction_report& c) {
    json_doc doc;
    doc.field("J1_star_fb", r.J1_star_fb);
    doc.field("J2_star_fb", r.J2_star_fb);
    doc.field("J1_obs", r.J1_obs);
    doc.field("J2_obs", r.J2_obs);
    doc.field("delta_J1", r.delta_J1);
    doc.field("delta_J2", r.delta_J2);
    doc.field("correction_paper_1", c.correction_paper_1);
    doc.field("correction_paper_2", c.correction_paper_2);
    doc.field("reconciliation_gap_1", c.reconciliation_gap_1);
    doc.field("reconciliation_gap_2", c.reconciliation_gap_2);
    doc.field("correction_rederived_1", c.correction_rederived_1);
    doc.field("correction_rederived_2", c.correction_rederived_2);
    doc.field("rederived_gap_1", c.rederived_gap_1);
    doc.field("rederived_gap_2", c.rederived_gap_2);
    return doc.str();
}

inline std::string decay_csv(const decay_profile_result& p) {
    std::string out = "N,delta_J1,delta_J2,envelope\n";
    for (std::size_t i = 0; i < p.N_values.size(); ++i) {
        const double env =
            p.c_bar * std::pow(p.lambda_hat, 2.0 * static_cast<double>(p.N_values[i]));
        out += std::to_string(p.N_values[i]);
        out += "," + format_real(p.delta_J1_at_N[i]);
        out += "," + format_real(p.delta_J2_at_N[i]);
        out += "," + format_real(env) + "\n";
    }
    return out;
}

}  // namespace lqstack
