#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <sys/wait.h>

#include "lqstack/config.hpp"
#include "lqstack/io.hpp"
#include "lqstack/reports.hpp"
#include "reference_case.hpp"

using namespace lqstack;
namespace fs = std::filesystem;

namespace {

std::string fixtures_dir() {
    const char* env = std::getenv("LQSTACK_FIXTURES");
    return env ? env : "fixtures";
}

std::string cli_binary() {
    const char* env = std::getenv("LQSTACK_BIN");
    return env ? env : "build/lqstack";
}

std::string fixture_path() { return fixtures_dir() + "/paper_section5.json"; }

// scratch space wiped at construction so reruns are deterministic
fs::path scratch(const std::string& leaf) {
    fs::path dir = fs::temp_directory_path() / "lqstack_cli_tests" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = cli_binary() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

nlohmann::json fixture_json() {
    return nlohmann::json::parse(read_text_file(fixture_path()));
}

std::string dump_config(const nlohmann::json& j, const fs::path& dir, const std::string& name) {
    const fs::path p = dir / name;
    write_text_file(p.string(), j.dump(2) + "\n");
    return p.string();
}

std::string minimal_config_text() {
    return R"({
  "A": [[0.5, 0.0], [0.0, 0.4]],
  "B1": [[1.0], [0.0]],
  "B2": [[0.0], [1.0]],
  "H1": [[1.0, 0.0]],
  "H2": [[0.0, 1.0]],
  "Q1": [[1.0, 0.0], [0.0, 1.0]],
  "Q2": [[1.0, 0.0], [0.0, 1.0]],
  "R11": [[1.0]],
  "R12": [[1.0]],
  "R21": [[1.0]],
  "R22": [[1.0]],
  "x0": [1.0, 2.0]
})";
}

}  // namespace

TEST_CASE("bundled reference config loads bit-exactly") {
    auto cfg = parse_config(fixture_path());
    const auto mdl = refcase::model();
    const auto w = refcase::weights();
    CHECK(mat_max_abs(cfg.model.A - mdl.A) == 0.0);
    CHECK(mat_max_abs(cfg.model.B1 - mdl.B1) == 0.0);
    CHECK(mat_max_abs(cfg.model.B2 - mdl.B2) == 0.0);
    CHECK(mat_max_abs(cfg.model.H1 - mdl.H1) == 0.0);
    CHECK(mat_max_abs(cfg.model.H2 - mdl.H2) == 0.0);
    CHECK(mat_max_abs(cfg.weights.Q1 - w.Q1) == 0.0);
    CHECK(mat_max_abs(cfg.weights.Q2 - w.Q2) == 0.0);
    CHECK(mat_max_abs(cfg.weights.R11 - w.R11) == 0.0);
    CHECK(mat_max_abs(cfg.weights.R12 - w.R12) == 0.0);
    CHECK(mat_max_abs(cfg.weights.R21 - w.R21) == 0.0);
    CHECK(mat_max_abs(cfg.weights.R22 - w.R22) == 0.0);
    CHECK(mat_max_abs(cfg.x0 - colvec({1.0, -1.0})) == 0.0);
    REQUIRE(cfg.observer.L1.has_value());
    REQUIRE(cfg.observer.L2.has_value());
    CHECK(mat_max_abs(*cfg.observer.L1 - refcase::ref_L1()) == 0.0);
    CHECK(mat_max_abs(*cfg.observer.L2 - refcase::ref_L2()) == 0.0);
    CHECK(cfg.sim.steps == 200);
    REQUIRE(cfg.analysis.N_list.size() == 21);
    CHECK(cfg.analysis.N_list.front() == 0);
    CHECK(cfg.analysis.N_list.back() == 200);
}

TEST_CASE("defaults are applied when optional sections are absent") {
    auto cfg = parse_config_text(minimal_config_text());
    CHECK(cfg.solver.tol == 1e-12);
    CHECK(cfg.solver.max_iter == 100000);
    CHECK(cfg.observer.method == design_method::automatic);
    CHECK(cfg.observer.margin == 1e-6);
    CHECK_FALSE(cfg.observer.L1.has_value());
    CHECK(cfg.sim.steps == 200);
    CHECK(mat_max_abs(cfg.xhat1_0) == 0.0);
    CHECK(mat_max_abs(cfg.xhat2_0) == 0.0);
    REQUIRE(cfg.analysis.N_list.size() == 21);
    CHECK(cfg.analysis.N_list[1] == 10);
}

TEST_CASE("required keys and definiteness are enforced") {
    auto j = fixture_json();
    j.erase("R22");
    try {
        parse_config_text(j.dump());
        FAIL("expected validation_error");
    } catch (const validation_error& e) {
        CHECK(e.field == "R22");
        CHECK(std::string(e.what()).find("required") != std::string::npos);
    }

    auto j2 = fixture_json();
    j2["Q1"] = {{-1.0, 0.0}, {0.0, 1.0}};
    try {
        parse_config_text(j2.dump());
        FAIL("expected validation_error");
    } catch (const validation_error& e) {
        CHECK(e.field == "Q1");
        CHECK(std::string(e.what()).find("not positive semidefinite") != std::string::npos);
    }
}

TEST_CASE("unknown keys are rejected, _comment is allowed everywhere") {
    auto j = fixture_json();
    j["mystery"] = 1;
    CHECK_THROWS_AS(parse_config_text(j.dump()), validation_error);

    auto j2 = fixture_json();
    j2["solver"] = {{"tol", 1e-10}, {"typo_key", 3}};
    CHECK_THROWS_AS(parse_config_text(j2.dump()), validation_error);

    auto j3 = fixture_json();
    j3["_comment"] = "top";
    j3["solver"] = {{"_comment", "solver"}, {"tol", 1e-10}};
    j3["sim"] = {{"_comment", "sim"}, {"steps", 7}};
    j3["analysis"] = {{"_comment", "analysis"}, {"N_list", {0, 5}}};
    auto cfg = parse_config_text(j3.dump());
    CHECK(cfg.solver.tol == 1e-10);
    CHECK(cfg.sim.steps == 7);
    CHECK(cfg.analysis.N_list == std::vector<long>{0, 5});
}

TEST_CASE("malformed JSON reports the offending line") {
    const std::string text = "{\n  \"A\": [[1.0]],\n  broken\n}";
    try {
        parse_config_text(text);
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(e.line == 3);
    }
}

TEST_CASE("structural validation catches shape mistakes") {
    auto j = fixture_json();
    j["x0"] = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(parse_config_text(j.dump()), validation_error);

    auto j2 = fixture_json();
    j2["A"] = nlohmann::json::array({nlohmann::json::array({1.0, 2.0}),
                                     nlohmann::json::array({3.0})});
    CHECK_THROWS_AS(parse_config_text(j2.dump()), validation_error);

    auto j3 = fixture_json();
    j3["observer"].erase("L2");
    CHECK_THROWS_AS(parse_config_text(j3.dump()), validation_error);

    auto j4 = fixture_json();
    j4["observer"]["method"] = "newton";
    CHECK_THROWS_AS(parse_config_text(j4.dump()), validation_error);

    auto j5 = fixture_json();
    j5["analysis"]["N_list"] = {10, 5};
    CHECK_THROWS_AS(parse_config_text(j5.dump()), validation_error);

    auto j6 = fixture_json();
    j6["sim"]["steps"] = -1;
    CHECK_THROWS_AS(parse_config_text(j6.dump()), validation_error);
}

TEST_CASE("real formatting round-trips doubles exactly") {
    for (double v : {0.1, 1.0 / 3.0, -0.7, 1e-300, 1e300, 12345.678901234567, 0.0}) {
        const std::string s = format_real(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
    CHECK(format_real(1.0) == "1");
    CHECK(format_real(0.5) == "0.5");
}

TEST_CASE("JSON emitters are stable") {
    matrix m{{1.5, 2.0}, {3.0, 4.0}};
    CHECK(json_matrix(m) == "[[1.5, 2], [3, 4]]");
    json_doc doc;
    doc.field("alpha", 1.0);
    doc.field("beta", std::string("two"));
    doc.field("gamma", true);
    CHECK(doc.str() == "{\n  \"alpha\": 1,\n  \"beta\": \"two\",\n  \"gamma\": true\n}\n");
}

TEST_CASE("CLI solve writes a report with the solved gains") {
    auto dir = scratch("solve");
    REQUIRE(run_cli("solve --config " + fixture_path() + " --out " + dir.string() +
                    " --quiet") == 0);
    auto doc = nlohmann::json::parse(read_text_file((dir / "solution.json").string()));
    CHECK(std::abs(doc["K1"][0][0].get<double>() - 0.2028) < 1e-3);
    CHECK(std::abs(doc["K1"][0][1].get<double>() - (-0.1374)) < 1e-3);
    CHECK(std::abs(doc["K2"][0][0].get<double>() - (-0.4005)) < 1e-3);
    CHECK(doc["residual_1"].get<double>() < 1e-10);
    CHECK(doc["residual_2"].get<double>() < 1e-10);
}

TEST_CASE("CLI simulate honors --steps and the CSV contract") {
    auto dir = scratch("simulate");
    REQUIRE(run_cli("simulate --config " + fixture_path() + " --out " + dir.string() +
                    " --steps 0 --quiet") == 0);
    const std::string csv = read_text_file((dir / "trajectory.csv").string());
    // header plus exactly one data row
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(csv.rfind("k,x_1,x_2,xhat1_1,xhat1_2,xhat2_1,xhat2_2,xtilde1_1,xtilde1_2,"
                    "xtilde2_1,xtilde2_2,u1_1,u2_1,y1_1,y2_1,stage_cost_1,stage_cost_2\n",
                    0) == 0);
    CHECK(csv.find("\r") == std::string::npos);
}

TEST_CASE("CLI analyze writes the decay table down to the far tail") {
    auto dir = scratch("analyze");
    REQUIRE(run_cli("analyze --config " + fixture_path() + " --out " + dir.string() +
                    " --quiet") == 0);
    const std::string csv = read_text_file((dir / "decay.csv").string());
    CHECK(csv.rfind("N,delta_J1,delta_J2,envelope\n", 0) == 0);
    // last row is N = 200 and the gaps have collapsed below 1e-8 of the start
    std::istringstream lines(csv);
    std::string line, last;
    std::getline(lines, line);  // header
    std::getline(lines, line);
    const std::string first_row = line;
    while (std::getline(lines, line))
        if (!line.empty()) last = line;
    auto field = [](const std::string& row, int idx) {
        std::istringstream ss(row);
        std::string cell;
        for (int i = 0; i <= idx; ++i) std::getline(ss, cell, ',');
        return std::strtod(cell.c_str(), nullptr);
    };
    CHECK(field(first_row, 0) == 0.0);
    CHECK(field(last, 0) == 200.0);
    CHECK(std::abs(field(last, 1)) < 1e-8 * std::abs(field(first_row, 1)));
    CHECK(std::abs(field(last, 2)) < 1e-8 * std::abs(field(first_row, 2)));

    auto doc = nlohmann::json::parse(read_text_file((dir / "cost_report.json").string()));
    CHECK(doc["delta_J1"].get<double>() ==
          Catch::Approx(doc["J1_obs"].get<double>() - doc["J1_star_fb"].get<double>()));
    CHECK(doc["rederived_gap_1"].get<double>() < 1e-9);
}

TEST_CASE("CLI --from trims the analysis start") {
    auto dir = scratch("from");
    REQUIRE(run_cli("analyze --config " + fixture_path() + " --out " + dir.string() +
                    " --from 150 --quiet") == 0);
    const std::string csv = read_text_file((dir / "decay.csv").string());
    CHECK(csv.find("\n150,") != std::string::npos);
    CHECK(csv.find("\n0,") == std::string::npos);
    CHECK(csv.find("\n140,") == std::string::npos);
}

TEST_CASE("CLI exit codes distinguish failure stages") {
    auto dir = scratch("codes");

    CHECK(run_cli("solve --config " + (dir / "absent.json").string()) == 2);

    auto j = fixture_json();
    j.erase("R22");
    CHECK(run_cli("solve --config " + dump_config(j, dir, "missing.json")) == 2);

    auto j2 = fixture_json();
    j2["solver"] = {{"max_iter", 2}};
    CHECK(run_cli("solve --config " + dump_config(j2, dir, "noconv.json") + " --out " +
                  dir.string()) == 3);

    // undetectable pair: no observer can reconstruct the state
    auto j3 = fixture_json();
    j3["A"] = {{2.0, 0.0}, {0.0, 2.0}};
    j3["H1"] = {{0.0, 0.0}};
    j3["H2"] = {{0.0, 0.0}};
    j3.erase("observer");
    CHECK(run_cli("design --config " + dump_config(j3, dir, "unobs.json") + " --out " +
                  dir.string()) == 4);
}

TEST_CASE("CLI failure leaves no partial outputs") {
    auto dir = scratch("partial");
    auto j = fixture_json();
    j["solver"] = {{"max_iter", 2}};
    CHECK(run_cli("solve --config " + dump_config(j, dir, "cfg.json") + " --out " +
                  (dir / "out").string()) == 3);
    CHECK_FALSE(fs::exists(dir / "out" / "solution.json"));
}

TEST_CASE("CLI verify passes pristine and fails under an injected fault") {
    CHECK(run_cli("verify --config " + fixture_path() + " --quiet") == 0);
    CHECK(run_cli("verify --config " + fixture_path() + " --inject-fault --quiet") == 5);
}

TEST_CASE("reproduce-paper is byte-deterministic") {
    auto d1 = scratch("rp1");
    auto d2 = scratch("rp2");
    REQUIRE(run_cli("reproduce-paper --out " + d1.string() + " --quiet") == 0);
    REQUIRE(run_cli("reproduce-paper --out " + d2.string() + " --quiet") == 0);
    for (const char* name : {"reproduction.txt", "solution.json", "design.json",
                             "trajectory.csv", "cost_report.json", "decay.csv"}) {
        const std::string a = read_text_file((d1 / name).string());
        const std::string b = read_text_file((d2 / name).string());
        INFO(name);
        CHECK(a == b);
        CHECK_FALSE(a.empty());
    }
    // the embedded reference case and the bundled fixture agree
    auto d3 = scratch("rp3");
    REQUIRE(run_cli("reproduce-paper --config " + fixture_path() + " --out " + d3.string() +
                    " --quiet") == 0);
    CHECK(read_text_file((d1 / "reproduction.txt").string()) ==
          read_text_file((d3 / "reproduction.txt").string()));
}

TEST_CASE("reproduce-paper records the published-row outcomes") {
    auto dir = scratch("rp_rows");
    REQUIRE(run_cli("reproduce-paper --out " + dir.string() + " --quiet") == 0);
    const std::string table = read_text_file((dir / "reproduction.txt").string());
    auto row_status = [&](const std::string& label) {
        const auto pos = table.find(label);
        REQUIRE(pos != std::string::npos);
        const auto eol = table.find('\n', pos);
        const std::string row = table.substr(pos, eol - pos);
        return row.substr(row.size() - 4);
    };
    CHECK(row_status("K1[1]") == "PASS");
    CHECK(row_status("K1[2]") == "PASS");
    CHECK(row_status("K2[1]") == "PASS");
    CHECK(row_status("K2[2]") == "PASS");
    CHECK(row_status("det(error matrix)") == "PASS");
    CHECK(row_status("stability verdict") == "PASS");
}

TEST_CASE("solution report reloads into an identical simulation") {
    auto dir = scratch("roundtrip");
    REQUIRE(run_cli("reproduce-paper --out " + dir.string() + " --quiet") == 0);
    auto sol_doc = nlohmann::json::parse(read_text_file((dir / "solution.json").string()));
    auto des_doc = nlohmann::json::parse(read_text_file((dir / "design.json").string()));

    // push the serialized gains back through a config as user-supplied data
    auto j = fixture_json();
    j["observer"] = {{"L1", des_doc["L1"]}, {"L2", des_doc["L2"]}};
    auto cfg_path = dump_config(j, dir, "echo.json");
    auto echo_dir = dir / "echo_out";
    REQUIRE(run_cli("simulate --config " + cfg_path + " --out " + echo_dir.string() +
                    " --quiet") == 0);
    const std::string a = read_text_file((dir / "trajectory.csv").string());
    const std::string b = read_text_file((echo_dir / "trajectory.csv").string());
    CHECK(a == b);
}
