#include "doctest.h"

#include "dynkit/cli.hpp"
#include "dynkit/io.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>

using namespace dynkit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path golden_dir = DYNKIT_GOLDEN_DIR;

std::string golden_output(const std::string& name) { return execute(validate_config(read_file((golden_dir / (name + ".json")).string()))); }

std::vector<std::vector<double>> csv_rows(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> r;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) r.push_back(cell.empty() ? NAN : std::stod(cell));
        rows.push_back(r);
    }
    return rows;
}

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "dynkit");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> paths(const std::vector<SchemaIssue>& issues) {
    std::vector<std::string> p;
    for (const auto& i : issues) p.push_back(i.path);
    return p;
}

bool has_path(const std::vector<SchemaIssue>& issues, const std::string& p) {
    for (const auto& i : issues)
        if (i.path == p) return true;
    return false;
}

}  // namespace

TEST_CASE("every subcommand has a golden artifact, reproduced byte for byte") {
    std::set<std::string> covered;
    int n = 0;
    for (const auto& e : fs::directory_iterator(golden_dir)) {
        if (e.path().extension() != ".json") continue;
        const std::string name = e.path().stem().string();
        INFO(name);
        RunConfig cfg = validate_config(read_file(e.path().string()));
        covered.insert(cfg.command);
        std::string a = execute(cfg), b = execute(cfg);
        CHECK(a == b);
        CHECK(a == read_file((golden_dir / (name + ".out")).string()));
        ++n;
    }
    CHECK(n >= 14);
    for (const auto& c : cli_commands()) {
        INFO(c);
        CHECK(covered.count(c) == 1);
    }
}

TEST_CASE("golden artifacts carry the module acceptance numbers") {
    auto cascade = csv_rows(golden_output("cascade_logistic"));
    REQUIRE(cascade.size() == 6);
    CHECK(std::abs(cascade[0][1] - 3) <= 1e-8);
    CHECK(std::abs(cascade[1][1] - (1 + std::sqrt(6.0))) <= 1e-6);
    CHECK(std::abs(cascade[4][2] - 4.669) <= 0.05 * 4.669);

    auto dim = json::parse(golden_output("dimension_cantor"));
    const double d0 = std::log(2.0) / std::log(3.0);
    CHECK(std::abs(dim["slope"].get<double>() - d0) <= 0.02 * d0);

    auto diagram = csv_rows(golden_output("diagram_logistic"));
    CHECK(diagram.size() == 31 * 100);
    for (int k = 0; k < 100; ++k) CHECK(std::abs(diagram[k][1] - 0.6) <= 1e-6);

    auto floq = json::parse(golden_output("floquet_vdp"));
    double best = 1e9;
    for (const auto& m : floq["multipliers"])
        best = std::min(best, std::hypot(m["re"].get<double>() - 1, m["im"].get<double>()));
    CHECK(best <= 1e-4);

    auto ly = json::parse(golden_output("lyapunov_henon"));
    CHECK(std::abs(ly["sum"].get<double>() - std::log(0.3)) <= 0.01 * std::abs(std::log(0.3)));
    CHECK(ly["exponents"][0].get<double>() > 0.25);

    auto eq = json::parse(golden_output("equilibria_lorenz"));
    REQUIRE(eq["equilibria"].size() == 3);
    for (const auto& r : eq["equilibria"]) {
        double x = r["point"][0];
        if (std::abs(x) > 1) CHECK(std::abs(std::abs(x) - std::sqrt(72.0)) <= 1e-8);
    }

    auto bif = json::parse(golden_output("bifurcate_lorenz"));
    bool pitchfork = false;
    for (const auto& e : bif["events"])
        if (e["kind"] == "pitchfork" && std::abs(e["lambda_c"].get<double>() - 1) <= 1e-4) pitchfork = true;
    CHECK(pitchfork);

    auto nf = json::parse(golden_output("normalform_vdp_hopf"));
    CHECK(nf["resonances"][0]["hits"].empty());
    auto cubic = nf["resonances"][1]["hits"];
    REQUIRE(cubic.size() == 2);
    CHECK(cubic[0]["p"] == json::array({2, 1}));
    CHECK(cubic[1]["p"] == json::array({1, 2}));

    auto man = json::parse(golden_output("manifold_lorenz_r1"));
    CHECK(man["exact"] == true);
    CHECK(man["invariance_residual"].get<double>() < 1e-6);

    auto per = json::parse(golden_output("symbolic_periodic"));
    CHECK(per["count"] == 8);
    for (const auto& p : per["points"]) CHECK(p["verified"] == true);
    auto hs = json::parse(golden_output("symbolic_horseshoe"));
    CHECK(hs["width"] == "1/9");
    CHECK(hs["height"] == "4/25");

    auto tent = csv_rows(golden_output("simulate_tent"));
    REQUIRE(tent.size() == 13);
    for (size_t k = 0; k < tent.size(); ++k) CHECK(tent[k][1] == (k % 2 ? 0.8 : 0.4));

    auto lz = golden_output("attractor_lorenz");
    CHECK(lz.rfind("t,x1,x2,x3\n", 0) == 0);
    CHECK(csv_rows(lz).size() == 501);

    auto pc = csv_rows(golden_output("poincare_vdp"));
    REQUIRE(pc.size() == 5);
    for (size_t k = 1; k < pc.size(); ++k) CHECK(std::abs(pc[k][1] - pc[k - 1][1] - 6.6633) <= 1e-3);
}

TEST_CASE("full logistic diagram over 2.5..4 is deterministic") {
    std::vector<std::string> args = {"diagram", "--system", "logistic", "--range", "2.5:4.0", "--samples", "1500",
                                     "--transient", "1000", "--keep", "100", "--x0", "0.5"};
    Run a = run(args), b = run(args);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.rfind("lambda,x\n", 0) == 0);
    CHECK(std::count(a.out.begin(), a.out.end(), '\n') == 150001);

    Run lz = run({"attractor", "--system", "lorenz"});
    CHECK(lz.code == 0);
    CHECK(csv_rows(lz.out).size() == 10001);
}

TEST_CASE("artifacts do not depend on the thread cap") {
    ::setenv("DYNKIT_THREADS", "1", 1);
    std::string one = golden_output("diagram_logistic") + golden_output("equilibria_lorenz") + golden_output("hill_chart");
    ::setenv("DYNKIT_THREADS", "3", 1);
    std::string three = golden_output("diagram_logistic") + golden_output("equilibria_lorenz") + golden_output("hill_chart");
    ::unsetenv("DYNKIT_THREADS");
    CHECK(one == three);
}

TEST_CASE("validate_config") {
    auto cfg = validate_config(std::string(R"({"command":"lyapunov","system":{"name":"lorenz"}})"));
    CHECK(cfg.command == "lyapunov");
    CHECK(cfg.options["T"] == 1000.0);
    CHECK(cfg.options["discard_fraction"] == 0.1);
    CHECK(cfg.format == "json");
    CHECK(cfg.seed == 0);

    auto issues = check_config(json::parse(R"({"command":"lyapunov","system":{"name":"lorentz"}})"));
    CHECK(paths(issues) == std::vector<std::string>{"/system/name"});

    issues = check_config(json::parse(R"({"command":"simulate","system":{"name":"lorenz"},"options":{"abs_tol":-1e-9}})"));
    CHECK(paths(issues) == std::vector<std::string>{"/options/abs_tol"});

    issues = check_config(
        json::parse(R"({"command":"simulate","colour":1,"system":{"name":"lorenz","params":{"rho":2}},"options":{"t_end":"x","zz":1}})"));
    CHECK(has_path(issues, "/colour"));
    CHECK(has_path(issues, "/system/params/rho"));
    CHECK(has_path(issues, "/options/t_end"));
    CHECK(has_path(issues, "/options/zz"));
    // same input, same messages in the same order
    auto again = check_config(
        json::parse(R"({"command":"simulate","colour":1,"system":{"name":"lorenz","params":{"rho":2}},"options":{"t_end":"x","zz":1}})"));
    REQUIRE(again.size() == issues.size());
    for (size_t i = 0; i < issues.size(); ++i) CHECK(again[i].message == issues[i].message);

    CHECK(has_path(check_config(json::parse(R"({"system":{"name":"lorenz"}})")), "/command"));
    CHECK(has_path(check_config(json::parse(R"({"command":"diagram","system":{"name":"logistic"}})")), "/options/range"));
    CHECK(has_path(check_config(json::parse(R"({"command":"cascade","system":{"name":"logistic"},"output":{"format":"xml"}})")),
                   "/output/format"));
    CHECK(has_path(check_config(json::parse(R"({"command":"cascade"})")), "/system"));
    CHECK(has_path(check_config(json::parse(R"({"command":"lyapunov","system":{"name":"logistic","params":{"lambda":5}}})")),
                   "/system/params/lambda"));
    CHECK(check_config(json::parse("[]")).size() == 1);

    try {
        validate_config(std::string("{not json"));
        FAIL("expected SchemaViolation");
    } catch (const ConfigError& e) {
        CHECK(e.kind() == Err::SchemaViolation);
    }
}

TEST_CASE("configs round-trip through JSON") {
    for (const auto& e : fs::directory_iterator(golden_dir)) {
        if (e.path().extension() != ".json") continue;
        INFO(e.path().string());
        RunConfig a = validate_config(read_file(e.path().string()));
        RunConfig b = validate_config(a.to_json());
        CHECK(b.to_json() == a.to_json());
        CHECK(dump_json(b.to_json()) == dump_json(a.to_json()));
    }
}

TEST_CASE("flags win over the config file") {
    fs::path tmp = fs::temp_directory_path() / "dynkit_test_cfg.json";
    write_atomic(tmp.string(), R"({"command":"cascade","system":{"name":"logistic"},"options":{"max_n":3}})");
    Run base = run({"--config", tmp.string()});
    CHECK(base.code == 0);
    CHECK(csv_rows(base.out).size() == 3);
    Run over = run({"cascade", "--config", tmp.string(), "--max-n", "4"});
    CHECK(over.code == 0);
    CHECK(csv_rows(over.out).size() == 4);
    Run dumped = run({"cascade", "--config", tmp.string(), "--max-n", "5", "--seed", "7", "--dump-config"});
    auto j = json::parse(dumped.out);
    CHECK(j["options"]["max_n"] == 5);
    CHECK(j["seed"] == 7);
    fs::remove(tmp);
}

TEST_CASE("exit codes and error JSON") {
    Run help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("cascade") != std::string::npos);

    Run bad_cmd = run({"frobnicate"});
    CHECK(bad_cmd.code == 2);
    CHECK(json::parse(bad_cmd.err)["error"] == "Usage");

    Run schema = run({"simulate", "--system", "lorenz", "--abs-tol", "-1"});
    CHECK(schema.code == 2);
    auto ej = json::parse(schema.err);
    CHECK(ej["error"] == "SchemaViolation");
    CHECK(ej["issues"][0]["path"] == "/options/abs_tol");

    Run dims = run({"simulate", "--system", "lorenz", "--x0", "1,2"});
    CHECK(dims.code == 2);
    CHECK(json::parse(dims.err)["error"] == "DimensionMismatch");

    // the 2-cycle cannot double inside [0, 3.2]
    Run numeric = run({"cascade", "--system", "logistic", "--lambda-hi", "3.2", "--max-n", "3"});
    CHECK(numeric.code == 3);
    CHECK(json::parse(numeric.err)["exit_code"] == 3);

    Run word = run({"symbolic", "--mode", "horseshoe", "--word", "+x,"});
    CHECK(word.code == 2);
    CHECK(json::parse(word.err)["error"] == "InvalidWord");
}

TEST_CASE("output files are written whole") {
    fs::path out = fs::temp_directory_path() / "dynkit_test_out.csv";
    fs::remove(out);
    Run r = run({"hill-chart", "--samples", "5", "-o", out.string()});
    CHECK(r.code == 0);
    CHECK(r.out.empty());
    CHECK(fs::exists(out));
    CHECK_FALSE(fs::exists(out.string() + ".tmp"));
    CHECK(csv_rows(read_file(out.string())).size() == 5);
    fs::remove(out);
}

TEST_CASE("json output keeps 17 significant digits") {
    CHECK(dump_json(json(0.1)) == "0.10000000000000001\n");
    CHECK(dump_json(json::array({1.0 / 3.0})) == "[0.33333333333333331]\n");
    CHECK(json::parse(dump_json(json(M_PI))).get<double>() == M_PI);
    CHECK(dump_json(json(std::nan(""))) == "null\n");
}
