#include "doctest.h"
#include "json.hpp"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
    const std::string cmd =
        std::string("\"") + VOLTERRA_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -2;
}

fs::path fresh_dir(const std::string& slug) {
    fs::path dir = fs::temp_directory_path() / ("volterra-cli-" + slug);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(static_cast<bool>(out));
    out << text;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(static_cast<bool>(in), "missing file: ", path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::istringstream in(line);
    std::string field;
    while (std::getline(in, field, ',')) fields.push_back(field);
    return fields;
}

// kernel (1-r)^{-1/4}, driver x(t)=t on [0,1]
const char* kFractionalLineConfig = R"({
  "kernel": {"family": "fractional", "gamma": 0.25},
  "driver": {"kind": "piecewise_linear", "times": [0.0, 1.0], "values": [0.0, 1.0], "dim": 1, "alpha": 1.0}
})";

nlohmann::json base_config() { return nlohmann::json::parse(kFractionalLineConfig); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("solve with a unit integrand reproduces the fractional primitive") {
    fs::path dir = fresh_dir("solve-unit");
    nlohmann::json cfg = base_config();
    cfg["grid"] = {{"level", 6}};
    cfg["tolerances"] = {{"picard", 1e-10}};
    cfg["solve"] = {{"f", {{"family", "constant"}, {"m", 1}, {"value", {1.0}}}},
                    {"y0", {0.7}},
                    {"T", 1.0}};
    write_file(dir / "cfg.json", cfg.dump());

    const int rc = run_cli("--config \"" + (dir / "cfg.json").string() + "\" --out \"" +
                           dir.string() + "\" --threads 1 solve");
    REQUIRE(rc == 0);

    const std::vector<std::string> lines = split_lines(read_file(dir / "solution.csv"));
    REQUIRE(lines.size() > 2);
    CHECK(lines[0] == "# volterra-rough 0.1.0");
    CHECK(lines[1] == "t,component,value");
    for (std::size_t i = 2; i < lines.size(); ++i) {
        const std::vector<std::string> fields = split_fields(lines[i]);
        REQUIRE(fields.size() == 3);
        const double t = std::stod(fields[0]);
        const double value = std::stod(fields[2]);
        CHECK(fields[1] == "0");
        const double expect = 0.7 + std::pow(t, 0.75) / 0.75;
        CHECK(std::abs(value - expect) <= 1e-8);
    }

    const nlohmann::json diag =
        nlohmann::json::parse(read_file(dir / "solve_diagnostics.json"));
    REQUIRE(diag.contains("steps"));
    REQUIRE(!diag["steps"].empty());
    for (const nlohmann::json& step : diag["steps"]) {
        CHECK(step["q_hat"].get<double>() < 1.0);
        CHECK(step["iters"].get<int>() >= 1);
    }
}

TEST_CASE("chen-check rows stay tiny for a flat kernel and linear driver") {
    fs::path dir = fresh_dir("chen-flat");
    nlohmann::json cfg = base_config();
    cfg["kernel"] = {{"family", "constant"}};
    cfg["grid"] = {{"level", 2}};
    write_file(dir / "cfg.json", cfg.dump());

    const int rc = run_cli("--config \"" + (dir / "cfg.json").string() + "\" --out \"" +
                           dir.string() + "\" --threads 1 chen-check");
    REQUIRE(rc == 0);

    const std::vector<std::string> lines = split_lines(read_file(dir / "chen_residuals.csv"));
    REQUIRE(lines.size() > 2);
    CHECK(lines[0] == "# volterra-rough 0.1.0");
    CHECK(lines[1] == "sigma,s,u,t,tau,residual");
    // 5 grid points, 10 ordered triples, 3 symbols each
    CHECK(lines.size() == 2 + 30);
    for (std::size_t i = 2; i < lines.size(); ++i) {
        const std::vector<std::string> fields = split_fields(lines[i]);
        REQUIRE(fields.size() == 6);
        CHECK((fields[0] == "cherry" || fields[0] == "chain3" || fields[0] == "vee"));
        CHECK(std::stod(fields[5]) <= 1e-9);
    }
}

TEST_CASE("regularity gate exits with the config code and names the constraint") {
    fs::path dir = fresh_dir("gate");
    nlohmann::json cfg = base_config();
    cfg["exponents"] = {{"alpha", 0.45}};
    write_file(dir / "cfg.json", cfg.dump());

    const int rc = run_cli("--config \"" + (dir / "cfg.json").string() + "\" --out \"" +
                           dir.string() + "\" integrate");
    CHECK(rc == 2);

    const nlohmann::json err = nlohmann::json::parse(read_file(dir / "error.json"));
    REQUIRE(err.contains("error"));
    CHECK(err["error"]["exit"].get<int>() == 2);
    CHECK(err["error"]["code"].get<std::string>() == "invalid_config");
    const std::string message = err["error"]["message"].get<std::string>();
    CHECK(message.find("alpha - gamma") != std::string::npos);
    CHECK(message.find("must exceed 1/4") != std::string::npos);
}

TEST_CASE("solve artifacts are byte-identical across reruns and thread counts") {
    fs::path dir = fresh_dir("determinism");
    nlohmann::json cfg = base_config();
    cfg["grid"] = {{"level", 5}};
    cfg["solve"] = {{"f", {{"family", "sine"}, {"m", 1}}}, {"y0", {0.5}}, {"T", 1.0}};
    write_file(dir / "cfg.json", cfg.dump());

    const std::string base =
        "--config \"" + (dir / "cfg.json").string() + "\" --out \"";
    REQUIRE(run_cli(base + (dir / "a").string() + "\" --threads 1 solve") == 0);
    REQUIRE(run_cli(base + (dir / "b").string() + "\" --threads 1 solve") == 0);
    REQUIRE(run_cli(base + (dir / "c").string() + "\" --threads 4 solve") == 0);

    const std::string a = read_file(dir / "a" / "solution.csv");
    CHECK(a == read_file(dir / "b" / "solution.csv"));
    CHECK(a == read_file(dir / "c" / "solution.csv"));
}

TEST_CASE("set overrides replace config entries") {
    fs::path dir = fresh_dir("set-override");
    nlohmann::json cfg = base_config();
    cfg["grid"] = {{"level", 4}};
    cfg["solve"] = {{"f", {{"family", "constant"}, {"m", 1}, {"value", {1.0}}}},
                    {"y0", {0.7}},
                    {"T", 1.0}};
    write_file(dir / "cfg.json", cfg.dump());

    const int rc = run_cli("--config \"" + (dir / "cfg.json").string() + "\" --out \"" +
                           dir.string() + "\" --set 'solve.y0=[0.25]' solve");
    REQUIRE(rc == 0);

    const std::vector<std::string> lines = split_lines(read_file(dir / "solution.csv"));
    REQUIRE(lines.size() > 2);
    const std::vector<std::string> first = split_fields(lines[2]);
    REQUIRE(first.size() == 3);
    CHECK(first[0] == "0");
    CHECK(first[2] == "0.25");
}

TEST_CASE("gnuplot flag writes a plot stub next to the csv") {
    fs::path dir = fresh_dir("gnuplot");
    nlohmann::json cfg = base_config();
    cfg["grid"] = {{"level", 4}};
    cfg["solve"] = {{"f", {{"family", "constant"}, {"m", 1}, {"value", {1.0}}}},
                    {"y0", {0.0}},
                    {"T", 1.0}};
    write_file(dir / "cfg.json", cfg.dump());

    const int rc = run_cli("--config \"" + (dir / "cfg.json").string() + "\" --out \"" +
                           dir.string() + "\" --gnuplot solve");
    REQUIRE(rc == 0);

    const std::vector<std::string> lines = split_lines(read_file(dir / "plot.gp"));
    REQUIRE(lines.size() >= 3);
    CHECK(lines[0] == "# volterra-rough 0.1.0");
    CHECK(lines[1].find("separator") != std::string::npos);
    CHECK(lines[2].find("solution.csv") != std::string::npos);
}

TEST_CASE("signature command emits parseable records with known values") {
    fs::path dir = fresh_dir("signature");
    nlohmann::json cfg = base_config();
    cfg["kernel"] = {{"family", "constant"}};
    cfg["signature"] = {{"s", 0.0}, {"t", 1.0}, {"tau", 1.0}};
    write_file(dir / "cfg.json", cfg.dump());

    const int rc = run_cli("--config \"" + (dir / "cfg.json").string() + "\" --out \"" +
                           dir.string() + "\" signature");
    REQUIRE(rc == 0);

    const nlohmann::json doc = nlohmann::json::parse(read_file(dir / "signature.json"));
    CHECK(doc["version"].get<std::string>() == "volterra-rough 0.1.0");
    REQUIRE(doc["records"].size() == 5);

    double dot = 0.0;
    double cherry = 0.0;
    double pair = 0.0;
    for (const nlohmann::json& rec : doc["records"]) {
        const std::string sigma = rec["sigma"].get<std::string>();
        REQUIRE(!rec["tensor"].empty());
        if (sigma == "dot") {
            CHECK(rec["shape"] == nlohmann::json::array({1}));
            dot = rec["tensor"][0].get<double>();
        } else if (sigma == "cherry") {
            CHECK(rec["shape"] == nlohmann::json::array({1, 1}));
            cherry = rec["tensor"][0].get<double>();
        } else if (sigma == "pair") {
            CHECK(rec["shape"] == nlohmann::json::array({1, 1}));
            pair = rec["tensor"][0].get<double>();
        }
    }
    CHECK(dot == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(cherry == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(pair == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("malformed input is rejected with the config exit code") {
    fs::path dir = fresh_dir("bad-config");
    write_file(dir / "broken.json", "{ this is not json");

    const int rc = run_cli("--config \"" + (dir / "broken.json").string() + "\" --out \"" +
                           dir.string() + "\" signature");
    CHECK(rc == 2);
    const nlohmann::json err = nlohmann::json::parse(read_file(dir / "error.json"));
    CHECK(err["error"]["code"].get<std::string>() == "invalid_config");

    // thread counts below one are config errors too
    fs::path dir2 = fresh_dir("bad-threads");
    nlohmann::json cfg = base_config();
    cfg["signature"] = {{"s", 0.0}, {"t", 1.0}, {"tau", 1.0}};
    write_file(dir2 / "cfg.json", cfg.dump());
    CHECK(run_cli("--config \"" + (dir2 / "cfg.json").string() + "\" --out \"" +
                  dir2.string() + "\" --threads 0 signature") == 2);
}

}  // TEST_SUITE
