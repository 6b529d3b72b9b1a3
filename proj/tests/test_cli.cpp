#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using ncenter::cli::run;

namespace {

const fs::path configs = NCENTER_CONFIG_DIR;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "ncenter_cli_test" / name;
    fs::remove_all(p);
    return p;
}

int invoke(std::vector<std::string> args, std::string* out_text = nullptr) {
    args.insert(args.begin(), "ncenter");
    std::ostringstream out, err;
    const int code = run(args, out, err);
    if (out_text) *out_text = out.str();
    return code;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path dir = fs::temp_directory_path() / "ncenter_cli_test";
    fs::create_directories(dir);
    std::ofstream(dir / name) << text;
    return dir / name;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("solve is reproducible for a fixed config and seed") {
    const auto a = scratch("solve_a"), b = scratch("solve_b");
    const std::string cfg = (configs / "two_center_demo.json").string();
    REQUIRE(invoke({"solve", "--config", cfg, "--out", a.string()}) == 0);
    REQUIRE(invoke({"solve", "--config", cfg, "--out", b.string()}) == 0);
    for (const char* f : {"loop.csv", "outcome.json", "trajectory.svg", "manifest.json"}) {
        INFO(f);
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK(!slurp(a / f).empty());
    }
    const auto outcome = read_json(a / "outcome.json");
    CHECK(outcome["status"] == "CollisionFreeSolution");
    CHECK(outcome["word_preserved"] == true);
    CHECK(outcome["winding"] == nlohmann::json::array({1, 1}));
    CHECK(slurp(a / "loop.csv").rfind("t,x,y,vx,vy\n", 0) == 0);

    // The seed reaches the restarts; the manifest records it.
    const auto c = scratch("solve_c");
    REQUIRE(invoke({"solve", "--config", cfg, "--out", c.string(), "--seed", "99"}) == 0);
    const auto manifest = read_json(c / "manifest.json");
    CHECK(manifest["seed"] == 99);
    CHECK(read_json(c / "outcome.json")["runs"] != outcome["runs"]);
    CHECK(manifest["files"].size() == 3);
}

TEST_CASE("usage and config errors exit with 2") {
    const auto out = scratch("errors").string();
    CHECK(invoke({"solve", "--config", (configs / "trivial_word.json").string(), "--out", out}) == 2);
    CHECK(invoke({"solve", "--config", write_config("bad_token.json", R"({"centers": [[1, 0, 0]], "word": "b1"})").string(),
                   "--out", out}) == 2);
    CHECK(invoke({"solve", "--config", write_config("bad_index.json", R"({"centers": [[1, 0, 0]], "word": "a2"})").string(),
                   "--out", out}) == 2);
    CHECK(invoke({"solve", "--config", write_config("no_centers.json", R"({"word": "a1"})").string(), "--out", out}) == 2);
    CHECK(invoke({"solve", "--config", write_config("bad_json.json", "{ centers").string(), "--out", out}) == 2);
    CHECK(invoke({"solve", "--config", write_config("bad_alpha.json", R"({"centers": [[1, 0, 0]], "alpha": 2.5, "word": "a1"})").string(),
                   "--out", out}) == 2);
    CHECK(invoke({"solve", "--config", "/nonexistent/config.json"}) == 2);
    CHECK(invoke({"solve"}) == 2);
    CHECK(invoke({"frobnicate", "--config", "x"}) == 2);
    CHECK(invoke({}) == 2);
}

TEST_CASE("admissibility verdicts") {
    const auto out = scratch("admissible").string();
    std::string text;
    auto with_word = [&](const char* w) {
        return write_config("adm.json", std::string(R"({"centers": [[1, -0.5, 0], [1, 0.5, 0]], "alpha": 1.5, "word": ")") + w +
                                            "\"}")
            .string();
    };
    CHECK(invoke({"admissible", "--config", with_word("a1 a2"), "--out", out}, &text) == 0);
    CHECK(text.rfind("admissible\n", 0) == 0);
    CHECK(read_json(fs::path(out) / "outcome.json")["witness"].is_null());

    CHECK(invoke({"admissible", "--config", with_word("a1"), "--out", out}, &text) == 0);
    CHECK(text.rfind("inadmissible\n", 0) == 0);
    CHECK(text.find("witness:") != std::string::npos);
    CHECK(read_json(fs::path(out) / "outcome.json")["witness"]["enclosed_centers"] == nlohmann::json::array({1}));

    CHECK(invoke({"admissible", "--config", (configs / "figure_eight.json").string(), "--out", out}, &text) == 0);
    CHECK(text.rfind("inadmissible\n", 0) == 0);
    CHECK(text.find("reduced word: a1 A2") != std::string::npos);
}

TEST_CASE("obstacle sweep table and its tolerance gate") {
    const auto out = scratch("sweep");
    REQUIRE(invoke({"obstacle-sweep", "--config", (configs / "obstacle_sweep.json").string(), "--out", out.string()}) == 0);
    std::istringstream csv(slurp(out / "sweep.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "alpha,rho_over_rstar,sweep_closed,sweep_numeric,abs_err");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 80);
    CHECK(read_json(out / "manifest.json")["summary"]["max_abs_err"].get<double>() < 1e-8);

    const auto strict = write_config("strict.json", R"({"obstacle_sweep": {"alphas": [1.5], "ratios": [0.3, 0.6], "tolerance": 1e-300}})");
    const auto exact = invoke({"obstacle-sweep", "--config", strict.string(), "--out", out.string()});
    const double worst = read_json(out / "manifest.json")["summary"]["max_abs_err"].get<double>();
    CHECK(exact == (worst > 1e-300 ? 1 : 0));
    CHECK(read_json(out / "manifest.json")["exit_code"] == exact);
    CHECK(invoke({"obstacle-sweep", "--config", write_config("grid.json", R"({"obstacle_sweep": {"ratios": [1.5]}})").string(),
                   "--out", out.string()}) == 2);
    CHECK(invoke({"obstacle-sweep", "--config", write_config("grid2.json", R"({"obstacle_sweep": {"alphas": [2.0]}})").string(),
                   "--out", out.string()}) == 2);
}

TEST_CASE("blow-up of the ejection itself has zero distances") {
    const auto out = scratch("blowup");
    const auto cfg = write_config("blow.json", R"({"centers": [[1.3, 0.2, -0.1]], "alpha": 1.5,
        "blowup": {"source": "parabolic", "theta_minus": 0.4, "theta_plus": 2.9, "T": 1.0, "samples": 200}})");
    REQUIRE(invoke({"blowup", "--config", cfg.string(), "--out", out.string()}) == 0);
    std::istringstream csv(slurp(out / "blowup.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "lambda,sup_distance,velocity_sup_distance");
    while (std::getline(csv, line)) {
        double lambda, d, dv;
        char c1, c2;
        std::istringstream(line) >> lambda >> c1 >> d >> c2 >> dv;
        CHECK(d < 1e-12);
    }
    const auto m = read_json(out / "manifest.json")["summary"]["rescaling"];
    CHECK(m["matches_derived"] == true);
    CHECK(m["matches_stated"] == false);

    const auto two = scratch("blowup_two");
    CHECK(invoke({"blowup", "--config", (configs / "blowup.json").string(), "--out", two.string()}) == 0);
    CHECK(read_json(two / "manifest.json")["summary"]["converging"] == true);
}

TEST_CASE("asymptotics subcommand") {
    const auto out = scratch("asym");
    REQUIRE(invoke({"asymptotics", "--config", (configs / "asymptotics.json").string(), "--out", out.string()}) == 0);
    CHECK(slurp(out / "fits.csv").rfind("quantity,expected,fitted,r_squared,window_lo,window_hi\n", 0) == 0);
    for (const auto& f : read_json(out / "manifest.json")["summary"]["fits"]) CHECK(f["within_tolerance"] == true);
    CHECK(invoke({"asymptotics", "--config", (configs / "asymptotics_two_center.json").string(), "--out", out.string()}) == 0);
    const auto narrow = write_config("narrow.json", R"({"centers": [[1, 0, 0]], "alpha": 1.0,
        "asymptotics": {"t_lo": 1e-3, "t_hi": 1e-2}})");
    CHECK(invoke({"asymptotics", "--config", narrow.string(), "--out", out.string()}) == 1);
}

TEST_CASE("kepler comparison reports the improvement margin") {
    const auto out = scratch("kepler");
    REQUIRE(invoke({"kepler-compare", "--config", (configs / "kepler_compare.json").string(), "--out", out.string()}) == 0);
    const auto s = read_json(out / "manifest.json")["summary"];
    CHECK(s["margin"].get<double>() > 1e-3 * s["ejection_action"].get<double>());
    CHECK(slurp(out / "arc.csv").rfind("t,x,y,vx,vy\n", 0) == 0);
    CHECK(slurp(out / "trajectory.svg").rfind("<svg", 0) == 0);
}

TEST_CASE("timestamp comes from SOURCE_DATE_EPOCH") {
    const auto out = scratch("stamp");
    setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
    REQUIRE(invoke({"obstacle-sweep", "--config", (configs / "obstacle_sweep.json").string(), "--out", out.string()}) == 0);
    unsetenv("SOURCE_DATE_EPOCH");
    CHECK(read_json(out / "manifest.json")["timestamp"] == "2023-11-14T22:13:20Z");
}
