/* Copyright (C) 2026 The hviro authors.
 * This program is Licensed under the Apache License, Version 2.0
 * (the "License"); you may not use this file except in compliance
 * with the License. You may obtain a copy of the License at
 *   http://www.apache.org/licenses/LICENSE-2.0
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License. See accompanying LICENSE file.
 */
// Drives the command-line front-end in process: exit codes, the insertion
// grammar, report formats, the cache flows, and the model listing.
#include <catch2/catch_amalgamated.hpp>

#include <hviro/cli.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace hviro;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr,
            std::string* err_text = nullptr) {
    std::ostringstream out, err;
    int code = cli_main(args, out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

fs::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    fs::path p = fs::temp_directory_path() /
                 ("hviro-cli-" + tag + "-" + std::to_string(::getpid()) + "-" +
                  std::to_string(counter++));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string strip_wall(const std::string& text) {
    std::string out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (line.find("wall") == std::string::npos) out += line + "\n";
    return out;
}

const std::string demo_model_text =
    "# two-class target\n"
    "name = demo\n"
    "dimension = 1\n"
    "rank = 2\n"
    "degrees = 0 1\n"
    "eta = 0/1 1/1 ; 1/1 0/1\n"
    "chern = 0 2 ; 0 0\n"
    "euler = 2\n"
    "cd_integral = 2\n"
    "c1cd1_integral = 2\n"
    "novikov = 2\n";

}  // namespace

TEST_CASE("single correlator queries print exact values", "[cli]") {
    std::string out, err;

    CHECK(run_cli({"correlator", "--model", "point", "--genus", "2", "--insertions", "tau4"},
                  &out, &err) == 0);
    CHECK(out == "1/1152\n");
    CHECK(err.empty());

    CHECK(run_cli({"correlator", "--model", "point", "--insertions", "tau0,tau0,tau0"}, &out) ==
          0);
    CHECK(out == "1\n");

    CHECK(run_cli({"correlator", "--model", "point", "--genus", "1", "--insertions", "tau1"},
                  &out) == 0);
    CHECK(out == "1/24\n");

    // A Hodge factor rides along with the descendants.
    CHECK(run_cli({"correlator", "--model", "point", "--genus", "1", "--insertions", "tau0",
                   "--hodge", "ch1"},
                  &out) == 0);
    CHECK(out == "1/24\n");

    // Degree-graded target; both basis classes spelled out.
    CHECK(run_cli({"correlator", "--model", "p1", "--degree", "1", "--insertions",
                   "tau0(w),tau0(w)"},
                  &out) == 0);
    CHECK(out == "1\n");
    CHECK(run_cli({"correlator", "--model", "p1", "--degree", "2", "--insertions",
                   "tau1(w),tau1(w)"},
                  &out) == 0);
    CHECK(out == "1/2\n");

    SECTION("json object carries the query and the value") {
        CHECK(run_cli({"--json", "correlator", "--model", "point", "--genus", "2",
                       "--insertions", "tau4"},
                      &out) == 0);
        CHECK(out.find("\"model\": \"point\"") != std::string::npos);
        CHECK(out.find("\"genus\": 2") != std::string::npos);
        CHECK(out.find("\"value\": \"1/1152\"") != std::string::npos);
    }
}

TEST_CASE("the insertion grammar is strict about targets and parity", "[cli]") {
    std::string out, err;

    // Class argument on a single-class target.
    CHECK(run_cli({"correlator", "--model", "point", "--insertions", "tau2(w)"}, &out, &err) ==
          2);
    CHECK(err.find("single class") != std::string::npos);

    // Missing class argument on a two-class target.
    CHECK(run_cli({"correlator", "--model", "p1", "--degree", "1", "--insertions", "tau1"}, &out,
                  &err) == 2);
    CHECK(err.find("pick a class") != std::string::npos);

    // Unknown class name.
    CHECK(run_cli({"correlator", "--model", "p1", "--degree", "1", "--insertions", "tau1(x)"},
                  &out, &err) == 2);

    // Not a tau symbol at all.
    CHECK(run_cli({"correlator", "--model", "point", "--insertions", "sigma3"}, &out, &err) == 2);
    CHECK(err.find("bad insertion") != std::string::npos);

    // Even Hodge characters vanish identically and are rejected as input.
    CHECK(run_cli({"correlator", "--model", "point", "--genus", "1", "--insertions", "tau0",
                   "--hodge", "ch2"},
                  &out, &err) == 2);
    CHECK(err.find("odd") != std::string::npos);
    CHECK(run_cli({"correlator", "--model", "point", "--genus", "1", "--insertions", "tau0",
                   "--hodge", "lambda1"},
                  &out, &err) == 2);

    // Unknown model name is a usage error from the option validator.
    CHECK(run_cli({"correlator", "--model", "torus", "--insertions", "tau4"}, &out, &err) == 2);
    CHECK(!err.empty());

    // The model option is required.
    CHECK(run_cli({"correlator", "--insertions", "tau4"}, &out, &err) == 2);

    // A degree on a target without the grading is a configuration error.
    CHECK(run_cli({"correlator", "--model", "point", "--degree", "1", "--insertions", "tau4"},
                  &out, &err) == 2);
    CHECK(err.find("error:") != std::string::npos);
}

TEST_CASE("named checks dispatch with pass, fail, and usage exits", "[cli]") {
    std::string out, err;

    CHECK(run_cli({"check", "fp", "--model", "point", "--l", "1", "--t-deg", "2"}, &out, &err) ==
          0);
    CHECK(out.find("check         fp") != std::string::npos);
    CHECK(out.find("status        PASS") != std::string::npos);

    CHECK(run_cli({"check", "bracket", "--model", "p1", "--n", "5", "--m", "5"}, &out) == 0);
    CHECK(out.find("status        PASS") != std::string::npos);

    // A failing check still emits its report, with exit 1.
    CHECK(run_cli({"check", "genus0", "--point-seed-three", "2", "--n=-1"}, &out, &err) == 1);
    CHECK(out.find("status        FAIL") != std::string::npos);
    CHECK(out.find("residue") != std::string::npos);

    // Unknown identifier, inapplicable parameter, malformed value, unknown
    // flag: all usage errors.
    CHECK(run_cli({"check", "nonsense"}, &out, &err) == 2);
    CHECK(err.find("nonsense") != std::string::npos);
    CHECK(run_cli({"check", "oracle", "--l", "2"}, &out, &err) == 2);
    CHECK(run_cli({"check", "fp", "--l", "abc"}, &out, &err) == 2);
    CHECK(run_cli({"check", "fp", "--bogus", "3"}, &out, &err) == 2);
    CHECK(run_cli({"check"}, &out, &err) == 2);

    SECTION("json report formatting") {
        CHECK(run_cli({"--json", "check", "fp", "--model", "point", "--l", "1"}, &out) == 0);
        CHECK(out.find("\"check\": \"fp\"") != std::string::npos);
        CHECK(out.find("\"pass\": true") != std::string::npos);
    }

    SECTION("reports are deterministic aside from the wall-time field") {
        std::string a, b;
        REQUIRE(run_cli({"check", "quantize", "--model", "point"}, &a) == 0);
        REQUIRE(run_cli({"check", "quantize", "--model", "point"}, &b) == 0);
        CHECK(strip_wall(a) == strip_wall(b));
        std::string ja, jb;
        REQUIRE(run_cli({"--json", "check", "quantize", "--model", "point"}, &ja) == 0);
        REQUIRE(run_cli({"--json", "check", "quantize", "--model", "point"}, &jb) == 0);
        CHECK(strip_wall(ja) == strip_wall(jb));
    }
}

TEST_CASE("model listing covers builtins and external files", "[cli]") {
    std::string out, err;

    CHECK(run_cli({"models"}, &out, &err) == 0);
    CHECK(out.find("point") == 0);
    CHECK(out.find("\np1") != std::string::npos);
    CHECK(out.find("novikov 2") != std::string::npos);

    CHECK(run_cli({"--json", "models"}, &out) == 0);
    CHECK(out.find("\"name\": \"point\"") != std::string::npos);
    CHECK(out.find("\"novikov\": null") != std::string::npos);
    CHECK(out.find("\"novikov\": \"2\"") != std::string::npos);

    SECTION("a valid model file is described") {
        fs::path dir = fresh_dir("models");
        fs::path file = dir / "demo.model";
        std::ofstream(file) << demo_model_text;
        CHECK(run_cli({"models", "--file", file.string()}, &out, &err) == 0);
        CHECK(out.find("demo") == 0);
        CHECK(out.find("rank 2") != std::string::npos);
        fs::remove_all(dir);
    }

    SECTION("an invalid model file is rejected with its line number") {
        fs::path dir = fresh_dir("models-bad");
        fs::path file = dir / "bad.model";
        std::ofstream(file) << "name = bad\nname = again\n";
        CHECK(run_cli({"models", "--file", file.string()}, &out, &err) == 2);
        CHECK(err.find("line 2") != std::string::npos);
        CHECK(run_cli({"models", "--file", (dir / "missing.model").string()}, &out, &err) == 2);
        CHECK(err.find("cannot open") != std::string::npos);
        fs::remove_all(dir);
    }
}

TEST_CASE("caches flow between the cache directory and export files", "[cli]") {
    std::string out, err;
    fs::path warm = fresh_dir("cache-warm");
    fs::path file_dir = fresh_dir("cache-file");
    fs::path cold = fresh_dir("cache-cold");
    fs::path payload = file_dir / "point.cache";

    // A query with a cache directory set leaves one cache file behind.
    CHECK(run_cli({"--cache-dir", warm.string(), "correlator", "--model", "point", "--genus",
                   "2", "--insertions", "tau4"},
                  &out) == 0);
    CHECK(out == "1/1152\n");
    int cache_files = 0;
    for (auto& entry : fs::directory_iterator(warm))
        if (entry.path().extension() == ".cache") ++cache_files;
    CHECK(cache_files == 1);

    // Export it, install it into a cold directory, and query from there.
    CHECK(run_cli({"--cache-dir", warm.string(), "cache", "export", "--model", "point", "--path",
                   payload.string()},
                  &out, &err) == 0);
    CHECK(out.find("cached") == 0);
    CHECK(fs::exists(payload));

    CHECK(run_cli({"--cache-dir", cold.string(), "cache", "import", "--model", "point", "--path",
                   payload.string()},
                  &out, &err) == 0);
    int cold_files = 0;
    for (auto& entry : fs::directory_iterator(cold))
        if (entry.path().extension() == ".cache") ++cold_files;
    CHECK(cold_files == 1);
    CHECK(run_cli({"--cache-dir", cold.string(), "correlator", "--model", "point", "--genus",
                   "2", "--insertions", "tau4"},
                  &out) == 0);
    CHECK(out == "1/1152\n");

    SECTION("the environment variable stands in for the flag") {
        fs::path env_dir = fresh_dir("cache-env");
        ::setenv("HVIRO_CACHE_DIR", env_dir.string().c_str(), 1);
        CHECK(run_cli({"correlator", "--model", "point", "--genus", "1", "--insertions", "tau1"},
                      &out) == 0);
        ::unsetenv("HVIRO_CACHE_DIR");
        int env_files = 0;
        for (auto& entry : fs::directory_iterator(env_dir))
            if (entry.path().extension() == ".cache") ++env_files;
        CHECK(env_files == 1);
        fs::remove_all(env_dir);
    }

    SECTION("cache files are keyed by the full engine signature") {
        // The file name is the content hash, which covers the oracle seeds:
        // a perturbed engine resolves to a different file and can never
        // poison the stock cache.
        CorrelatorEngine stock(builtin_model("point"), 2);
        CHECK(fs::exists(warm / (stock.content_hash() + ".cache")));
        CorrelatorEngine bent(builtin_model("point"), 2);
        bent.point_seed_three = Rat(2);
        CHECK(bent.content_hash() != stock.content_hash());
        CHECK(!fs::exists(warm / (bent.content_hash() + ".cache")));
    }

    SECTION("mismatched or missing cache material is a configuration error") {
        fs::path empty = fresh_dir("cache-empty");
        CHECK(run_cli({"--cache-dir", empty.string(), "cache", "export", "--model", "point",
                       "--path", payload.string()},
                      &out, &err) == 2);
        CHECK(err.find("no cache entry") != std::string::npos);

        // A p1 payload cannot be imported as a point cache.
        fs::path p1_payload = file_dir / "p1.cache";
        CHECK(run_cli({"--cache-dir", warm.string(), "correlator", "--model", "p1", "--degree",
                       "1", "--insertions", "tau0(w),tau0(w)"},
                      &out) == 0);
        CHECK(run_cli({"--cache-dir", warm.string(), "cache", "export", "--model", "p1",
                       "--path", p1_payload.string()},
                      &out) == 0);
        CHECK(run_cli({"--cache-dir", cold.string(), "cache", "import", "--model", "point",
                       "--path", p1_payload.string()},
                      &out, &err) == 2);
        CHECK(err.find("does not match") != std::string::npos);

        // Without a cache directory there is nothing to export into or from.
        CHECK(run_cli({"cache", "export", "--model", "point", "--path", payload.string()}, &out,
                      &err) == 2);
        CHECK(err.find("cache") != std::string::npos);
        fs::remove_all(empty);
    }

    fs::remove_all(warm);
    fs::remove_all(file_dir);
    fs::remove_all(cold);
}

TEST_CASE("top-level usage and the battery scaffolding", "[cli]") {
    std::string out, err;

    CHECK(run_cli({"--help"}, &out, &err) == 0);
    CHECK(out.find("hviro") != std::string::npos);

    CHECK(run_cli({}, &out, &err) == 2);
    CHECK(run_cli({"definitely-not-a-command"}, &out, &err) == 2);
    CHECK(run_cli({"suite"}, &out, &err) == 2);
    CHECK(run_cli({"suite", "bogus"}, &out, &err) == 2);
    CHECK(run_cli({"cache"}, &out, &err) == 2);

    SECTION("criterion labels are stable and the first criterion runs") {
        REQUIRE(criterion_labels().size() == 11);
        CHECK(criterion_labels().front() == "oracle-closed-forms");
        CHECK(criterion_labels().back() == "seed-perturbation-control");

        CriterionOutcome one = run_criterion(1);
        CHECK(one.pass);
        CHECK(one.reports.size() == 1);
        std::string line = criterion_to_line(one);
        CHECK(line.find("[ 1] oracle-closed-forms") == 0);
        CHECK(line.find("PASS") != std::string::npos);
        CHECK(line.find("coefficients 16") != std::string::npos);

        CHECK_THROWS_AS(run_criterion(12), std::invalid_argument);
        CHECK_THROWS_AS(run_criterion(0), std::invalid_argument);
    }
}
