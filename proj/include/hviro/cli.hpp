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
// Batch front-end: model listing, single-correlator queries, named checks,
// the full release battery, and cache import/export.  `cli_main` takes the
// argument list without the program name and writes to caller-supplied
// streams, so tests can drive it in-process.
#ifndef HVIRO_CLI_HPP
#define HVIRO_CLI_HPP

#include <hviro/suite.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace hviro {

namespace cli_detail {

// Insertion grammar: `tau<k>` on a rank-one target, `tau<k>(1)` / `tau<k>(w)`
// on a rank-two one, comma separated.  The second basis class is always
// written `w`.
inline std::vector<std::pair<int, int>> parse_insertions(const std::string& text,
                                                         const TargetModel& model) {
    std::vector<std::pair<int, int>> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        while (!tok.empty() && tok.front() == ' ') tok.erase(tok.begin());
        while (!tok.empty() && tok.back() == ' ') tok.pop_back();
        if (tok.empty()) continue;
        auto bad = [&] {
            return std::invalid_argument(
                "bad insertion '" + tok + "': expected tau<k>" +
                (model.basis_size > 1 ? " with a class, tau<k>(1) or tau<k>(w)" : "") +
                ", e.g. " + (model.basis_size > 1 ? "tau2(w)" : "tau4"));
        };
        if (tok.rfind("tau", 0) != 0) throw bad();
        std::size_t i = 3, start = i;
        while (i < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i]))) ++i;
        if (i == start) throw bad();
        int level = std::stoi(tok.substr(start, i - start));
        int alpha = 0;
        if (i < tok.size()) {
            if (model.basis_size == 1)
                throw std::invalid_argument("bad insertion '" + tok +
                                            "': this target has a single class, write tau<k>");
            if (tok.substr(i) == "(1)")
                alpha = 0;
            else if (tok.substr(i) == "(w)")
                alpha = 1;
            else
                throw bad();
        } else if (model.basis_size > 1) {
            throw std::invalid_argument("bad insertion '" + tok +
                                        "': pick a class, tau" + tok.substr(3) + "(1) or tau" +
                                        tok.substr(3) + "(w)");
        }
        out.push_back({level, alpha});
    }
    return out;
}

// Hodge grammar: `ch<j>` with odd j, comma separated; the even characters
// vanish identically, so asking for one is an input error.
inline std::vector<int> parse_hodge(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        while (!tok.empty() && tok.front() == ' ') tok.erase(tok.begin());
        while (!tok.empty() && tok.back() == ' ') tok.pop_back();
        if (tok.empty()) continue;
        auto bad = [&] {
            return std::invalid_argument("bad Hodge factor '" + tok +
                                         "': expected ch<j> with odd j, e.g. ch1 or ch3");
        };
        if (tok.rfind("ch", 0) != 0) throw bad();
        std::size_t i = 2, start = i;
        while (i < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i]))) ++i;
        if (i == start || i != tok.size()) throw bad();
        int j = std::stoi(tok.substr(start));
        if (j < 1 || j % 2 == 0)
            throw std::invalid_argument("bad Hodge factor '" + tok +
                                        "': the even characters vanish; use odd indices");
        out.push_back(j);
    }
    return out;
}

inline std::string cache_path(const std::string& dir, const CorrelatorEngine& eng) {
    return (std::filesystem::path(dir) / (eng.content_hash() + ".cache")).string();
}

inline bool load_cache_if_present(const std::string& dir, CorrelatorEngine& eng) {
    if (dir.empty()) return false;
    std::ifstream in(cache_path(dir, eng));
    if (!in) return false;
    return eng.store.load(in, eng.content_hash());
}

inline void save_cache(const std::string& dir, CorrelatorEngine& eng) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    std::ofstream out(cache_path(dir, eng));
    if (!out) throw std::runtime_error("cannot write cache file in '" + dir + "'");
    eng.store.save(out, eng.content_hash());
}

inline std::string model_line(const TargetModel& m) {
    std::ostringstream o;
    o << m.name;
    for (std::size_t i = m.name.size(); i < 8; ++i) o << ' ';
    o << "rank " << m.basis_size << "  dimension " << m.dim << "  degrees ";
    for (std::size_t i = 0; i < m.hol_deg.size(); ++i) o << (i ? "," : "") << m.hol_deg[i];
    o << "  euler " << rat_to_string(m.euler);
    if (m.has_novikov) o << "  novikov " << rat_to_string(m.novikov_c1_pairing);
    return o.str();
}

inline std::string model_json(const TargetModel& m) {
    std::ostringstream o;
    o << "{\"name\": \"" << detail::json_escape(m.name) << "\", \"rank\": " << m.basis_size
      << ", \"dimension\": " << m.dim << ", \"degrees\": [";
    for (std::size_t i = 0; i < m.hol_deg.size(); ++i) o << (i ? ", " : "") << m.hol_deg[i];
    o << "], \"euler\": \"" << rat_to_string(m.euler) << "\", \"novikov\": ";
    if (m.has_novikov)
        o << "\"" << rat_to_string(m.novikov_c1_pairing) << "\"";
    else
        o << "null";
    o << "}";
    return o.str();
}

}  // namespace cli_detail

// Parses and dispatches one command line (program name excluded).  Returns
// 0 when every executed check passed, 1 when a check ran and failed (the
// report is still emitted), 2 on usage or configuration errors.
inline int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"exact Virasoro-type constraint checks for descendant integrals"};
    app.name("hviro");
    app.require_subcommand(1);
    bool json = false;
    app.add_flag("--json", json, "emit structured JSON instead of tables");
    std::string cache_dir;
    app.add_option("--cache-dir", cache_dir,
                   "directory holding correlator caches, one file per model+seed signature")
        ->envname("HVIRO_CACHE_DIR");

    CLI::App* models = app.add_subcommand("models", "list built-in target models");
    std::string model_file;
    models->add_option("--file", model_file, "validate and describe a model file instead");

    CLI::App* corr = app.add_subcommand("correlator", "evaluate a single correlator");
    std::string c_model;
    int c_genus = 0, c_degree = 0, c_qmax = 2;
    std::string c_ins, c_hodge;
    corr->add_option("--model", c_model, "built-in target: point or p1")
        ->required()
        ->check(CLI::IsMember({"point", "p1"}));
    corr->add_option("--genus", c_genus, "domain genus (default 0)");
    corr->add_option("--degree", c_degree, "curve degree; only for targets with a degree grading");
    corr->add_option("--insertions", c_ins, "comma-separated tau<k> (point) or tau<k>(1)|tau<k>(w) (p1)");
    corr->add_option("--hodge", c_hodge, "comma-separated ch<j> factors, odd j only");
    corr->add_option("--q-max", c_qmax, "degree cap for the evaluation (default 2)");

    CLI::App* check = app.add_subcommand("check", "run one named verification check");
    std::string check_id;
    check->add_option("id", check_id, "check identifier; see README for the list")->required();
    static const std::vector<std::pair<std::string, std::string>> check_flags = {
        {"--model", "model"},
        {"--n", "n"},
        {"--m", "m"},
        {"--l", "l"},
        {"--g", "g"},
        {"--k1", "k1"},
        {"--k-max", "k_max"},
        {"--n-max", "n_max"},
        {"--t-deg", "t_deg"},
        {"--level", "level"},
        {"--s-cap", "s_cap"},
        {"--q-max", "q_max"},
        {"--genus-max", "genus_max"},
        {"--profile", "profile"},
        {"--point-seed-three", "point_seed_three"},
        {"--point-seed-torus", "point_seed_torus"},
        {"--p1-seed", "p1_seed"},
    };
    std::map<std::string, std::string> check_values;
    std::vector<std::pair<std::string, CLI::Option*>> check_opts;
    for (const auto& [flag, key] : check_flags) {
        check_values[key];
        check_opts.emplace_back(
            key, check->add_option(flag, check_values[key], "forwarded to the check"));
    }

    CLI::App* suite = app.add_subcommand("suite", "run a named battery of checks");
    suite->require_subcommand(1);
    CLI::App* suite_full =
        suite->add_subcommand("full", "every release criterion, in declared order");

    CLI::App* cache = app.add_subcommand("cache", "move correlator caches in and out");
    cache->require_subcommand(1);
    std::string cx_model, cx_path;
    int cx_qmax = 2;
    CLI::App* cache_export =
        cache->add_subcommand("export", "copy a model's cache-directory entry to a file");
    CLI::App* cache_import =
        cache->add_subcommand("import", "install a cache file into the cache directory");
    for (CLI::App* sub : {cache_export, cache_import}) {
        sub->add_option("--model", cx_model, "built-in target: point or p1")
            ->required()
            ->check(CLI::IsMember({"point", "p1"}));
        sub->add_option("--path", cx_path, "cache file to write (export) or read (import)")
            ->required();
        sub->add_option("--q-max", cx_qmax, "degree cap of the engine (default 2)");
    }

    {
        std::vector<const char*> argv;
        argv.reserve(args.size() + 1);
        argv.push_back("hviro");
        for (const auto& a : args) argv.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::ParseError& e) {
            int code = app.exit(e, out, err);
            return code == 0 ? 0 : 2;
        }
    }

    try {
        if (models->parsed()) {
            std::vector<TargetModel> list;
            if (models->count("--file")) {
                list.push_back(load_model_file(model_file));
            } else {
                list.push_back(builtin_model("point"));
                list.push_back(builtin_model("p1"));
            }
            if (json) {
                out << "{\n  \"models\": [";
                for (std::size_t i = 0; i < list.size(); ++i)
                    out << (i ? "," : "") << "\n    " << cli_detail::model_json(list[i]);
                out << "\n  ]\n}\n";
            } else {
                for (const auto& m : list) out << cli_detail::model_line(m) << "\n";
            }
            return 0;
        }

        if (corr->parsed()) {
            CorrelatorEngine eng(builtin_model(c_model), c_qmax);
            CorrelatorKey key;
            key.g = c_genus;
            key.degree = c_degree;
            key.insertions = cli_detail::parse_insertions(c_ins, eng.model);
            key.hodge = cli_detail::parse_hodge(c_hodge);
            cli_detail::load_cache_if_present(cache_dir, eng);
            Rat value = eng.correlator(key);
            cli_detail::save_cache(cache_dir, eng);
            if (json) {
                out << "{\n  \"model\": \"" << detail::json_escape(c_model)
                    << "\",\n  \"genus\": " << c_genus << ",\n  \"degree\": " << c_degree
                    << ",\n  \"insertions\": \"" << detail::json_escape(c_ins)
                    << "\",\n  \"hodge\": \"" << detail::json_escape(c_hodge)
                    << "\",\n  \"value\": \"" << rat_to_string(value) << "\"\n}\n";
            } else {
                out << rat_to_string(value) << "\n";
            }
            return 0;
        }

        if (check->parsed()) {
            std::map<std::string, std::string> params;
            for (const auto& [key, opt] : check_opts)
                if (opt->count()) params[key] = check_values[key];
            Report rep = run_check(check_id, params);
            out << (json ? report_to_json(rep) : report_to_table(rep));
            return rep.pass() ? 0 : 1;
        }

        if (suite->parsed() && suite_full->parsed()) {
            std::vector<CriterionOutcome> all;
            if (json) {
                all = run_acceptance();
                out << suite_to_json(all);
            } else {
                all = run_acceptance([&](const CriterionOutcome& c) {
                    out << criterion_to_block(c);
                    out.flush();
                });
                out << suite_summary_line(all);
            }
            for (const auto& c : all)
                if (!c.pass) return 1;
            return 0;
        }

        if (cache->parsed()) {
            if (cache_dir.empty())
                throw std::runtime_error(
                    "cache commands need --cache-dir or HVIRO_CACHE_DIR to locate the cache "
                    "directory");
            CorrelatorEngine eng(builtin_model(cx_model), cx_qmax);
            const std::string hash = eng.content_hash();
            long long entries = 0;
            std::string src, dst;
            if (cache_export->parsed()) {
                src = cli_detail::cache_path(cache_dir, eng);
                dst = cx_path;
                std::ifstream in(src);
                if (!in)
                    throw std::runtime_error("no cache entry for model '" + cx_model + "' at " +
                                             src);
                if (!eng.store.load(in, hash))
                    throw std::runtime_error("cache entry at " + src +
                                             " does not match this model's signature");
                std::ofstream fout(dst);
                if (!fout) throw std::runtime_error("cannot write '" + dst + "'");
                eng.store.save(fout, hash);
                entries = static_cast<long long>(eng.store.size());
            } else {
                src = cx_path;
                dst = cli_detail::cache_path(cache_dir, eng);
                std::ifstream in(src);
                if (!in) throw std::runtime_error("cannot open cache file '" + src + "'");
                if (!eng.store.load(in, hash))
                    throw std::runtime_error("cache file '" + src +
                                             "' does not match this model's signature");
                entries = static_cast<long long>(eng.store.size());
                cli_detail::save_cache(cache_dir, eng);
            }
            if (json) {
                out << "{\n  \"model\": \"" << detail::json_escape(cx_model)
                    << "\",\n  \"signature\": \"" << hash << "\",\n  \"entries\": " << entries
                    << ",\n  \"from\": \"" << detail::json_escape(src) << "\",\n  \"to\": \""
                    << detail::json_escape(dst) << "\"\n}\n";
            } else {
                out << "cached " << entries << " values for model " << cx_model << " (signature "
                    << hash << ")\n  from " << src << "\n  to   " << dst << "\n";
            }
            return 0;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    err << "error: no command dispatched\n";
    return 2;
}

}  // namespace hviro

#endif  // HVIRO_CLI_HPP
