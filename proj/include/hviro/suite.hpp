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
// The release gate: a fixed, ordered battery of verification criteria, each
// aggregating named checks at pinned parameter ranges.  The command-line
// front-end ("suite full") and the standalone gate binary both run this.
#ifndef HVIRO_SUITE_HPP
#define HVIRO_SUITE_HPP

#include <hviro/constraints.hpp>

#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace hviro {

struct CriterionOutcome {
    int number = 0;
    std::string label;
    bool pass = true;
    double wall_ms = 0.0;
    long long checks_run = 0;             // checks executed, including probes
    long long coefficients = 0;           // comparisons across all reports
    std::vector<Report> reports;          // retained reports, in order
    std::vector<std::string> notes;       // free-form context lines
};

namespace detail {

inline void absorb(CriterionOutcome& out, Report rep) {
    ++out.checks_run;
    out.coefficients += rep.coefficients;
    out.wall_ms += rep.wall_ms;
    if (!rep.pass()) out.pass = false;
    out.reports.push_back(std::move(rep));
}

inline void run_battery(CriterionOutcome& out, const std::string& id,
                        std::map<std::string, std::string> params) {
    absorb(out, run_check(id, std::move(params)));
}

// The stated parameter grids for the four constraint-family criteria; the
// negative control below reruns them with a seed override, so they are
// factored out here.
using Seed = std::pair<std::string, std::string>;

inline void family_battery_genus0(CriterionOutcome& out, const std::vector<Seed>& seeds) {
    const std::vector<std::string> profiles = {"", "1", "2", "1,1"};
    auto with_seeds = [&](std::map<std::string, std::string> p) {
        for (const auto& [k, v] : seeds) p.emplace(k, v);
        return p;
    };
    for (int n = -1; n <= 3; ++n)
        for (const auto& prof : profiles)
            run_battery(out, "genus0",
                        with_seeds({{"model", "point"},
                                    {"n", std::to_string(n)},
                                    {"profile", prof},
                                    {"t_deg", "3"}}));
    for (int n = -1; n <= 2; ++n)
        for (const auto& prof : profiles)
            run_battery(out, "genus0",
                        with_seeds({{"model", "p1"}, {"n", std::to_string(n)}, {"profile", prof}}));
}

inline void family_battery_display(CriterionOutcome& out, const std::vector<Seed>& seeds) {
    for (const std::string& model : {"point", "p1"})
        for (int n = 1; n <= 2; ++n) {
            std::map<std::string, std::string> p = {{"model", model}, {"n", std::to_string(n)}};
            for (const auto& [k, v] : seeds) p.emplace(k, v);
            run_battery(out, "ehx", std::move(p));
        }
}

inline void family_battery_genus1(CriterionOutcome& out, const std::vector<Seed>& seeds) {
    for (int k1 = 1; k1 <= 3; ++k1) {
        std::map<std::string, std::string> p = {{"k1", std::to_string(k1)}};
        for (const auto& [k, v] : seeds) p.emplace(k, v);
        run_battery(out, "genus1", std::move(p));
    }
}

inline void family_battery_genus2(CriterionOutcome& out, const std::vector<Seed>& seeds) {
    for (int k1 = 3; k1 <= 4; ++k1) {
        std::map<std::string, std::string> p = {{"k1", std::to_string(k1)}};
        for (const auto& [k, v] : seeds) p.emplace(k, v);
        run_battery(out, "higher-genus", std::move(p));
    }
}

}  // namespace detail

inline const std::vector<std::string>& criterion_labels() {
    static const std::vector<std::string> labels = {
        "oracle-closed-forms",       // 1: descendant values vs. independent formulas
        "operator-bracket",          // 2: commutator relation in the safe window
        "assembly-closed-form",      // 3: direct construction vs. iterated brackets
        "quantization",              // 4: quantized symbols vs. operator constructors
        "first-order-annihilation",  // 5: the vanishing first-order operators
        "genus-zero-families",       // 6: constraint families, genus zero, both targets
        "first-derivative-display",  // 7: the reduced display and its collapse
        "genus-one-families",        // 8: one-coupling families with split blocks
        "genus-two-collapse",        // 9: high-coupling four-term collapse
        "identity-suite",            // 10: structural identity battery
        "seed-perturbation-control", // 11: negative control on the oracle seeds
    };
    return labels;
}

inline CriterionOutcome run_criterion(int number) {
    if (number < 1 || number > static_cast<int>(criterion_labels().size()))
        throw std::invalid_argument("unknown criterion " + std::to_string(number));
    CriterionOutcome out;
    out.number = number;
    out.label = criterion_labels()[static_cast<std::size_t>(number - 1)];
    switch (number) {
        case 1:
            detail::run_battery(out, "oracle", {});
            break;
        case 2:
            for (const std::string& model : {"point", "p1"})
                for (int n = -1; n <= 2; ++n)
                    for (int m = -1; m <= 2; ++m)
                        detail::run_battery(out, "bracket",
                                            {{"model", model},
                                             {"n", std::to_string(n)},
                                             {"m", std::to_string(m)}});
            break;
        case 3:
            for (const std::string& model : {"point", "p1"})
                for (int n = -1; n <= 2; ++n)
                    detail::run_battery(out, "assembly",
                                        {{"model", model}, {"n", std::to_string(n)}});
            break;
        case 4:
            for (const std::string& model : {"point", "p1"})
                detail::run_battery(out, "quantize", {{"model", model}});
            break;
        case 5:
            for (int l = 1; l <= 2; ++l)
                detail::run_battery(out, "fp", {{"l", std::to_string(l)}});
            break;
        case 6:
            detail::family_battery_genus0(out, {});
            break;
        case 7:
            detail::family_battery_display(out, {});
            break;
        case 8:
            detail::family_battery_genus1(out, {});
            break;
        case 9:
            detail::family_battery_genus2(out, {});
            break;
        case 10:
            detail::run_battery(out, "identities", {});
            break;
        case 11: {
            // Negative control: rerun the four family criteria with one
            // oracle seed perturbed at a time; each perturbation must be
            // detected by at least one failing check.  A leg that survives
            // everything is reported as an undetected direction and fails
            // the criterion.
            const std::vector<std::pair<std::string, detail::Seed>> legs = {
                {"three-point seed -> 2", {"point_seed_three", "2"}},
                {"torus seed -> 1/12", {"point_seed_torus", "1/12"}},
                {"degree-one seed -> 2", {"p1_seed", "2"}},
            };
            for (const auto& [name, seed] : legs) {
                CriterionOutcome probe;
                detail::family_battery_genus0(probe, {seed});
                detail::family_battery_display(probe, {seed});
                detail::family_battery_genus1(probe, {seed});
                detail::family_battery_genus2(probe, {seed});
                out.checks_run += probe.checks_run;
                out.coefficients += probe.coefficients;
                out.wall_ms += probe.wall_ms;
                long long failing = 0;
                for (const auto& rep : probe.reports)
                    if (!rep.pass()) ++failing;
                if (failing > 0) {
                    out.notes.push_back(name + ": detected (" + std::to_string(failing) +
                                        " failing checks)");
                } else {
                    out.pass = false;
                    out.notes.push_back(
                        name +
                        ": NOT detected by the family checks; rescaling this seed multiplies "
                        "every degree-d value by s^d, which is the degree-variable rescaling "
                        "q -> s q, an exact symmetry of each family identity (only the frozen "
                        "oracle anchors can pin it)");
                }
            }
            break;
        }
        default:
            throw std::invalid_argument("unknown criterion " + std::to_string(number));
    }
    return out;
}

inline std::vector<CriterionOutcome> run_acceptance(
    const std::function<void(const CriterionOutcome&)>& emit = {}) {
    std::vector<CriterionOutcome> out;
    for (int n = 1; n <= static_cast<int>(criterion_labels().size()); ++n) {
        out.push_back(run_criterion(n));
        if (emit) emit(out.back());
    }
    return out;
}

inline std::string criterion_to_line(const CriterionOutcome& c) {
    std::ostringstream o;
    o << "[" << (c.number < 10 ? " " : "") << c.number << "] ";
    o << c.label;
    for (std::size_t i = c.label.size(); i < 28; ++i) o << ' ';
    o << (c.pass ? "PASS" : "FAIL");
    o << "  checks " << c.checks_run;
    o << "  coefficients " << c.coefficients;
    o << "  wall-ms " << detail::format_ms(c.wall_ms);
    return o.str();
}

// One criterion as a text block: the summary line, then any notes, then the
// location and residue of every failing comparison.
inline std::string criterion_to_block(const CriterionOutcome& c) {
    std::ostringstream o;
    o << criterion_to_line(c) << "\n";
    for (const auto& n : c.notes) o << "      " << n << "\n";
    for (const auto& rep : c.reports)
        if (!rep.pass())
            for (const auto& [where, residue] : rep.failures)
                o << "      " << rep.id << ": " << where << "  residue " << residue << "\n";
    return o.str();
}

inline std::string suite_summary_line(const std::vector<CriterionOutcome>& all) {
    int passed = 0;
    for (const auto& c : all)
        if (c.pass) ++passed;
    std::ostringstream o;
    o << "criteria passed: " << passed << "/" << all.size() << "\n";
    return o.str();
}

inline std::string suite_to_table(const std::vector<CriterionOutcome>& all) {
    std::string o;
    for (const auto& c : all) o += criterion_to_block(c);
    o += suite_summary_line(all);
    return o;
}

inline std::string suite_to_json(const std::vector<CriterionOutcome>& all) {
    std::ostringstream o;
    o << "{\n  \"criteria\": [";
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto& c = all[i];
        if (i) o << ",";
        o << "\n    {\"number\": " << c.number << ", \"name\": \"" << detail::json_escape(c.label)
          << "\", \"pass\": " << (c.pass ? "true" : "false")
          << ", \"checks\": " << c.checks_run << ", \"coefficients\": " << c.coefficients
          << ", \"notes\": [";
        for (std::size_t j = 0; j < c.notes.size(); ++j) {
            if (j) o << ", ";
            o << "\"" << detail::json_escape(c.notes[j]) << "\"";
        }
        o << "], \"failures\": [";
        bool first = true;
        for (const auto& rep : c.reports)
            for (const auto& [where, residue] : rep.failures) {
                if (!first) o << ", ";
                first = false;
                o << "{\"check\": \"" << detail::json_escape(rep.id) << "\", \"where\": \""
                  << detail::json_escape(where) << "\", \"residue\": \""
                  << detail::json_escape(residue) << "\"}";
            }
        o << "], \"wall_ms\": " << detail::format_ms(c.wall_ms) << "}";
    }
    o << "\n  ],\n  \"pass\": ";
    bool all_pass = true;
    for (const auto& c : all) all_pass = all_pass && c.pass;
    o << (all_pass ? "true" : "false") << "\n}\n";
    return o.str();
}

}  // namespace hviro

#endif  // HVIRO_SUITE_HPP
