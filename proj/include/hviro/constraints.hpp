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
#pragma once

#include <hviro/bigphase.hpp>
#include <hviro/diffop.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hviro {

// ===========================================================================
// Constraint-series construction
// ===========================================================================
//
// The conjugated action of a deformed constraint operator on the full
// potential splits by genus and by coupling monomial into coefficient
// families.  psi_series materializes one family exactly, as a series in the
// descendant coordinates (and the degree variable when the model carries
// one): the shifted-coordinate first-order rows, the ordered genus splittings
// of the quadratic rows, the genus-dropping second-order row, the quadratic
// primary term in genus zero, and the scalar terms of the two lowest
// operators.  Every coefficient of a monomial admitted by the truncation is
// computed without approximation, so a vanishing family vanishes exactly.

struct PsiRequest {
    std::string model = "point";
    int g = 0;
    int n = -1;
    std::vector<int> profile;  // coupling indices k >= 1, as a multiset
    Truncation tr;
};

namespace detail {

inline std::vector<int> checked_profile(std::vector<int> p, const char* who) {
    for (int k : p)
        if (k < 1) throw std::invalid_argument(std::string(who) + ": profile entries must be >= 1");
    std::sort(p.begin(), p.end());
    return p;
}

// Coupling indices k -> odd character indices 2k-1.
inline std::vector<int> as_odd_characters(const std::vector<int>& ks) {
    std::vector<int> v;
    v.reserve(ks.size());
    for (int k : ks) v.push_back(2 * k - 1);
    std::sort(v.begin(), v.end());
    return v;
}

// The shifted coordinate as a series: the plain variable when its level is
// inside the window, minus one on the distinguished slot.
inline Series t_tilde_series(const Truncation& tr, int r, int alpha) {
    Series out(tr);
    if (r >= 0 && r <= tr.max_level) out = out + Series::variable(tr, VarId::t(r, alpha));
    if (is_dilaton_slot(r, alpha)) out = out - Series::constant(tr, Rat(1));
    return out;
}

}  // namespace detail

// One decorated block of a constraint family.  `nu` lists the couplings
// whose difference operators decorate the operator rows, `lambda` the
// couplings carried by every potential block.  The result includes the
// (-1)^{|nu|} prod B_{2k}/(2k)! decoration prefactor but no splitting
// weights (psi_series applies those), and none of the quadratic or scalar
// terms that only enter the assembled family.
inline Series psi_split(CorrelatorEngine& eng, int g, int n, const std::vector<int>& nu_in,
                        const std::vector<int>& lambda_in, const Truncation& tr) {
    if (g < 0) throw std::invalid_argument("psi_split: genus must be >= 0");
    if (n < -1) throw std::invalid_argument("psi_split: operator index must be >= -1");
    std::vector<int> nu = detail::checked_profile(nu_in, "psi_split");
    std::vector<int> lambda = detail::checked_profile(lambda_in, "psi_split");
    const TargetModel& m = eng.model;

    Rat pref = (nu.size() % 2 == 0) ? Rat(1) : Rat(-1);
    std::vector<int> shifts;
    int shift_sum = 0;
    for (int k : nu) {
        pref *= bernoulli(2 * k) / Rat(factorial(2 * k));
        shifts.push_back(2 * k - 1);
        shift_sum += 2 * k - 1;
    }
    std::vector<int> lam_odd = detail::as_odd_characters(lambda);
    auto lam_items = to_multiset(lambda);

    Series out(tr);
    for (int j = 0; j <= n + 1; ++j) {
        RatMatrix Cj = chern_power(m, j, ChernVariant::mixed);
        RatMatrix Mj = chern_power(m, j, ChernVariant::raised);
        for (int alpha = 0; alpha < m.basis_size; ++alpha) {
            // first-order rows: shifted coordinate times a derivative of the
            // lambda-block, with the row polynomial evaluated at the level
            UniPoly de_hat = iterated_delta(shifts, hat_check_e(EKind::hat, n + 1 - j, n, m, alpha));
            if (!de_hat.is_zero()) {
                for (int r = 0; r <= std::max(tr.max_level, 1); ++r) {
                    int x = r + shift_sum + n - j;
                    if (x < 0) continue;
                    Rat c = pref * de_hat.eval(Rat(r));
                    if (c == 0) continue;
                    Series tt = detail::t_tilde_series(tr, r, alpha);
                    if (tt.is_zero()) continue;
                    for (int beta = 0; beta < m.basis_size; ++beta) {
                        if (Cj[alpha][beta] == 0) continue;
                        Series dF = double_bracket_profile(eng, g, {{x, beta}}, lam_odd, tr);
                        if (dF.is_zero()) continue;
                        out = out + (tt * dF).scaled(c * Cj[alpha][beta]);
                    }
                }
            }
            // quadratic rows: ordered genus splittings and, above genus
            // zero, the second derivative of the genus-dropped block
            UniPoly de_check =
                iterated_delta(shifts, hat_check_e(EKind::check, n + 1 - j, n, m, alpha));
            if (de_check.is_zero()) continue;
            for (int s = 0; s <= shift_sum + n - j - 1; ++s) {
                int sbar = shift_sum - s - 1 + n - j;
                Rat c = de_check.eval(Rat(-s - 1));
                if (c == 0) continue;
                Rat base = pref * rat(-1, 2) * Rat(s % 2 == 0 ? 1 : -1) * c;
                for (int bp = 0; bp < m.basis_size; ++bp) {
                    if (Mj[alpha][bp] == 0) continue;
                    Rat w = base * Mj[alpha][bp];
                    for_each_weighted_split(
                        lam_items, [&](const std::vector<int>& chosen, const Int& ways) {
                            std::vector<int> lam1, lam2;
                            for (std::size_t i = 0; i < lam_items.size(); ++i) {
                                for (int u = 0; u < chosen[i]; ++u)
                                    lam1.push_back(lam_items[i].first);
                                for (int u = chosen[i]; u < lam_items[i].second; ++u)
                                    lam2.push_back(lam_items[i].first);
                            }
                            std::vector<int> lam1_odd = detail::as_odd_characters(lam1);
                            std::vector<int> lam2_odd = detail::as_odd_characters(lam2);
                            for (int g1 = 0; g1 <= g; ++g1) {
                                Series a = double_bracket_profile(eng, g1, {{s, alpha}}, lam1_odd, tr);
                                if (a.is_zero()) continue;
                                Series b = double_bracket_profile(eng, g - g1, {{sbar, bp}},
                                                                  lam2_odd, tr);
                                if (b.is_zero()) continue;
                                out = out + (a * b).scaled(w * Rat(ways));
                            }
                        });
                    if (g >= 1) {
                        Series dd = double_bracket_profile(eng, g - 1, {{s, alpha}, {sbar, bp}},
                                                           lam_odd, tr);
                        if (!dd.is_zero()) out = out + dd.scaled(w);
                    }
                }
            }
        }
    }
    return out;
}

// The full constraint family for one genus, operator index, and coupling
// profile.  Identically zero on the supported models; the truncation only
// selects which monomials are reported.
inline Series psi_series(CorrelatorEngine& eng, const PsiRequest& req) {
    const TargetModel& m = eng.model;
    if (req.g < 0) throw std::invalid_argument("psi_series: genus must be >= 0");
    if (req.n < -1) throw std::invalid_argument("psi_series: operator index must be >= -1");
    if (m.has_novikov && req.g > 0)
        throw std::invalid_argument(
            "psi_series: the degree-graded oracle supports genus 0 only");
    if (!m.has_novikov && req.g > 2)
        throw std::invalid_argument("psi_series: request exceeds the supported genus range");
    std::vector<int> mu = detail::checked_profile(req.profile, "psi_series");
    const Truncation& tr = req.tr;

    Series out(tr);
    auto mu_items = to_multiset(mu);
    for_each_weighted_split(mu_items, [&](const std::vector<int>& chosen, const Int& ways) {
        std::vector<int> nu, lambda;
        for (std::size_t i = 0; i < mu_items.size(); ++i) {
            for (int u = 0; u < chosen[i]; ++u) nu.push_back(mu_items[i].first);
            for (int u = chosen[i]; u < mu_items[i].second; ++u) lambda.push_back(mu_items[i].first);
        }
        out = out + psi_split(eng, req.g, req.n, nu, lambda, tr).scaled(Rat(ways));
    });

    if (req.g == 0 && mu.empty()) {
        RatMatrix Ceta = chern_power(m, req.n + 1, ChernVariant::lowered);
        for (int a = 0; a < m.basis_size; ++a)
            for (int b = 0; b < m.basis_size; ++b) {
                if (Ceta[a][b] == 0) continue;
                out = out + (Series::variable(tr, VarId::t(0, a)) *
                             Series::variable(tr, VarId::t(0, b)))
                                .scaled(rat(1, 2) * Ceta[a][b]);
            }
    }
    if (req.g == 1 && mu.empty() && req.n == 0) {
        Rat cst = (Rat(3 - m.dim) / 2 * m.cd_integral - m.c1cd1_integral) / 24;
        out = out + Series::constant(tr, cst);
    }
    if (req.g == 1 && req.n == -1 && mu.size() == 1 && mu[0] == 1)
        out = out + Series::constant(tr, m.euler / 24);
    return out;
}

inline Series psi_series(const PsiRequest& req) {
    CorrelatorEngine eng(builtin_model(req.model), req.tr.q_max);
    return psi_series(eng, req);
}

// Extracts one coefficient family from a mixed series: keeps monomials whose
// hbar exponent matches and whose coupling factors are exactly the given
// profile, strips those factors, and scales by the profile's automorphism
// count so the result is comparable with psi_series.
inline Series extract_family(const Series& src, const Truncation& out_tr, int hbar_exp,
                             const std::vector<int>& profile_in) {
    std::vector<int> profile = detail::checked_profile(profile_in, "extract_family");
    std::map<VarId, int> want;
    for (int k : profile) ++want[VarId::s(k)];
    Series out(out_tr);
    for (const auto& [mono, v] : src.terms) {
        if (mono.hbar_exp() != hbar_exp) continue;
        Mono rest;
        bool ok = true;
        for (const auto& [var, e] : mono.factors) {
            if (var.kind() == VarId::Kind::hbar) continue;
            if (var.kind() == VarId::Kind::s) {
                auto it = want.find(var);
                if (it == want.end() || it->second != e) {
                    ok = false;
                    break;
                }
                continue;
            }
            rest = rest.times(Mono::var(var, e));
        }
        if (!ok) continue;
        bool complete = true;
        for (const auto& [var, e] : want)
            if (mono.exponent_of(var) != e) {
                complete = false;
                break;
            }
        if (!complete) continue;
        out.add_term(rest, v);
    }
    return out.scaled(Rat(multiset_aut(profile)));
}

// ===========================================================================
// Check reports
// ===========================================================================

struct Report {
    std::string id;
    std::vector<std::pair<std::string, std::string>> params;  // resolved, in read order
    long long coefficients = 0;                               // comparisons performed
    std::vector<std::pair<std::string, std::string>> failures;  // location -> residue
    double wall_ms = 0.0;
    bool pass() const { return failures.empty(); }
};

namespace detail {

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

inline std::string format_ms(double ms) {
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(1);
    o << ms;
    return o.str();
}

}  // namespace detail

inline std::string report_to_json(const Report& rep) {
    std::ostringstream o;
    o << "{\n  \"check\": \"" << detail::json_escape(rep.id) << "\",\n  \"params\": {";
    for (std::size_t i = 0; i < rep.params.size(); ++i) {
        if (i) o << ", ";
        o << "\"" << detail::json_escape(rep.params[i].first) << "\": \""
          << detail::json_escape(rep.params[i].second) << "\"";
    }
    o << "},\n  \"coefficients\": " << rep.coefficients << ",\n  \"pass\": "
      << (rep.pass() ? "true" : "false") << ",\n  \"failures\": [";
    for (std::size_t i = 0; i < rep.failures.size(); ++i) {
        if (i) o << ",";
        o << "\n    {\"where\": \"" << detail::json_escape(rep.failures[i].first)
          << "\", \"residue\": \"" << detail::json_escape(rep.failures[i].second) << "\"}";
    }
    if (!rep.failures.empty()) o << "\n  ";
    o << "],\n  \"wall_ms\": " << detail::format_ms(rep.wall_ms) << "\n}\n";
    return o.str();
}

inline std::string report_to_table(const Report& rep) {
    std::ostringstream o;
    o << "check         " << rep.id << "\n";
    o << "params        ";
    for (std::size_t i = 0; i < rep.params.size(); ++i) {
        if (i) o << " ";
        o << rep.params[i].first << "=" << rep.params[i].second;
    }
    o << "\n";
    o << "coefficients  " << rep.coefficients << "\n";
    for (const auto& [where, residue] : rep.failures)
        o << "FAIL          " << where << "  residue " << residue << "\n";
    o << "status        " << (rep.pass() ? "PASS" : "FAIL") << "\n";
    o << "wall-ms       " << detail::format_ms(rep.wall_ms) << "\n";
    return o.str();
}

// ===========================================================================
// Named checks
// ===========================================================================

namespace detail {

// Strict key-value parameter reader: every read is echoed with its resolved
// value, and finish() rejects keys that no check consumed.
class ParamReader {
  public:
    ParamReader(const std::map<std::string, std::string>& p, Report& rep) : p_(p), rep_(rep) {}

    std::string gets(const std::string& key, const std::string& def) {
        auto it = p_.find(key);
        std::string v = (it == p_.end()) ? def : it->second;
        note(key, v);
        return v;
    }

    int geti(const std::string& key, int def) {
        auto it = p_.find(key);
        int v = def;
        if (it != p_.end()) {
            try {
                std::size_t pos = 0;
                v = std::stoi(it->second, &pos);
                if (pos != it->second.size()) throw std::invalid_argument("");
            } catch (...) {
                throw std::invalid_argument("parameter '" + key + "' wants an integer, got '" +
                                            it->second + "'");
            }
        }
        note(key, std::to_string(v));
        return v;
    }

    Rat getr(const std::string& key, const Rat& def) {
        auto it = p_.find(key);
        Rat v = def;
        if (it != p_.end()) {
            try {
                v = rat_from_string(it->second);
            } catch (...) {
                throw std::invalid_argument("parameter '" + key + "' wants a rational, got '" +
                                            it->second + "'");
            }
        }
        if (it != p_.end()) note(key, rat_to_string(v));
        return v;
    }

    void finish() const {
        for (const auto& [k, v] : p_) {
            (void)v;
            bool known = false;
            for (const auto& [ek, ev] : rep_.params) {
                (void)ev;
                if (ek == k) {
                    known = true;
                    break;
                }
            }
            if (!known) throw std::invalid_argument("unknown parameter '" + k + "'");
        }
    }

  private:
    void note(const std::string& k, const std::string& v) {
        for (auto& [ek, ev] : rep_.params)
            if (ek == k) {
                ev = v;
                return;
            }
        rep_.params.push_back({k, v});
    }

    const std::map<std::string, std::string>& p_;
    Report& rep_;
};

inline TargetModel check_model(const std::string& name) {
    if (name != "point" && name != "p1")
        throw std::invalid_argument("checks run on the builtin models ('point' or 'p1'), got '" +
                                    name + "'");
    return builtin_model(name);
}

// Applies optional seed overrides to an engine; overriding a seed lets a
// caller verify that the checks actually depend on the oracle's initial data.
inline void seed_engine(CorrelatorEngine& eng, ParamReader& pr) {
    eng.point_seed_three = pr.getr("point_seed_three", eng.point_seed_three);
    eng.point_seed_torus = pr.getr("point_seed_torus", eng.point_seed_torus);
    eng.p1_seed = pr.getr("p1_seed", eng.p1_seed);
}

inline void collect(Report& rep, const std::string& tag, const Series& residual) {
    for (const auto& [mono, v] : residual.terms) {
        std::string where = mono_to_string(mono);
        if (!tag.empty()) where = tag + " @ " + where;
        rep.failures.push_back({where, rat_to_string(v)});
    }
}

// Compares two series and records every mismatching monomial; the number of
// examined coefficients is the size of the larger operand (at least one, so
// trivially-zero identities still count as checked).
inline void check_series(Report& rep, const std::string& tag, const Series& lhs,
                         const Series& rhs) {
    rep.coefficients +=
        std::max<long long>(1, std::max<long long>(static_cast<long long>(lhs.terms.size()),
                                                   static_cast<long long>(rhs.terms.size())));
    collect(rep, tag, lhs - rhs);
}

inline void check_zero(Report& rep, const std::string& tag, const Series& s) {
    check_series(rep, tag, s, Series(s.trunc));
}

inline void check_value(Report& rep, const std::string& tag, const Rat& got, const Rat& want) {
    rep.coefficients += 1;
    if (got != want) rep.failures.push_back({tag, rat_to_string(got - want)});
}

inline std::string opkey_to_string(const OpKey& k) {
    std::ostringstream o;
    o << mono_to_string(k.mono);
    if (k.hbar != 0) o << " h^" << k.hbar;
    if (k.qpow != 0) o << " q^" << k.qpow;
    for (VarId v : k.derivs) o << " d/d" << var_to_string(v);
    return o.str();
}

// Keeps operator terms whose variables and derivatives stay inside the given
// level window and coupling degree; commutators of truncated operators are
// exact inside such a window.
inline DiffOp op_window(const DiffOp& op, int max_level, int s_cap) {
    DiffOp out;
    for (const auto& [key, c] : op.terms) {
        if (key.mono.max_t_level() > max_level) continue;
        if (key.mono.s_degree() > s_cap) continue;
        bool ok = true;
        for (VarId v : key.derivs)
            if (v.kind() == VarId::Kind::t && v.t_level() > max_level) ok = false;
        if (ok) out.add(key, c);
    }
    return out;
}

// Drops terms whose coupling monomial cannot contribute to the extraction of
// a profile inside the given degree/index bounds.
inline DiffOp op_s_window(const DiffOp& op, int s_degree, int s_index_max) {
    DiffOp out;
    for (const auto& [key, c] : op.terms) {
        if (key.mono.s_degree() > s_degree) continue;
        if (key.mono.max_s_index() > s_index_max) continue;
        out.add(key, c);
    }
    return out;
}

inline void compare_ops(Report& rep, const std::string& tag, const DiffOp& lhs,
                        const DiffOp& rhs) {
    std::set<OpKey> keys;
    for (const auto& [k, c] : lhs.terms) keys.insert(k);
    for (const auto& [k, c] : rhs.terms) keys.insert(k);
    rep.coefficients += std::max<long long>(1, static_cast<long long>(keys.size()));
    DiffOp diff = lhs - rhs;
    for (const auto& [k, c] : diff.terms) {
        std::string where = opkey_to_string(k);
        if (!tag.empty()) where = tag + " @ " + where;
        rep.failures.push_back({where, rat_to_string(c)});
    }
}

// Number of monomial slots the truncation admits: coordinate multisets times
// degree powers times coupling profiles times genus slots.
inline long long family_slots(const TargetModel& m, const Truncation& tr) {
    long long t_count = 0;
    detail::for_each_t_multiset(m, tr.max_level, tr.t_degree, [&](const auto&) { ++t_count; });
    long long q_count = (m.has_novikov ? tr.q_max : 0) + 1;
    long long s_count = 0;
    for_each_hodge_profile(tr, [&](const std::vector<int>&) { ++s_count; });
    long long h_count = 1;
    if (tr.hbar_max >= tr.hbar_min) h_count = (tr.hbar_max - tr.hbar_min) / 2 + 1;
    return t_count * q_count * s_count * h_count;
}

inline std::vector<int> parse_profile(const std::string& text) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        std::string item =
            text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            std::size_t used = 0;
            int k = std::stoi(item, &used);
            if (used != item.size() || k < 1) throw std::invalid_argument("");
            out.push_back(k);
        } catch (...) {
            throw std::invalid_argument("bad profile entry '" + item + "' (want k >= 1)");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::string profile_to_string(const std::vector<int>& p) {
    std::string s;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(p[i]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// oracle: closed-form and seeded values of the correlator oracle
// ---------------------------------------------------------------------------

inline void run_oracle(Report& rep, ParamReader& pr) {
    TargetModel m = check_model(pr.gets("model", "point"));
    int n_max = pr.geti("n_max", 7);
    CorrelatorEngine eng(m, 2);
    seed_engine(eng, pr);
    pr.finish();
    if (n_max < 3) throw std::invalid_argument("n_max must be >= 3");

    if (!m.has_novikov) {
        // genus-0 multinomial closed form on the one-point target
        std::vector<int> levels;
        std::function<void(int, int, int)> rec = [&](int slots, int lo, int rem) {
            if (slots == 0) {
                if (rem != 0) return;
                CorrelatorKey key;
                key.model = m.name;
                key.g = 0;
                for (int d : levels) key.insertions.push_back({d, 0});
                key.canonicalize();
                Rat want = Rat(factorial(static_cast<int>(levels.size()) - 3));
                for (int d : levels) want /= Rat(factorial(d));
                check_value(rep, "genus-0 levels " + profile_to_string(levels),
                            eng.correlator(key), want);
                return;
            }
            for (int d = lo; d <= rem; ++d) {
                levels.push_back(d);
                rec(slots - 1, d, rem - d);
                levels.pop_back();
            }
        };
        for (int n = 3; n <= n_max; ++n) rec(n, 0, n - 3);

        auto val = [&](int g, std::vector<std::pair<int, int>> ins) {
            CorrelatorKey key;
            key.model = m.name;
            key.g = g;
            key.insertions = std::move(ins);
            key.canonicalize();
            return eng.correlator(key);
        };
        check_value(rep, "genus-1 level 1", val(1, {{1, 0}}), rat(1, 24));
        check_value(rep, "genus-1 levels 0,2", val(1, {{0, 0}, {2, 0}}), rat(1, 24));
        check_value(rep, "genus-1 levels 1,1", val(1, {{1, 0}, {1, 0}}), rat(1, 24));
        check_value(rep, "genus-2 level 4", val(2, {{4, 0}}), rat(1, 1152));
    } else {
        // degree-graded target: classical triple, point classes, and the
        // one-point generating law
        auto val = [&](int deg, std::vector<std::pair<int, int>> ins) {
            CorrelatorKey key;
            key.model = m.name;
            key.g = 0;
            key.degree = deg;
            key.insertions = std::move(ins);
            key.canonicalize();
            return eng.correlator(key);
        };
        check_value(rep, "degree-0 triple", val(0, {{0, 0}, {0, 0}, {0, 1}}), Rat(1));
        check_value(rep, "degree-1 empty", val(1, {}), Rat(1));
        check_value(rep, "degree-1 point", val(1, {{0, 1}}), Rat(1));
        check_value(rep, "degree-2 pair", val(2, {{1, 1}, {1, 1}}), rat(1, 2));
        for (int d = 1; d <= std::min(2, eng.q_max); ++d)
            check_value(rep, "one-point law d" + std::to_string(d), val(d, {{2 * d - 2, 1}}),
                        Rat(Int(1), factorial(d) * factorial(d)));
    }
}

// ---------------------------------------------------------------------------
// bracket: commutator relation between two constraint operators
// ---------------------------------------------------------------------------

inline void run_bracket(Report& rep, ParamReader& pr) {
    TargetModel m = check_model(pr.gets("model", "point"));
    int n = pr.geti("n", 1);
    int mm = pr.geti("m", -1);
    int s_cap = pr.geti("s_cap", 2);
    int level = pr.geti("level", 8);
    pr.finish();
    if (n < -1 || mm < -1) throw std::invalid_argument("operator indices must be >= -1");
    if (level < 4) throw std::invalid_argument("level must be >= 4");

    DiffOp a = build_LnE(m, n, s_cap, level);
    DiffOp b = build_LnE(m, mm, s_cap, level);
    DiffOp lhs = commutator(a, b);
    DiffOp rhs;
    if (n + mm >= -1) rhs = build_LnE(m, n + mm, s_cap, level).scaled(Rat(n - mm));
    compare_ops(rep, "", op_window(lhs, level - 3, s_cap), op_window(rhs, level - 3, s_cap));
}

// ---------------------------------------------------------------------------
// assembly: closed form of the deformed operator vs. iterated commutators
// ---------------------------------------------------------------------------

inline void run_assembly(Report& rep, ParamReader& pr) {
    TargetModel m = check_model(pr.gets("model", "point"));
    int n = pr.geti("n", 1);
    int s_cap = pr.geti("s_cap", 2);
    int level = pr.geti("level", 6);
    pr.finish();
    if (n < -1) throw std::invalid_argument("operator index must be >= -1");

    compare_ops(rep, "", build_LnE(m, n, s_cap, level), bch_LnE(m, n, s_cap, level));
    if (n == -1) {
        // the deformation of the lowest operator is exactly the scalar
        // coupling term fixed by the model's Euler number
        DiffOp d = build_LnE(m, n, s_cap, level) - build_Ln(m, n, level);
        DiffOp want;
        OpKey s1;
        s1.mono = Mono::var(VarId::s(1));
        want.add(s1, m.euler / 24);
        compare_ops(rep, "scalar", d, want);
    }
}

// ---------------------------------------------------------------------------
// quantize: quantized symbols reproduce the operator constructors
// ---------------------------------------------------------------------------

inline void run_quantize(Report& rep, ParamReader& pr) {
    TargetModel m = check_model(pr.gets("model", "point"));
    int k_max = pr.geti("k_max", 3);
    int n_max = pr.geti("n_max", 2);
    int level = pr.geti("level", 5);
    pr.finish();
    if (k_max < 1 || n_max < -1) throw std::invalid_argument("k_max or n_max out of range");

    for (int k = 1; k <= k_max; ++k)
        compare_ops(rep, "odd-power k" + std::to_string(k),
                    op_dilaton_shift(quantize(m, sym_z_odd(k), level)), build_zhat(m, k, level));
    for (int n = -1; n <= n_max; ++n) {
        DiffOp got = op_dilaton_shift(quantize(m, sym_ln(m, n), level)).scaled(-1);
        DiffOp expect = build_Ln(m, n, level);
        if (n == 0) {
            auto it = expect.terms.find(OpKey{});
            if (it != expect.terms.end()) expect = expect - DiffOp::identity(it->second);
        }
        compare_ops(rep, "rotation n" + std::to_string(n), got, expect);
    }
    DiffOp low = quantize(m, sym_ln(m, -1), level);
    for (int k = 1; k <= k_max; ++k) {
        Rat expect = (k == 1) ? m.euler / 2 : Rat(0);
        check_value(rep, "pairing k" + std::to_string(k),
                    cocycle_pairing(low, quantize(m, sym_z_odd(k), level)), expect);
    }
    DiffOp b = op_window(commutator(low, quantize(m, sym_z_odd(1), level)), level - 2, 2);
    compare_ops(rep, "bracket scalar", b, DiffOp::identity(m.euler / 2));
}

// ---------------------------------------------------------------------------
// fp: the vanishing first-order operator annihilates the full potential
// ---------------------------------------------------------------------------

inline void run_fp(Report& rep, ParamReader& pr) {
    TargetModel m = check_model(pr.gets("model", "point"));
    int l = pr.geti("l", 1);
    int t_deg = pr.geti("t_deg", 2);
    int level = pr.geti("level", 6);
    int genus_max = pr.geti("genus_max", m.has_novikov ? 0 : 2);
    int q_max = pr.geti("q_max", 2);
    CorrelatorEngine eng(m, q_max);
    seed_engine(eng, pr);
    pr.finish();
    if (l < 1) throw std::invalid_argument("l must be >= 1");
    if (m.has_novikov && genus_max > 0)
        throw std::invalid_argument("the degree-graded oracle supports genus 0 only");
    if (genus_max > 2) throw std::invalid_argument("genus_max exceeds the supported range");

    Truncation tr;
    tr.t_degree = t_deg;
    tr.max_level = level;
    tr.s_degree = 1;
    tr.s_index_max = std::max(l + 1, 3);
    tr.q_max = m.has_novikov ? q_max : 0;
    tr.hbar_min = -2;
    tr.hbar_max = 2 * genus_max - 2;

    DiffOp op = build_FP(m, l, level + 2 * l - 1);
    check_zero(rep, "", connected_action(op, eng, tr));
    rep.coefficients += family_slots(m, tr) - 1;

    if (!m.has_novikov) {
        // independent one-coupling anchor in genus one
        CorrelatorKey key;
        key.model = m.name;
        key.g = 1;
        key.insertions = {{0, 0}};
        key.hodge = {1};
        check_value(rep, "anchor torus coupling", eng.correlator(key), rat(1, 24));
    }
}

// ---------------------------------------------------------------------------
// genus0: the genus-zero constraint family vanishes, via two routes
// ---------------------------------------------------------------------------

inline void run_genus0(Report& rep, ParamReader& pr) {
    TargetModel m = check_model(pr.gets("model", "point"));
    int n = pr.geti("n", 1);
    std::vector<int> profile = parse_profile(pr.gets("profile", ""));
    int t_deg = pr.geti("t_deg", 2);
    int level = pr.geti("level", 6);
    int q_max = pr.geti("q_max", 2);
    CorrelatorEngine eng(m, q_max);
    seed_engine(eng, pr);
    pr.finish();
    if (n < -1) throw std::invalid_argument("operator index must be >= -1");

    Truncation tr;
    tr.t_degree = t_deg;
    tr.max_level = level;
    tr.s_degree = 0;
    tr.s_index_max = 1;
    tr.q_max = m.has_novikov ? q_max : 0;
    tr.hbar_min = 0;
    tr.hbar_max = 0;

    PsiRequest req;
    req.model = m.name;
    req.g = 0;
    req.n = n;
    req.profile = profile;
    req.tr = tr;
    Series psi = psi_series(eng, req);
    check_zero(rep, "family", psi);
    rep.coefficients += family_slots(m, tr) - 1;

    // independent route: conjugated action of the assembled operator,
    // restricted to the same coupling profile and genus slot
    int shift_sum = 0;
    int k_max = 1;
    for (int k : profile) {
        shift_sum += 2 * k - 1;
        k_max = std::max(k_max, k);
    }
    int s_deg = static_cast<int>(profile.size());
    int op_cap = level + shift_sum + std::max(n, 0) + 1;
    DiffOp op = op_s_window(build_LnE(m, n, std::max(s_deg, 1), op_cap), s_deg, k_max);

    Truncation wide = tr;
    wide.s_degree = s_deg;
    wide.s_index_max = k_max;
    wide.hbar_min = -2;
    wide.hbar_max = -2;
    Series crossed = extract_family(connected_action(op, eng, wide), tr, -2, profile);
    check_series(rep, "cross-route", psi, crossed);
}

// ---------------------------------------------------------------------------
// ehx: undeformed genus-zero constraints in first-derivative form
// ---------------------------------------------------------------------------

inline void run_ehx(Report& rep, ParamReader& pr) {
    TargetModel m = check_model(pr.gets("model", "point"));
    int n = pr.geti("n", 1);
    int t_deg = pr.geti("t_deg", 2);
    int level = pr.geti("level", 6);
    int q_max = pr.geti("q_max", 2);
    CorrelatorEngine eng(m, q_max);
    seed_engine(eng, pr);
    pr.finish();
    if (n < 0) throw std::invalid_argument("operator index must be >= 0 here");

    Truncation tr;
    tr.t_degree = t_deg;
    tr.max_level = level;
    tr.s_degree = 0;
    tr.s_index_max = 1;
    tr.q_max = m.has_novikov ? q_max : 0;
    tr.hbar_min = 0;
    tr.hbar_max = 0;

    // the classical constraint written on shifted coordinates, one level up
    Series display(tr);
    for (int j = 0; j <= n; ++j) {
        RatMatrix Cj = chern_power(m, j, ChernVariant::mixed);
        RatMatrix Mj = chern_power(m, j, ChernVariant::raised);
        for (int alpha = 0; alpha < m.basis_size; ++alpha) {
            const UniPoly& ph = hat_check_e(EKind::hat, n - j, n - 1, m, alpha);
            for (int r = 0; r <= std::max(tr.max_level, 1); ++r) {
                Rat c = ph.eval(Rat(r + 1));
                if (c == 0) continue;
                Series tt = t_tilde_series(tr, r, alpha);
                if (tt.is_zero()) continue;
                int x = 1 + r + n - j;
                for (int beta = 0; beta < m.basis_size; ++beta) {
                    if (Cj[alpha][beta] == 0) continue;
                    Series dF = double_bracket_profile(eng, 0, {{x, beta}}, {}, tr);
                    if (dF.is_zero()) continue;
                    display = display - (tt * dF).scaled(c * Cj[alpha][beta]);
                }
            }
            const UniPoly& pc = hat_check_e(EKind::check, n - j, n - 1, m, alpha);
            for (int s = 0; s <= n - j; ++s) {
                Rat c = pc.eval(Rat(-s));
                if (c == 0) continue;
                Rat base = rat(1, 2) * Rat(s % 2 == 0 ? 1 : -1) * c;
                Series first = double_bracket_profile(eng, 0, {{s, alpha}}, {}, tr);
                if (first.is_zero()) continue;
                for (int bp = 0; bp < m.basis_size; ++bp) {
                    if (Mj[alpha][bp] == 0) continue;
                    Series second = double_bracket_profile(eng, 0, {{n - j - s, bp}}, {}, tr);
                    display = display + (first * second).scaled(base * Mj[alpha][bp]);
                }
            }
        }
    }
    check_zero(rep, "display", display);
    rep.coefficients += family_slots(m, tr) - 1;

    // the single-coupling block of the deformed family collapses onto the
    // display with a uniform integer factor; first symbolically on the row
    // polynomials, then on the assembled series
    for (int j = 0; j <= n; ++j) {
        for (int alpha = 0; alpha < m.basis_size; ++alpha) {
            UniPoly lh = iterated_delta({1}, hat_check_e(EKind::hat, n + 1 - j, n, m, alpha));
            UniPoly rh =
                hat_check_e(EKind::hat, n - j, n - 1, m, alpha).shifted(Rat(1)).scaled(Rat(n + 1));
            rep.coefficients += 1;
            if (!(lh == rh))
                rep.failures.push_back({"row polynomial (plain) j=" + std::to_string(j) +
                                            " class=" + std::to_string(alpha),
                                        "mismatch"});
            UniPoly lc = iterated_delta({1}, hat_check_e(EKind::check, n + 1 - j, n, m, alpha));
            UniPoly rc = hat_check_e(EKind::check, n - j, n - 1, m, alpha)
                             .shifted(Rat(1))
                             .scaled(Rat(n + 1));
            rep.coefficients += 1;
            if (!(lc == rc))
                rep.failures.push_back({"row polynomial (paired) j=" + std::to_string(j) +
                                            " class=" + std::to_string(alpha),
                                        "mismatch"});
        }
    }
    Rat decoration = -bernoulli(2) / Rat(factorial(2));  // the k=1 block prefactor
    Series block = psi_split(eng, 0, n, {1}, {}, tr).scaled(Rat(-1) / decoration);
    check_series(rep, "single-coupling block", block, display.scaled(Rat(n + 1)));
}

// ---------------------------------------------------------------------------
// genus1: the genus-one one-coupling family vanishes, including its split
// ---------------------------------------------------------------------------

inline void run_genus1(Report& rep, ParamReader& pr) {
    TargetModel m = check_model(pr.gets("model", "point"));
    int k1 = pr.geti("k1", 1);
    int t_deg = pr.geti("t_deg", 2);
    int level = pr.geti("level", 6);
    CorrelatorEngine eng(m, 2);
    seed_engine(eng, pr);
    pr.finish();
    if (k1 < 1) throw std::invalid_argument("k1 must be >= 1");
    if (m.has_novikov)
        throw std::invalid_argument("the degree-graded oracle supports genus 0 only");

    Truncation tr;
    tr.t_degree = t_deg;
    tr.max_level = level;
    tr.s_degree = 0;
    tr.s_index_max = 1;
    tr.q_max = 0;
    tr.hbar_min = 0;
    tr.hbar_max = 0;

    PsiRequest req;
    req.model = m.name;
    req.g = 1;
    req.n = 1;
    req.profile = {k1};
    req.tr = tr;
    check_zero(rep, "family", psi_series(eng, req));
    rep.coefficients += family_slots(m, tr) - 1;

    if (k1 == 1) {
        // closed forms of the two blocks of the k=1 family
        auto db0 = [&](std::vector<std::pair<int, int>> dirs) {
            return double_bracket(eng, 0, std::move(dirs), tr);
        };
        Series decorated_rhs(tr), plain_rhs(tr), total_rhs(tr);
        for (int be = 0; be < m.basis_size; ++be) {
            Rat bb = b_lower(m, be);
            for (int b2 = 0; b2 < m.basis_size; ++b2) {
                if (m.eta_inv[be][b2] != 0) {
                    Series one = db0({{1, be}, {0, b2}}).scaled(m.eta_inv[be][b2]);
                    decorated_rhs = decorated_rhs + one.scaled(bb * rat(1, 6));
                    plain_rhs = plain_rhs - one.scaled(bb * rat(1, 6));
                }
                if (m.eta_inv[be][b2] == 0) continue;
                for (int c = 0; c < m.basis_size; ++c) {
                    if (m.chern[b2][c] != 0)
                        decorated_rhs = decorated_rhs +
                                        db0({{0, be}, {0, c}})
                                            .scaled(m.eta_inv[be][b2] * m.chern[b2][c] * rat(1, 12));
                    if (m.chern[be][c] != 0) {
                        Series two = db0({{0, c}, {0, b2}}).scaled(m.eta_inv[be][b2] * m.chern[be][c]);
                        plain_rhs = plain_rhs - two.scaled((bb * 2 + 1) * rat(1, 12));
                        total_rhs = total_rhs - two.scaled(bb * rat(1, 6));
                    }
                }
            }
        }
        Series decorated = psi_split(eng, 1, 1, {1}, {}, tr);
        Series plain = psi_split(eng, 1, 1, {}, {1}, tr);
        check_series(rep, "decorated block", decorated, decorated_rhs);
        check_series(rep, "plain block", plain, plain_rhs);
        check_series(rep, "combined value", decorated + plain, total_rhs);
        check_zero(rep, "combined value vanishes", total_rhs);
    }
}

// ---------------------------------------------------------------------------
// higher-genus: the high-coupling constraint collapses to four terms
// ---------------------------------------------------------------------------

inline void run_higher_genus(Report& rep, ParamReader& pr) {
    TargetModel m = check_model(pr.gets("model", "point"));
    int g = pr.geti("g", 2);
    int k1 = pr.geti("k1", 3);
    int t_deg = pr.geti("t_deg", 1);
    int level = pr.geti("level", 6);
    CorrelatorEngine eng(m, 2);
    seed_engine(eng, pr);
    pr.finish();
    if (m.has_novikov)
        throw std::invalid_argument("the degree-graded oracle supports genus 0 only");
    if (g != 2) throw std::invalid_argument("the oracle is exercised at genus 2 here");
    int k_low = std::max(g + 1, (3 * g) / 2);  // ceil((3g-1)/2)
    if (k1 < k_low)
        throw std::invalid_argument("k1 must be >= " + std::to_string(k_low) +
                                    " for this collapse");

    Truncation tr;
    tr.t_degree = t_deg;
    tr.max_level = level;
    tr.s_degree = 0;
    tr.s_index_max = 1;
    tr.q_max = 0;
    tr.hbar_min = 0;
    tr.hbar_max = 0;

    auto sgn = [](int i) { return (i % 2 == 0) ? Rat(1) : Rat(-1); };
    Series total(tr);
    // first-order rows on the shifted coordinates
    for (int r = 0; r <= std::max(tr.max_level, 1); ++r) {
        for (int alpha = 0; alpha < m.basis_size; ++alpha) {
            Series tt = detail::t_tilde_series(tr, r, alpha);
            if (tt.is_zero()) continue;
            Series top = double_bracket(eng, g, {{r + 2 * k1, alpha}}, tr);
            if (!top.is_zero())
                total = total + (tt * top).scaled(Rat(r + k1) + b_lower(m, alpha));
            for (int c = 0; c < m.basis_size; ++c) {
                if (m.chern[alpha][c] == 0) continue;
                Series mid = double_bracket(eng, g, {{r + 2 * k1 - 1, c}}, tr);
                if (!mid.is_zero()) total = total + (tt * mid).scaled(m.chern[alpha][c]);
            }
        }
    }
    // quadratic rows through the recursion operator
    for (int j = 0; j <= 2 * k1 - 1; ++j) {
        for (int alpha = 0; alpha < m.basis_size; ++alpha) {
            VectorField dual = VectorField::dual_basis(m, tr, 2 * k1 - 1 - j, alpha);
            VectorField q = Q_op(m, VectorField::basis(tr, j, alpha));
            if (q.is_zero()) continue;
            for (int g1 = 0; g1 <= g; ++g1) {
                Series a = bracket_fields(eng, g1, {dual}, tr);
                if (a.is_zero()) continue;
                Series b = bracket_fields(eng, g - g1, {q}, tr);
                if (b.is_zero()) continue;
                total = total + (a * b).scaled(sgn(j) * rat(1, 2));
            }
            Series both = bracket_fields(eng, g - 1, {dual, q}, tr);
            if (!both.is_zero()) total = total + both.scaled(sgn(j) * rat(1, 2));
        }
    }
    check_zero(rep, "collapse", total);
    rep.coefficients += family_slots(m, tr) - 1;
}

// ---------------------------------------------------------------------------
// identities: the structural relations behind the constraint proofs
// ---------------------------------------------------------------------------

inline void identities_for_model(Report& rep, CorrelatorEngine& eng) {
    const TargetModel& m = eng.model;
    Truncation tr;
    tr.t_degree = 2;
    tr.max_level = 6;
    tr.s_degree = 0;
    tr.s_index_max = 1;
    tr.q_max = m.has_novikov ? 2 : 0;
    tr.hbar_min = 0;
    tr.hbar_max = 0;
    const int g_max = m.has_novikov ? 0 : 2;
    const int N = m.basis_size;
    const std::string pfx = m.name + " ";

    auto db = [&](int g, std::vector<std::pair<int, int>> dirs) {
        return double_bracket(eng, g, std::move(dirs), tr);
    };
    auto dbf = [&](int g, std::vector<VectorField> ws) {
        return bracket_fields(eng, g, std::move(ws), tr);
    };
    auto B = [&](int n, int a) { return VectorField::basis(tr, n, a); };
    auto Bd = [&](int n, int a) { return VectorField::dual_basis(m, tr, n, a); };
    auto cst = [&](Rat v) { return Series::constant(tr, v); };
    auto sgn = [](int i) { return (i % 2 == 0) ? Rat(1) : Rat(-1); };
    auto tshift = [&](int n, int a) { return t_tilde_series(tr, n, a); };
    RatMatrix low = chern_power(m, 1, ChernVariant::lowered);
    auto chern_quadratic = [&]() {
        Series out(tr);
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b)
                if (low[a][b] != 0)
                    out = out + (Series::variable(tr, VarId::t(0, a)) *
                                 Series::variable(tr, VarId::t(0, b)))
                                    .scaled(low[a][b]);
        return out;
    };
    auto chern_linear = [&](int a) {
        Series out(tr);
        for (int b = 0; b < N; ++b)
            if (low[a][b] != 0) out = out + Series::variable(tr, VarId::t(0, b)).scaled(low[a][b]);
        return out;
    };
    auto chern_insert = [&](int n, int a) {
        VectorField w(tr);
        for (int b = 0; b < N; ++b)
            if (m.chern[a][b] != 0) w.add_component(n - 1, b, cst(m.chern[a][b]));
        return w;
    };
    VectorField x_field = special_field(m, SpecialField::euler, tr);
    VectorField d_field = special_field(m, SpecialField::dilaton, tr);
    VectorField l0_field = special_field(m, SpecialField::l0, tr);

    // 1. quasi-homogeneity of each genus slice
    for (int g = 0; g <= g_max; ++g) {
        Series rhs = db(g, {}).scaled(Rat((3 - m.dim) * (1 - g)));
        if (g == 0) rhs = rhs + chern_quadratic().scaled(rat(1, 2));
        if (g == 1) rhs = rhs - cst(m.c1cd1_integral * rat(1, 24));
        check_series(rep, pfx + "quasihom g" + std::to_string(g), dbf(g, {x_field}), rhs);
    }

    // 2. derivative rules for the scaling insertion
    for (int mm = 0; mm <= 3; ++mm) {
        for (int a = 0; a < N; ++a) {
            Series rhs = db(0, {{mm, a}}).scaled(Rat(mm) + b_lower(m, a) + b_lower(m, 0) + 1);
            rhs = rhs + dbf(0, {chern_insert(mm, a)});
            if (mm == 0) rhs = rhs + chern_linear(a);
            check_series(rep, pfx + "scale1 m" + std::to_string(mm) + " a" + std::to_string(a),
                         dbf(0, {x_field, B(mm, a)}), rhs);
        }
    }
    {
        std::vector<std::pair<std::pair<int, int>, std::pair<int, int>>> samples = {
            {{0, 0}, {0, 0}}, {{1, 0}, {0, 0}}, {{2, 0}, {1, 0}}};
        if (N > 1) {
            samples.push_back({{0, 0}, {0, 1}});
            samples.push_back({{1, 1}, {1, 0}});
            samples.push_back({{2, 1}, {0, 1}});
        }
        int idx = 0;
        for (const auto& [p, q] : samples) {
            auto [mm, a] = p;
            auto [nn, b] = q;
            Series rhs = db(0, {{mm, a}, {nn, b}})
                             .scaled(Rat(mm + nn) + b_lower(m, a) + b_lower(m, b));
            if (mm == 0 && nn == 0) rhs = rhs + cst(low[a][b]);
            rhs = rhs + dbf(0, {chern_insert(mm, a), B(nn, b)});
            rhs = rhs + dbf(0, {B(mm, a), chern_insert(nn, b)});
            check_series(rep, pfx + "scale2 sample" + std::to_string(idx++),
                         dbf(0, {x_field, B(mm, a), B(nn, b)}), rhs);
        }
    }
    {
        std::vector<std::array<std::pair<int, int>, 3>> samples = {
            {std::pair{0, 0}, std::pair{0, 0}, std::pair{0, 0}},
            {std::pair{1, 0}, std::pair{1, 0}, std::pair{0, 0}}};
        if (N > 1) samples.push_back({std::pair{0, 0}, std::pair{0, 1}, std::pair{1, 1}});
        int idx = 0;
        for (const auto& s : samples) {
            Rat scale = Rat(s[0].first + s[1].first + s[2].first) - Rat(3 - m.dim, 2);
            for (const auto& [lvl, cls] : s) scale = scale + b_lower(m, cls);
            Series rhs = db(0, {s[0], s[1], s[2]}).scaled(scale);
            rhs = rhs + dbf(0, {chern_insert(s[0].first, s[0].second), B(s[1].first, s[1].second),
                                B(s[2].first, s[2].second)});
            rhs = rhs + dbf(0, {B(s[0].first, s[0].second), chern_insert(s[1].first, s[1].second),
                                B(s[2].first, s[2].second)});
            rhs = rhs + dbf(0, {B(s[0].first, s[0].second), B(s[1].first, s[1].second),
                                chern_insert(s[2].first, s[2].second)});
            check_series(rep, pfx + "scale3 sample" + std::to_string(idx++),
                         dbf(0, {x_field, B(s[0].first, s[0].second), B(s[1].first, s[1].second),
                                 B(s[2].first, s[2].second)}),
                         rhs);
        }
    }

    // 3. genus-zero flow equation and its derivative forms
    auto flow_lhs = [&](int k1, const std::vector<std::pair<int, int>>& spectators) {
        Series out(tr);
        for (int r = 0; r <= tr.max_level; ++r) {
            for (int a = 0; a < N; ++a) {
                std::vector<std::pair<int, int>> dirs = {{r + 2 * k1 - 1, a}};
                dirs.insert(dirs.end(), spectators.begin(), spectators.end());
                Series br = db(0, dirs);
                if (br.is_zero()) continue;
                out = out + tshift(r, a) * br;
            }
        }
        return out;
    };
    for (int k1 = 1; k1 <= 2; ++k1) {
        Series total = flow_lhs(k1, {}).scaled(-1);
        for (int i = 0; i <= 2 * k1 - 2; ++i)
            for (int a = 0; a < N; ++a)
                total = total +
                        (db(0, {{i, a}}) * dbf(0, {Bd(2 * k1 - 2 - i, a)})).scaled(sgn(i) * rat(1, 2));
        check_zero(rep, pfx + "flow k" + std::to_string(k1), total);
    }
    {
        std::vector<std::pair<int, int>> specs = {{0, 0}, {2, 0}};
        if (N > 1) specs.push_back({1, 1});
        for (int k1 = 1; k1 <= 2; ++k1) {
            for (const auto& [mm, be] : specs) {
                Series rhs = db(0, {{mm + 2 * k1 - 1, be}}).scaled(-1);
                for (int i = 0; i <= 2 * k1 - 2; ++i)
                    for (int a = 0; a < N; ++a)
                        rhs = rhs + (db(0, {{i, a}, {mm, be}}) * dbf(0, {Bd(2 * k1 - 2 - i, a)}))
                                        .scaled(sgn(i));
                check_series(rep,
                             pfx + "flow1 k" + std::to_string(k1) + " m" + std::to_string(mm) +
                                 " a" + std::to_string(be),
                             flow_lhs(k1, {{mm, be}}), rhs);
            }
        }
    }
    {
        std::vector<std::vector<std::pair<int, int>>> samples = {{{0, 0}, {1, 0}}};
        if (N > 1) samples.push_back({{0, 1}, {1, 1}});
        samples.push_back({{0, 0}, {0, 0}, {1, 0}});
        int idx = 0;
        for (const auto& spect : samples) {
            Series rhs(tr);
            for (int a = 0; a < N; ++a) {
                std::vector<std::pair<int, int>> dirs = {{0, a}};
                dirs.insert(dirs.end(), spect.begin(), spect.end());
                rhs = rhs + db(0, dirs) * dbf(0, {Bd(0, a)});
            }
            check_series(rep, pfx + "flow-multi sample" + std::to_string(idx++),
                         flow_lhs(1, spect), rhs);
        }
    }
    {
        std::vector<std::pair<std::pair<int, int>, std::pair<int, int>>> samples = {
            {{0, 0}, {1, 0}}, {{2, 0}, {0, 0}}};
        if (N > 1) samples.push_back({{1, 1}, {0, 1}});
        int k1 = 1, idx = 0;
        for (const auto& [p, q] : samples) {
            auto [nn, sg] = p;
            auto [mm, be] = q;
            Series lhs = db(0, {{nn + 2 * k1 - 1, sg}, {mm, be}}) +
                         db(0, {{mm + 2 * k1 - 1, be}, {nn, sg}});
            Series rhs(tr);
            for (int i = 0; i <= 2 * k1 - 2; ++i)
                for (int a = 0; a < N; ++a)
                    rhs = rhs + (db(0, {{i, a}, {mm, be}}) *
                                 dbf(0, {Bd(2 * k1 - 2 - i, a), B(nn, sg)}))
                                    .scaled(sgn(i));
            check_series(rep, pfx + "flow-sym sample" + std::to_string(idx++), lhs, rhs);
        }
    }

    // 4. generalized genus-zero recursion for a shifted insertion
    {
        std::vector<std::array<std::pair<int, int>, 3>> samples = {
            {std::pair{0, 0}, std::pair{0, 0}, std::pair{0, 0}},
            {std::pair{1, 0}, std::pair{1, 0}, std::pair{0, 0}},
            {std::pair{2, 0}, std::pair{0, 0}, std::pair{1, 0}}};
        if (N > 1) samples.push_back({std::pair{1, 1}, std::pair{0, 1}, std::pair{1, 0}});
        for (int k1 = 1; k1 <= 2; ++k1) {
            int idx = 0;
            for (const auto& s : samples) {
                auto [l, ep] = s[0];
                auto [mm, be] = s[1];
                auto [nn, sg] = s[2];
                Series lhs = db(0, {{l + 2 * k1 - 1, ep}, {mm, be}, {nn, sg}});
                Series rhs(tr);
                for (int i = 0; i <= 2 * k1 - 2; ++i)
                    for (int a = 0; a < N; ++a)
                        rhs = rhs + (db(0, {{i, a}, {mm, be}, {nn, sg}}) *
                                     dbf(0, {Bd(2 * k1 - 2 - i, a), B(l, ep)}))
                                        .scaled(sgn(i));
                check_series(rep,
                             pfx + "gen-rec k" + std::to_string(k1) + " sample" +
                                 std::to_string(idx++),
                             lhs, rhs);
            }
        }
    }

    // 5. genus-one descendant recursion (one-point target only)
    if (!m.has_novikov) {
        for (int s = 1; s <= 4; ++s) {
            Series rhs = db(0, {{s - 1, 0}, {0, 0}}) * db(1, {{0, 0}}) +
                         db(0, {{s - 1, 0}, {0, 0}, {0, 0}}).scaled(rat(1, 24));
            check_series(rep, pfx + "g1-rec s" + std::to_string(s), db(1, {{s, 0}}), rhs);
        }
    }

    // 6. tensor contraction is invariant under the coordinate change
    {
        auto run = [&](int mm, int gP, int gQ, int spectator) {
            Series lhs(tr), rhs(tr);
            for (int a = 0; a < N; ++a) {
                std::vector<VectorField> tb, td;
                for (int j = 0; j <= mm; ++j) {
                    tb.push_back(T_pow(eng, B(0, a), j, tr));
                    td.push_back(T_pow(eng, Bd(0, a), j, tr));
                }
                for (int j = 0; j <= mm; ++j) {
                    lhs = lhs + (dbf(gP, {B(j, a)}) * dbf(gQ, {Bd(mm - j, a), B(1, spectator)}))
                                    .scaled(sgn(j));
                    rhs = rhs + (dbf(gP, {tb[static_cast<std::size_t>(j)]}) *
                                 dbf(gQ, {td[static_cast<std::size_t>(mm - j)], B(1, spectator)}))
                                    .scaled(sgn(j));
                }
            }
            check_series(rep,
                         pfx + "contract m" + std::to_string(mm) + " g" + std::to_string(gP) +
                             std::to_string(gQ),
                         lhs, rhs);
        };
        for (int mm = 1; mm <= 4; ++mm) {
            if (m.has_novikov) {
                run(mm, 0, 0, 1);
            } else {
                run(mm, 0, 0, 0);
                run(mm, 1, 0, 0);
                run(mm, 0, 1, 0);
            }
        }
    }

    // 7. orthogonality sums for the recursion operator
    for (int k = 1; k <= 3; ++k) {
        Series total(tr);
        for (int s = 0; s <= 2 * k - 1; ++s)
            for (int a = 0; a < N; ++a)
                total = total + dbf(0, {B(s, a), Bd(2 * k - 1 - s, a)}).scaled(sgn(s));
        check_zero(rep, pfx + "ortho-dual k" + std::to_string(k), total);
    }
    for (int l = 2; l <= 3; ++l) {
        Series total(tr);
        for (int j = 0; j <= 2 * l - 1; ++j)
            for (int a = 0; a < N; ++a)
                total = total + dbf(0, {Bd(2 * l - 1 - j, a), Q_op(m, B(j, a))}).scaled(sgn(j));
        check_zero(rep, pfx + "ortho-rec l" + std::to_string(l), total);
    }
    {
        int l = 2;
        RatMatrix mixed_pairing = mat_mul(m.eta_inv, low);
        Series lhs(tr), rhs(tr);
        for (int j = 0; j <= 2 * l - 1; ++j) {
            for (int a = 0; a < N; ++a) {
                VectorField u = Bd(2 * l - 1 - j, a);
                VectorField v = Q_op(m, B(j, a));
                if (v.is_zero()) continue;
                lhs = lhs + dbf(0, {u, x_field, v}).scaled(sgn(j));
                rhs = rhs + dbf(0, {Q_op(m, u), v}).scaled(sgn(j));
                rhs = rhs + dbf(0, {u, Q_op(m, v)}).scaled(sgn(j));
                if (2 * l - 1 - j == 0) {
                    auto parts = pi_project(m, v);
                    for (int b = 0; b < N; ++b)
                        if (mixed_pairing[a][b] != 0)
                            rhs = rhs +
                                  parts[static_cast<std::size_t>(b)].scaled(sgn(j) *
                                                                            mixed_pairing[a][b]);
                }
            }
        }
        check_series(rep, pfx + "ortho-scale l2", lhs, rhs);
    }

    // 8. dilaton and grading equations
    for (int g = 0; g <= g_max; ++g) {
        Series rhs = db(g, {}).scaled(Rat(2 * g - 2));
        if (g == 1) rhs = rhs + cst(m.euler * rat(1, 24));
        check_series(rep, pfx + "dilaton g" + std::to_string(g), dbf(g, {d_field}), rhs);
    }
    for (int g = 0; g <= g_max; ++g) {
        Series rhs(tr);
        if (g == 0) rhs = chern_quadratic().scaled(rat(-1, 2));
        if (g == 1)
            rhs = cst((Rat(3 - m.dim, 2) * m.cd_integral - m.c1cd1_integral) * rat(-1, 24));
        check_series(rep, pfx + "grading g" + std::to_string(g), dbf(g, {l0_field}), rhs);
    }
    for (int i = 0; i <= 3; ++i) {
        for (int a = 0; a < N; ++a) {
            check_series(rep, pfx + "dilaton1 i" + std::to_string(i) + " a" + std::to_string(a),
                         dbf(0, {d_field, B(i, a)}), db(0, {{i, a}}).scaled(-1));
            Series rhs = db(0, {{i, a}}).scaled(-(Rat(i) + b_lower(m, a)));
            rhs = rhs - dbf(0, {chern_insert(i, a)});
            if (i == 0) rhs = rhs - chern_linear(a);
            check_series(rep, pfx + "grading1 i" + std::to_string(i) + " a" + std::to_string(a),
                         dbf(0, {l0_field, B(i, a)}), rhs);
        }
    }

    // 9. normalized fields of the grading and dilaton flows
    for (int l = 1; l <= 2; ++l) {
        VectorField rhs_l0 = tau_shift(l0_field, TauDir::plus, 2 * l);
        VectorField rhs_d = tau_shift(d_field, TauDir::plus, 2 * l);
        for (int i = 0; i <= 2 * l - 1; ++i) {
            for (int a = 0; a < N; ++a) {
                Series qcoeff = dbf(0, {Q_op(m, B(i, a))});
                if (i == 0) qcoeff = qcoeff + chern_linear(a);
                VectorField dual_target = Bd(2 * l - 1 - i, a);
                for (const auto& [key, f] : dual_target.comps)
                    rhs_l0.add_component(key.first, key.second, (f * qcoeff).scaled(sgn(i)));
                rhs_d.add_component(2 * l - 1 - i, a, dbf(0, {Bd(i, a)}).scaled(sgn(i)));
            }
        }
        VectorField lhs_l0 = T_pow(eng, l0_field, 2 * l, tr);
        VectorField lhs_d = T_pow(eng, d_field, 2 * l, tr);
        rep.coefficients += 2;
        if (!(lhs_l0 == rhs_l0))
            rep.failures.push_back({pfx + "normalized-grading l" + std::to_string(l), "mismatch"});
        if (!(lhs_d == rhs_d))
            rep.failures.push_back({pfx + "normalized-dilaton l" + std::to_string(l), "mismatch"});
    }

    // 10. exchange of the recursion operator with the coordinate change
    for (int a = 0; a < N; ++a) {
        for (int start = 0; start <= 1; ++start) {
            VectorField w = B(start, a);
            VectorField xw = field_product(eng, x_field, w, tr);
            rep.coefficients += 1;
            if (!field_product(eng, x_field, T_op(eng, w, tr), tr).is_zero())
                rep.failures.push_back(
                    {pfx + "exchange-kill a" + std::to_string(a) + " n" + std::to_string(start),
                     "nonzero"});
            for (int k = 1; k <= 2; ++k) {
                VectorField lhs =
                    Q_op(m, T_pow(eng, w, k, tr)) - T_pow(eng, Q_op(m, w), k, tr);
                VectorField rhs = T_pow(eng, w, k, tr).scaled(k) + T_pow(eng, xw, k - 1, tr);
                rep.coefficients += 1;
                if (!(lhs == rhs))
                    rep.failures.push_back({pfx + "exchange k" + std::to_string(k) + " a" +
                                                std::to_string(a) + " n" + std::to_string(start),
                                            "mismatch"});
            }
        }
    }

    // 11. normalized descendants kill the three-point recursion
    {
        int cap = m.has_novikov ? 2 : 3;
        for (int n = 0; n <= cap; ++n) {
            for (int mm = 0; mm <= cap; ++mm) {
                for (int k = 0; k <= cap; ++k) {
                    if (m.has_novikov) {
                        std::vector<std::array<int, 3>> classes = {
                            {0, 0, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
                        for (const auto& cl : classes) {
                            VectorField tw = T_op(eng, B(n, cl[0]), tr);
                            check_zero(rep,
                                       pfx + "reduced " + std::to_string(n) + std::to_string(mm) +
                                           std::to_string(k) + " c" + std::to_string(cl[0]) +
                                           std::to_string(cl[1]) + std::to_string(cl[2]),
                                       dbf(0, {tw, B(mm, cl[1]), B(k, cl[2])}));
                        }
                    } else {
                        VectorField tw = T_op(eng, B(n, 0), tr);
                        check_zero(rep,
                                   pfx + "reduced " + std::to_string(n) + std::to_string(mm) +
                                       std::to_string(k),
                                   dbf(0, {tw, B(mm, 0), B(k, 0)}));
                    }
                }
            }
        }
        if (m.has_novikov)
            check_zero(rep, pfx + "reduced spot",
                       dbf(0, {T_op(eng, B(3, 1), tr), B(3, 0), B(3, 1)}));
    }

    // 12. mixed-genus pairing sums reduce to boundary data
    if (!m.has_novikov) {
        for (int g = 1; g <= 2; ++g) {
            for (int l = 1; l <= 2; ++l) {
                Series lhs(tr), rhs(tr);
                for (int j = 0; j <= 2 * l - 1; ++j) {
                    for (int a = 0; a < N; ++a) {
                        Series dual_g = dbf(g, {Bd(2 * l - 1 - j, a)});
                        Series dual_0 = dbf(0, {Bd(2 * l - 1 - j, a)});
                        Series q_g = dbf(g, {Q_op(m, B(j, a))});
                        Series q_0 = dbf(0, {Q_op(m, B(j, a))});
                        lhs = lhs + (dual_g * q_0 + dual_0 * q_g).scaled(sgn(j) * rat(1, 2));
                        rhs = rhs + (db(0, {{j, a}}) * dual_g).scaled(sgn(j) * Rat(-l));
                        rhs = rhs + (dual_g * q_0).scaled(sgn(j));
                    }
                }
                check_series(rep, pfx + "pairing g" + std::to_string(g) + " l" + std::to_string(l),
                             lhs, rhs);
            }
        }
    }
}

inline void run_identities(Report& rep, ParamReader& pr) {
    std::string which = pr.gets("model", "both");
    if (which != "both" && which != "point" && which != "p1")
        throw std::invalid_argument("model must be 'point', 'p1', or 'both'");
    Rat seed_three = pr.getr("point_seed_three", Rat(1));
    Rat seed_torus = pr.getr("point_seed_torus", rat(1, 24));
    Rat seed_p1 = pr.getr("p1_seed", Rat(1));
    pr.finish();
    if (which == "both" || which == "point") {
        CorrelatorEngine eng(builtin_model("point"), 0);
        eng.point_seed_three = seed_three;
        eng.point_seed_torus = seed_torus;
        identities_for_model(rep, eng);
    }
    if (which == "both" || which == "p1") {
        CorrelatorEngine eng(builtin_model("p1"), 2);
        eng.p1_seed = seed_p1;
        identities_for_model(rep, eng);
    }
}

}  // namespace detail

// Names of the runnable checks, in the order a full suite runs them.
inline const std::vector<std::string>& check_ids() {
    static const std::vector<std::string> ids = {
        "oracle", "bracket", "assembly",     "quantize",  "fp",
        "genus0", "ehx",     "genus1",       "higher-genus", "identities"};
    return ids;
}

// Runs one named check with string parameters.  Unknown checks, unknown
// parameter keys, and malformed values raise std::invalid_argument; a
// completed run always returns a Report, failed comparisons included.
inline Report run_check(const std::string& id, const std::map<std::string, std::string>& params = {}) {
    Report rep;
    rep.id = id;
    detail::ParamReader pr(params, rep);
    auto start = std::chrono::steady_clock::now();
    if (id == "oracle")
        detail::run_oracle(rep, pr);
    else if (id == "bracket")
        detail::run_bracket(rep, pr);
    else if (id == "assembly")
        detail::run_assembly(rep, pr);
    else if (id == "quantize")
        detail::run_quantize(rep, pr);
    else if (id == "fp")
        detail::run_fp(rep, pr);
    else if (id == "genus0")
        detail::run_genus0(rep, pr);
    else if (id == "ehx")
        detail::run_ehx(rep, pr);
    else if (id == "genus1")
        detail::run_genus1(rep, pr);
    else if (id == "higher-genus")
        detail::run_higher_genus(rep, pr);
    else if (id == "identities")
        detail::run_identities(rep, pr);
    else
        throw std::invalid_argument("unknown check '" + id + "'");
    rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            start)
                      .count();
    return rep;
}

}  // namespace hviro
