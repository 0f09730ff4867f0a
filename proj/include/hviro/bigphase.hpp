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

#include <hviro/correlators.hpp>
#include <hviro/model.hpp>
#include <hviro/rational.hpp>
#include <hviro/series.hpp>

#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace hviro {

// ---------------------------------------------------------------------------
// Vector fields on the big phase space
//
// A vector field is a finite sum  sum_{n,alpha} f_{n,alpha}(t) tau_n(phi_alpha)
// with exact-rational series coefficients.  Descendant slots with n < 0 vanish
// identically and are never stored.  All coefficient series of one field share
// a single truncation.
// ---------------------------------------------------------------------------

enum class TauDir { plus, minus };

struct VectorField {
    Truncation trunc;
    // (descendant level, class index) -> coefficient series. Zero coefficients
    // are pruned, so equality of the maps is equality of the fields.
    std::map<std::pair<int, int>, Series> comps;

    explicit VectorField(const Truncation& tr) : trunc(tr) {}

    static VectorField zero(const Truncation& tr) { return VectorField(tr); }

    // c * tau_level(phi_alpha)
    static VectorField basis(const Truncation& tr, int level, int alpha, Rat c = 1) {
        VectorField w(tr);
        w.add_component(level, alpha, Series::constant(tr, c));
        return w;
    }

    // tau_level(phi^alpha) = sum_b eta^{alpha b} tau_level(phi_b)
    static VectorField dual_basis(const TargetModel& m, const Truncation& tr, int level,
                                  int alpha) {
        VectorField w(tr);
        for (int b = 0; b < m.basis_size; ++b)
            if (m.eta_inv[alpha][b] != 0)
                w.add_component(level, b, Series::constant(tr, m.eta_inv[alpha][b]));
        return w;
    }

    void add_component(int level, int alpha, const Series& f) {
        if (level < 0) return;  // tau_{<0} == 0
        if (f.is_zero()) return;
        auto key = std::make_pair(level, alpha);
        auto it = comps.find(key);
        if (it == comps.end()) {
            comps.emplace(key, f);
        } else {
            it->second = it->second + f;
            if (it->second.is_zero()) comps.erase(it);
        }
    }

    Series component(int level, int alpha) const {
        auto it = comps.find({level, alpha});
        return it == comps.end() ? Series(trunc) : it->second;
    }

    bool is_zero() const { return comps.empty(); }

    int max_level() const {
        int lvl = -1;
        for (const auto& [key, f] : comps) lvl = std::max(lvl, key.first);
        return lvl;
    }

    VectorField scaled(const Rat& c) const {
        VectorField out(trunc);
        if (c == 0) return out;
        for (const auto& [key, f] : comps) out.comps.emplace(key, f.scaled(c));
        return out;
    }

    friend VectorField operator+(const VectorField& a, const VectorField& b) {
        if (a.trunc != b.trunc)
            throw std::logic_error("VectorField: mixing truncations");
        VectorField out = a;
        for (const auto& [key, f] : b.comps) out.add_component(key.first, key.second, f);
        return out;
    }

    friend VectorField operator-(const VectorField& a, const VectorField& b) {
        return a + b.scaled(-1);
    }

    friend bool operator==(const VectorField& a, const VectorField& b) {
        return a.trunc == b.trunc && a.comps == b.comps;
    }
};

// Shifts every descendant level by +/- k; lowered slots that land below zero
// are dropped.
inline VectorField tau_shift(const VectorField& w, TauDir dir, int k = 1) {
    if (k < 0) throw std::invalid_argument("tau_shift: shift amount must be nonnegative");
    int d = (dir == TauDir::plus) ? k : -k;
    VectorField out(w.trunc);
    for (const auto& [key, f] : w.comps) out.add_component(key.first + d, key.second, f);
    return out;
}

// ---------------------------------------------------------------------------
// Genus-g brackets of vector fields
//
// <<W_1 ... W_r>>_g is multilinear: each field contributes one insertion per
// component, and the coefficient functions multiply the resulting bracket
// series (they are never differentiated).
// ---------------------------------------------------------------------------

inline Series bracket_fields(CorrelatorEngine& eng, int g, const std::vector<VectorField>& ws,
                             const Truncation& tr) {
    Series out(tr);
    std::vector<std::pair<int, int>> dirs(ws.size());
    auto rec = [&](auto&& self, std::size_t i, const Series& coeff) -> void {
        if (i == ws.size()) {
            out = out + coeff * double_bracket(eng, g, dirs, tr);
            return;
        }
        for (const auto& [key, f] : ws[i].comps) {
            Series next = coeff * f;
            if (next.is_zero()) continue;
            dirs[i] = key;
            self(self, i + 1, next);
        }
    };
    rec(rec, 0, Series::constant(tr, 1));
    return out;
}

// ---------------------------------------------------------------------------
// The recursion operator Q and the distinguished fields
//
//   Q(sum f tau_n(phi_a)) = sum f [ (n + b_a) tau_n(phi_a)
//                                   + tau_{n-1}(c_1 cup phi_a) ]
//
//   euler   :  - sum (n + b_a - b_1 - 1) tt_n^a tau_n(phi_a)
//              - sum tt_n^a tau_{n-1}(c_1 cup phi_a)
//   dilaton :  - sum tt_n^a tau_n(phi_a)
//   l0      :    sum (n + b_a) tt_n^a tau_n(phi_a)
//              + sum tt_n^a tau_{n-1}(c_1 cup phi_a)
//
// where tt_n^a = t_n^a - delta(dilaton slot) is the shifted coordinate.  The
// level sum stops at the truncation cap: every omitted summand carries an
// inadmissible variable, so the stored field is exact on admissible monomials.
// ---------------------------------------------------------------------------

inline VectorField Q_op(const TargetModel& m, const VectorField& w) {
    VectorField out(w.trunc);
    for (const auto& [key, f] : w.comps) {
        auto [n, a] = key;
        out.add_component(n, a, f.scaled(Rat(n) + b_lower(m, a)));
        for (int b = 0; b < m.basis_size; ++b)
            if (m.chern[a][b] != 0) out.add_component(n - 1, b, f.scaled(m.chern[a][b]));
    }
    return out;
}

enum class SpecialField { euler, dilaton, l0 };

inline VectorField special_field(const TargetModel& m, SpecialField which,
                                 const Truncation& tr) {
    VectorField out(tr);
    Rat b1 = b_lower(m, 0);
    for (int n = 0; n <= tr.max_level; ++n) {
        for (int a = 0; a < m.basis_size; ++a) {
            Series tt = Series::variable(tr, VarId::t(n, a));
            if (is_dilaton_slot(n, a)) tt = tt - Series::constant(tr, 1);
            switch (which) {
                case SpecialField::euler:
                    out.add_component(n, a, tt.scaled(-(Rat(n) + b_lower(m, a) - b1 - 1)));
                    for (int b = 0; b < m.basis_size; ++b)
                        if (m.chern[a][b] != 0)
                            out.add_component(n - 1, b, tt.scaled(-m.chern[a][b]));
                    break;
                case SpecialField::dilaton:
                    out.add_component(n, a, tt.scaled(-1));
                    break;
                case SpecialField::l0:
                    out.add_component(n, a, tt.scaled(Rat(n) + b_lower(m, a)));
                    for (int b = 0; b < m.basis_size; ++b)
                        if (m.chern[a][b] != 0)
                            out.add_component(n - 1, b, tt.scaled(m.chern[a][b]));
                    break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// The coordinate change T and the big quantum product
//
//   T(W)       = tau_+(W) - sum_a <<W phi^a>>_0 phi_a
//   W_1 . W_2  = sum_{a,b} <<W_1 W_2 phi_a>>_0 eta^{ab} phi_b
// ---------------------------------------------------------------------------

inline VectorField T_op(CorrelatorEngine& eng, const VectorField& w, const Truncation& tr) {
    const TargetModel& m = eng.model;
    VectorField out = tau_shift(w, TauDir::plus, 1);
    for (int a = 0; a < m.basis_size; ++a) {
        Series corr(tr);
        for (int b = 0; b < m.basis_size; ++b) {
            if (m.eta_inv[a][b] == 0) continue;
            corr = corr + bracket_fields(eng, 0, {w, VectorField::basis(tr, 0, b)}, tr)
                              .scaled(m.eta_inv[a][b]);
        }
        out.add_component(0, a, corr.scaled(-1));
    }
    return out;
}

inline VectorField T_pow(CorrelatorEngine& eng, const VectorField& w, int k,
                         const Truncation& tr) {
    if (k < 0) throw std::invalid_argument("T_pow: negative power");
    VectorField out = w;
    for (int i = 0; i < k; ++i) out = T_op(eng, out, tr);
    return out;
}

inline VectorField field_product(CorrelatorEngine& eng, const VectorField& w1,
                                 const VectorField& w2, const Truncation& tr) {
    const TargetModel& m = eng.model;
    VectorField out(tr);
    for (int a = 0; a < m.basis_size; ++a) {
        Series br = bracket_fields(eng, 0, {w1, w2, VectorField::basis(tr, 0, a)}, tr);
        if (br.is_zero()) continue;
        for (int b = 0; b < m.basis_size; ++b)
            if (m.eta_inv[a][b] != 0) out.add_component(0, b, br.scaled(m.eta_inv[a][b]));
    }
    return out;
}

// Projects a field to its cohomology part: tau_n(phi_a) -> delta_{n,0} phi_a.
// Returned by class index.
inline std::vector<Series> pi_project(const TargetModel& m, const VectorField& w) {
    std::vector<Series> out(static_cast<std::size_t>(m.basis_size), Series(w.trunc));
    for (const auto& [key, f] : w.comps)
        if (key.first == 0) out[static_cast<std::size_t>(key.second)] =
            out[static_cast<std::size_t>(key.second)] + f;
    return out;
}

}  // namespace hviro
