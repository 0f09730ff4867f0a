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
#include <hviro/symfun.hpp>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace hviro {

// One normal-ordered term: coefficient * hbar^h * q^qpow * mono * derivs,
// with every derivative standing to the right of every multiplication.
struct OpKey {
    int hbar = 0;
    int qpow = 0;
    Mono mono;                   // product of t- and s-variables
    std::vector<VarId> derivs;   // sorted multiset; t- and s-variables

    auto operator<=>(const OpKey&) const = default;
};

struct DiffOp {
    std::map<OpKey, Rat> terms;

    static DiffOp identity(const Rat& c = 1) {
        DiffOp op;
        if (c != 0) op.terms[OpKey{}] = c;
        return op;
    }

    bool is_zero() const { return terms.empty(); }

    void add(OpKey key, const Rat& c) {
        if (c == 0) return;
        std::sort(key.derivs.begin(), key.derivs.end());
        auto [it, fresh] = terms.emplace(std::move(key), c);
        if (!fresh) {
            it->second += c;
            if (it->second == 0) terms.erase(it);
        }
    }

    DiffOp scaled(const Rat& c) const {
        DiffOp r;
        if (c == 0) return r;
        for (auto& [k, v] : terms) r.terms.emplace(k, v * c);
        return r;
    }

    friend DiffOp operator+(const DiffOp& a, const DiffOp& b) {
        DiffOp r = a;
        for (auto& [k, v] : b.terms) r.add(k, v);
        return r;
    }

    friend DiffOp operator-(const DiffOp& a, const DiffOp& b) {
        DiffOp r = a;
        for (auto& [k, v] : b.terms) r.add(k, -v);
        return r;
    }

    bool operator==(const DiffOp& o) const { return terms == o.terms; }
};

namespace detail {

// Differentiates `mono` by the sub-multiset of `derivs` selected by `mask`
// (bit i picks derivs[i]); returns the numeric factor and the reduced
// monomial, or factor 0 when some variable is absent.
inline std::pair<Rat, Mono> apply_derivs(const Mono& mono, const std::vector<VarId>& derivs,
                                         unsigned mask) {
    Rat factor = 1;
    Mono cur = mono;
    for (std::size_t i = 0; i < derivs.size(); ++i) {
        if (!(mask >> i & 1u)) continue;
        int e = cur.exponent_of(derivs[i]);
        if (e == 0) return {Rat(0), Mono::one()};
        factor *= e;
        cur = cur.times(Mono::var(derivs[i], -1));
    }
    return {factor, cur};
}

inline std::vector<VarId> merge_sorted(const std::vector<VarId>& a, const std::vector<VarId>& b) {
    std::vector<VarId> out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline std::vector<VarId> drop_masked(const std::vector<VarId>& v, unsigned mask) {
    std::vector<VarId> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!(mask >> i & 1u)) out.push_back(v[i]);
    return out;
}

// Presence mask used only to reject pairs with no possible contraction;
// false positives merely cost time. The mix must separate t-levels, which
// sit above the low byte of the code.
inline std::uint64_t var_bit(VarId v) {
    std::uint32_t h = v.code ^ (v.code >> 8) ^ (v.code >> 16);
    return 1ull << (h & 63u);
}

inline std::uint64_t mono_mask(const Mono& m) {
    std::uint64_t bits = 0;
    for (auto& [v, e] : m.factors) bits |= var_bit(v);
    return bits;
}

inline std::uint64_t deriv_mask(const std::vector<VarId>& d) {
    std::uint64_t bits = 0;
    for (auto v : d) bits |= var_bit(v);
    return bits;
}

}  // namespace detail

// Normal-ordered product A.B via the Leibniz rule: each sub-multiset of A's
// derivatives acts on B's multiplication part, the rest pass through.
inline DiffOp compose(const DiffOp& A, const DiffOp& B) {
    DiffOp out;
    for (auto& [ka, ca] : A.terms) {
        if (ka.derivs.size() >= 8 * sizeof(unsigned))
            throw std::logic_error("compose: derivative order too large");
        unsigned full = (1u << ka.derivs.size()) - 1u;
        for (auto& [kb, cb] : B.terms) {
            for (unsigned mask = 0;; ++mask) {
                auto [factor, reduced] = detail::apply_derivs(kb.mono, ka.derivs, mask);
                if (factor != 0) {
                    OpKey key;
                    key.hbar = ka.hbar + kb.hbar;
                    key.qpow = ka.qpow + kb.qpow;
                    key.mono = ka.mono.times(reduced);
                    key.derivs =
                        detail::merge_sorted(detail::drop_masked(ka.derivs, mask), kb.derivs);
                    out.add(std::move(key), ca * cb * factor);
                }
                if (mask == full) break;
            }
        }
    }
    return out;
}

// [A, B] keeping only contraction terms: the empty-mask products of AB and
// BA coincide and cancel, so only pairs where derivatives of one side can
// hit variables of the other are enumerated.
inline DiffOp commutator(const DiffOp& A, const DiffOp& B) {
    DiffOp out;
    struct Flat {
        const OpKey* key;
        const Rat* coeff;
        std::uint64_t dmask, mmask;
    };
    auto flatten = [](const DiffOp& op) {
        std::vector<Flat> v;
        v.reserve(op.terms.size());
        for (auto& [k, c] : op.terms)
            v.push_back({&k, &c, detail::deriv_mask(k.derivs), detail::mono_mask(k.mono)});
        return v;
    };
    auto fa = flatten(A), fb = flatten(B);
    auto accumulate = [&](const Flat& x, const Flat& y, int sign) {
        // contraction terms of x.y: a nonempty subset of x's derivatives
        // acts on y's monomial
        if (!(x.dmask & y.mmask)) return;
        unsigned full = (1u << x.key->derivs.size()) - 1u;
        for (unsigned mask = 1; mask <= full; ++mask) {
            auto [factor, reduced] = detail::apply_derivs(y.key->mono, x.key->derivs, mask);
            if (factor == 0) continue;
            OpKey key;
            key.hbar = x.key->hbar + y.key->hbar;
            key.qpow = x.key->qpow + y.key->qpow;
            key.mono = x.key->mono.times(reduced);
            key.derivs =
                detail::merge_sorted(detail::drop_masked(x.key->derivs, mask), y.key->derivs);
            out.add(std::move(key), *x.coeff * *y.coeff * factor * sign);
        }
    };
    for (auto& a : fa)
        for (auto& b : fb) {
            accumulate(a, b, 1);
            accumulate(b, a, -1);
        }
    return out;
}

// ---- dump format: one normal-ordered term per line ----------------------

inline std::string dump_op(const DiffOp& op) {
    std::string out;
    for (auto& [k, c] : op.terms) {
        Mono smono, tmono;
        for (auto& [v, e] : k.mono.factors)
            (v.kind() == VarId::Kind::s ? smono : tmono).factors.push_back({v, e});
        out += rat_to_string(c);
        out += " | h^" + std::to_string(k.hbar);
        if (k.qpow != 0) out += " q^" + std::to_string(k.qpow);
        out += " | s:" + mono_to_string(smono);
        out += " | t:" + mono_to_string(tmono);
        out += " | d:";
        if (k.derivs.empty()) out += "-";
        for (std::size_t i = 0; i < k.derivs.size(); ++i) {
            if (i) out += " ";
            out += var_to_string(k.derivs[i]);
        }
        out += "\n";
    }
    if (out.empty()) out = "0\n";
    return out;
}

// ---- operator constructors ----------------------------------------------

namespace detail {

// Adds coeff * (shifted t)_r^alpha * d/dt_{x,beta}; the level-one identity
// slot carries the extra -1.
inline void add_first_order(DiffOp& op, const Rat& coeff, const Mono& smono, int r, int alpha,
                            int x, int beta) {
    if (coeff == 0) return;
    OpKey key;
    key.mono = smono.times(Mono::var(VarId::t(r, alpha)));
    key.derivs = {VarId::t(x, beta)};
    op.add(key, coeff);
    if (is_dilaton_slot(r, alpha)) {
        OpKey cst;
        cst.mono = smono;
        cst.derivs = {VarId::t(x, beta)};
        op.add(cst, -coeff);
    }
}

// Nondecreasing tuples (k_1 <= ... <= k_m), k_i >= 1, with
// sum (2k_i - 1) <= bound; both assembly routes enumerate the same set so
// they can agree exactly at the caps.
inline void for_each_k_tuple(int m, int bound,
                             const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> tuple;
    std::function<void(int, int)> rec = [&](int kmin, int remaining_bound) {
        if ((int)tuple.size() == m) {
            fn(tuple);
            return;
        }
        for (int k = kmin; 2 * k - 1 <= remaining_bound; ++k) {
            tuple.push_back(k);
            rec(k, remaining_bound - (2 * k - 1));
            tuple.pop_back();
        }
    };
    rec(1, bound);
}

// (-1)^m / prod mult! * prod B_{2k}/(2k)!  (a multiset stands for the
// ordered sum divided by m!).
// Drops every term carrying a variable or derivative above the level cap.
inline DiffOp restrict_levels(const DiffOp& op, int level_cap) {
    DiffOp out;
    for (const auto& [key, c] : op.terms) {
        if (key.mono.max_t_level() > level_cap) continue;
        bool ok = true;
        for (VarId v : key.derivs)
            if (v.kind() == VarId::Kind::t && v.t_level() > level_cap) ok = false;
        if (ok) out.add(key, c);
    }
    return out;
}

inline Rat k_tuple_prefactor(const std::vector<int>& ks) {
    Rat c = (ks.size() % 2 == 0) ? 1 : -1;
    c /= Rat(multiset_aut(ks));
    for (int k : ks) c *= bernoulli(2 * k) / Rat(factorial(2 * k));
    return c;
}

}  // namespace detail

// The n-th constraint operator, truncated so that every t-variable and every
// derivative sits at a level within [0, level_cap].
inline DiffOp build_Ln(const TargetModel& m, int n, int level_cap) {
    if (n < -1) throw std::invalid_argument("build_Ln: n must be >= -1");
    DiffOp op;
    for (int j = 0; j <= n + 1; ++j) {
        RatMatrix Cj = chern_power(m, j, ChernVariant::mixed);
        RatMatrix Mj = chern_power(m, j, ChernVariant::raised);
        for (int alpha = 0; alpha < m.basis_size; ++alpha) {
            const UniPoly& e_hat = hat_check_e(EKind::hat, n + 1 - j, n, m, alpha);
            for (int r = 0; r <= level_cap; ++r) {
                int x = r + n - j;
                if (x < 0 || x > level_cap) continue;
                Rat c = e_hat.eval(Rat(r));
                if (c == 0) continue;
                for (int beta = 0; beta < m.basis_size; ++beta)
                    detail::add_first_order(op, c * Cj[alpha][beta], Mono::one(), r, alpha, x,
                                            beta);
            }
            const UniPoly& e_check = hat_check_e(EKind::check, n + 1 - j, n, m, alpha);
            for (int s = 0; s <= level_cap; ++s) {
                int sbar = n - j - s - 1;
                if (sbar < 0 || sbar > level_cap) continue;
                Rat c = e_check.eval(Rat(-s - 1));
                if (c == 0) continue;
                int sign = (s % 2 == 0) ? 1 : -1;
                for (int bp = 0; bp < m.basis_size; ++bp) {
                    if (Mj[alpha][bp] == 0) continue;
                    OpKey key;
                    key.hbar = 2;
                    key.derivs = {VarId::t(s, alpha), VarId::t(sbar, bp)};
                    op.add(key, rat(-1, 2) * sign * c * Mj[alpha][bp]);
                }
            }
        }
    }
    RatMatrix Ceta = chern_power(m, n + 1, ChernVariant::lowered);
    for (int a = 0; a < m.basis_size; ++a)
        for (int b = 0; b < m.basis_size; ++b) {
            if (Ceta[a][b] == 0) continue;
            OpKey key;
            key.hbar = -2;
            key.mono = Mono::var(VarId::t(0, a)).times(Mono::var(VarId::t(0, b)));
            op.add(key, rat(1, 2) * Ceta[a][b]);
        }
    if (n == 0) {
        Rat cst = (Rat(3 - m.dim) / 2 * m.cd_integral - m.c1cd1_integral) / 24;
        op.add(OpKey{}, cst);
    }
    return op;
}

// Quantization of multiplication by z^{2k-1}, written in shifted variables:
// -sum (shifted t)_r^a d/dt_{r+2k-1,a} + (hbar^2/2) sum_i (-1)^i eta^{ab}
// d/dt_{i,a} d/dt_{2k-2-i,b}.
inline DiffOp build_zhat(const TargetModel& m, int k, int level_cap) {
    if (k < 1) throw std::invalid_argument("build_zhat: k must be >= 1");
    DiffOp op;
    for (int r = 0; r + 2 * k - 1 <= level_cap; ++r)
        for (int a = 0; a < m.basis_size; ++a)
            detail::add_first_order(op, Rat(-1), Mono::one(), r, a, r + 2 * k - 1, a);
    for (int i = 0; i <= 2 * k - 2; ++i) {
        int ibar = 2 * k - 2 - i;
        if (i > level_cap || ibar > level_cap) continue;
        int sign = (i % 2 == 0) ? 1 : -1;
        for (int a = 0; a < m.basis_size; ++a)
            for (int b = 0; b < m.basis_size; ++b) {
                if (m.eta_inv[a][b] == 0) continue;
                OpKey key;
                key.hbar = 2;
                key.derivs = {VarId::t(i, a), VarId::t(ibar, b)};
                op.add(key, rat(1, 2) * sign * m.eta_inv[a][b]);
            }
    }
    return op;
}

// The vanishing operator carrying d/ds_l: the deformed free energy is its
// kernel.
inline DiffOp build_FP(const TargetModel& m, int l, int level_cap) {
    if (l < 1) throw std::invalid_argument("build_FP: l must be >= 1");
    DiffOp op;
    OpKey ds;
    ds.derivs = {VarId::s(l)};
    op.add(ds, Rat(-1));
    Rat pref = bernoulli(2 * l) / Rat(factorial(2 * l));
    return op + build_zhat(m, l, level_cap).scaled(pref);
}

// Closed form of the deformed constraint operator.
inline DiffOp build_LnE(const TargetModel& m, int n, int s_cap, int level_cap) {
    DiffOp op = build_Ln(m, n, level_cap);
    if (n == -1) {
        OpKey s1;
        s1.mono = Mono::var(VarId::s(1));
        op.add(s1, m.euler / 24);
    }
    int tuple_bound = 2 * level_cap + 2;
    for (int mm = 1; mm <= std::min(n + 1, s_cap); ++mm) {
        detail::for_each_k_tuple(mm, tuple_bound, [&](const std::vector<int>& ks) {
            Rat pref = detail::k_tuple_prefactor(ks);
            Mono smono;
            int shift_sum = 0;
            std::vector<int> shifts;
            for (int k : ks) {
                smono = smono.times(Mono::var(VarId::s(k)));
                shifts.push_back(2 * k - 1);
                shift_sum += 2 * k - 1;
            }
            for (int j = 0; j <= n + 1; ++j) {
                RatMatrix Cj = chern_power(m, j, ChernVariant::mixed);
                RatMatrix Mj = chern_power(m, j, ChernVariant::raised);
                for (int alpha = 0; alpha < m.basis_size; ++alpha) {
                    UniPoly de_hat =
                        iterated_delta(shifts, hat_check_e(EKind::hat, n + 1 - j, n, m, alpha));
                    if (!de_hat.is_zero()) {
                        for (int r = 0; r <= level_cap; ++r) {
                            int x = r + shift_sum + n - j;
                            if (x < 0 || x > level_cap) continue;
                            Rat c = pref * de_hat.eval(Rat(r));
                            if (c == 0) continue;
                            for (int beta = 0; beta < m.basis_size; ++beta)
                                detail::add_first_order(op, c * Cj[alpha][beta], smono, r, alpha,
                                                        x, beta);
                        }
                    }
                    UniPoly de_check =
                        iterated_delta(shifts, hat_check_e(EKind::check, n + 1 - j, n, m, alpha));
                    if (de_check.is_zero()) continue;
                    for (int s = 0; s <= level_cap; ++s) {
                        int sbar = shift_sum - s - 1 + n - j;
                        if (sbar < 0 || sbar > level_cap) continue;
                        Rat c = de_check.eval(Rat(-s - 1));
                        if (c == 0) continue;
                        int sign = (s % 2 == 0) ? 1 : -1;
                        for (int bp = 0; bp < m.basis_size; ++bp) {
                            if (Mj[alpha][bp] == 0) continue;
                            OpKey key;
                            key.hbar = 2;
                            key.mono = smono;
                            key.derivs = {VarId::t(s, alpha), VarId::t(sbar, bp)};
                            op.add(key, pref * rat(-1, 2) * sign * c * Mj[alpha][bp]);
                        }
                    }
                }
            }
        });
    }
    return op;
}

// The same operator assembled through iterated commutators with the
// quantized odd powers; must agree with build_LnE exactly.
inline DiffOp bch_LnE(const TargetModel& m, int n, int s_cap, int level_cap) {
    DiffOp op = build_Ln(m, n, level_cap);
    if (n == -1) {
        OpKey s1;
        s1.mono = Mono::var(VarId::s(1));
        op.add(s1, m.euler / 24);
    }
    int tuple_bound = 2 * level_cap + 2;
    // Brackets are taken at an enlarged working cap so that every pair whose
    // cancellation keeps a coefficient exact is present; the leftover
    // artifacts all carry an index above the final cap and are dropped when
    // the result is restricted back.
    int work_cap = level_cap + (n + 1) + tuple_bound;
    DiffOp Ln_big = build_Ln(m, n, work_cap);
    std::map<int, DiffOp> zhat_big;
    for (int mm = 1; mm <= std::min(n + 1, s_cap); ++mm) {
        detail::for_each_k_tuple(mm, tuple_bound, [&](const std::vector<int>& ks) {
            DiffOp nested = Ln_big;
            for (int k : ks) {
                auto it = zhat_big.find(k);
                if (it == zhat_big.end())
                    it = zhat_big.emplace(k, build_zhat(m, k, work_cap)).first;
                nested = commutator(nested, it->second);
            }
            nested = detail::restrict_levels(nested, level_cap);
            if (nested.is_zero()) return;
            Mono smono;
            for (int k : ks) smono = smono.times(Mono::var(VarId::s(k)));
            Rat pref = detail::k_tuple_prefactor(ks);
            for (auto& [key, c] : nested.terms) {
                OpKey shifted = key;
                shifted.mono = shifted.mono.times(smono);
                op.add(shifted, pref * c);
            }
        });
    }
    return op;
}

// ---- symbols on the loop space and their quantization --------------------

// A linear endomorphism of the space of cohomology-valued Laurent
// polynomials, given by its action on z^r phi_a as a finite list of
// (z-power, class, coeff).
struct SymplecticSymbol {
    std::function<std::vector<std::tuple<int, int, Rat>>(int, int)> apply;
};

inline SymplecticSymbol sym_z_odd(int k) {
    if (k < 1) throw std::invalid_argument("sym_z_odd: k must be >= 1");
    return {[k](int r, int a) {
        return std::vector<std::tuple<int, int, Rat>>{{r + 2 * k - 1, a, Rat(1)}};
    }};
}

inline SymplecticSymbol sym_l0(const TargetModel& m) {
    return {[m](int r, int a) {
        std::vector<std::tuple<int, int, Rat>> out;
        out.push_back({r, a, Rat(r) + b_lower(m, a)});
        for (int b = 0; b < m.basis_size; ++b)
            if (m.chern[a][b] != 0) out.push_back({r - 1, b, m.chern[a][b]});
        return out;
    }};
}

inline SymplecticSymbol sym_ln(const TargetModel& m, int n) {
    if (n < -1) throw std::invalid_argument("sym_ln: n must be >= -1");
    if (n == -1)
        return {[](int r, int a) {
            return std::vector<std::tuple<int, int, Rat>>{{r - 1, a, Rat(1)}};
        }};
    // l_n = l_0 (z l_0)^n, applied right to left
    return {[m, n](int r, int a) {
        std::map<std::pair<int, int>, Rat> cur;
        cur[{r, a}] = 1;
        auto l0 = sym_l0(m);
        auto step = [&](bool with_z) {
            std::map<std::pair<int, int>, Rat> next;
            for (auto& [ra, c] : cur)
                for (auto& [p, b, w] : l0.apply(ra.first, ra.second))
                    next[{p + (with_z ? 1 : 0), b}] += c * w;
            cur = std::move(next);
        };
        for (int i = 0; i < n; ++i) step(true);
        step(false);
        std::vector<std::tuple<int, int, Rat>> out;
        for (auto& [ra, c] : cur)
            if (c != 0) out.push_back({ra.first, ra.second, c});
        return out;
    }};
}

namespace detail {

// Residue pairing on monomials:
// Omega(z^a phi_alpha, z^b phi_beta) = (-1)^a eta_{alpha beta} [a + b == -1].
inline Rat omega_mono(const TargetModel& m, int a, int alpha, int b, int beta) {
    if (a + b != -1) return 0;
    Rat v = m.eta[alpha][beta];
    return (a % 2 == 0) ? v : -v;
}

// Omega(A u, v) for u = z^a phi_alpha, v = z^b phi_beta.
inline Rat omega_Au(const TargetModel& m, const SymplecticSymbol& A, int a, int alpha, int b,
                    int beta) {
    Rat acc = 0;
    for (auto& [p, g, c] : A.apply(a, alpha)) acc += c * omega_mono(m, p, g, b, beta);
    return acc;
}

}  // namespace detail

// Quantizes the quadratic Hamiltonian f -> 1/2 Omega(Af, f) of an
// infinitesimally symplectic symbol, in unshifted variables (the position
// coordinate q_n^a is written as t_n^a). Rules on Darboux-frame
// coefficients: qq -> t t / hbar^2, qp -> t d, pp -> hbar^2 d d. Checks
// Omega(Au, v) = Omega(Av, u) on a window around the caps first.
inline DiffOp quantize(const TargetModel& m, const SymplecticSymbol& A, int level_cap) {
    int W = level_cap + 2;
    for (int a = -W; a <= W; ++a)
        for (int b = -W; b <= W; ++b)
            for (int alpha = 0; alpha < m.basis_size; ++alpha)
                for (int beta = 0; beta < m.basis_size; ++beta)
                    if (detail::omega_Au(m, A, a, alpha, b, beta) !=
                        detail::omega_Au(m, A, b, beta, a, alpha))
                        throw std::runtime_error(
                            "quantize: symbol is not infinitesimally symplectic");

    // Darboux frames: e_{a,alpha} = z^a phi_alpha (a >= 0) carry q_a^alpha;
    // f_{mm,beta} = (-1)^{mm+1} eta^{beta gamma} z^{-mm-1} phi_gamma carry
    // p_mm^beta.
    auto apply_to_f = [&](int mm, int beta) {
        std::vector<std::tuple<int, int, Rat>> out;
        for (int g = 0; g < m.basis_size; ++g) {
            Rat c = m.eta_inv[beta][g];
            if (c == 0) continue;
            if (mm % 2 == 0) c = -c;  // (-1)^{mm+1}
            for (auto& [p, h, w] : A.apply(-mm - 1, g)) out.push_back({p, h, c * w});
        }
        return out;
    };
    // Omega of an image list against e- and f-frame vectors.
    auto pair_e = [&](const std::vector<std::tuple<int, int, Rat>>& lst, int b, int beta) {
        Rat acc = 0;
        for (auto& [p, g, c] : lst) acc += c * detail::omega_mono(m, p, g, b, beta);
        return acc;
    };
    auto pair_f = [&](const std::vector<std::tuple<int, int, Rat>>& lst, int mm, int beta) {
        // Omega(z^p phi_g, f_{mm,beta}) = -delta_{p,mm} delta_g^beta
        Rat acc = 0;
        for (auto& [p, g, c] : lst)
            if (p == mm && g == beta) acc -= c;
        return acc;
    };

    DiffOp op;
    for (int a = 0; a <= level_cap; ++a)
        for (int alpha = 0; alpha < m.basis_size; ++alpha) {
            auto Ae = A.apply(a, alpha);
            // qq monomials, (a,alpha) <= (b,beta)
            for (int b = a; b <= level_cap; ++b)
                for (int beta = (b == a ? alpha : 0); beta < m.basis_size; ++beta) {
                    bool diag = (b == a && beta == alpha);
                    Rat w = diag
                                ? pair_e(Ae, b, beta) / 2
                                : (pair_e(Ae, b, beta) + pair_e(A.apply(b, beta), a, alpha)) / 2;
                    if (w == 0) continue;
                    OpKey key;
                    key.hbar = -2;
                    key.mono = Mono::var(VarId::t(a, alpha)).times(Mono::var(VarId::t(b, beta)));
                    op.add(key, w);
                }
            // qp monomials
            for (int mm = 0; mm <= level_cap; ++mm)
                for (int beta = 0; beta < m.basis_size; ++beta) {
                    Rat w = (pair_f(Ae, mm, beta) + pair_e(apply_to_f(mm, beta), a, alpha)) / 2;
                    if (w == 0) continue;
                    OpKey key;
                    key.mono = Mono::var(VarId::t(a, alpha));
                    key.derivs = {VarId::t(mm, beta)};
                    op.add(key, w);
                }
        }
    for (int mm = 0; mm <= level_cap; ++mm)
        for (int beta = 0; beta < m.basis_size; ++beta) {
            auto Af = apply_to_f(mm, beta);
            for (int mm2 = mm; mm2 <= level_cap; ++mm2)
                for (int b2 = (mm2 == mm ? beta : 0); b2 < m.basis_size; ++b2) {
                    bool diag = (mm2 == mm && b2 == beta);
                    Rat w = diag ? pair_f(Af, mm2, b2) / 2
                                 : (pair_f(Af, mm2, b2) +
                                    pair_f(apply_to_f(mm2, b2), mm, beta)) /
                                       2;
                    if (w == 0) continue;
                    OpKey key;
                    key.hbar = 2;
                    key.derivs = {VarId::t(mm, beta), VarId::t(mm2, b2)};
                    op.add(key, w);
                }
        }
    return op;
}

// Rewrites an operator built on plain variables in terms of the shifted
// ones: the level-one identity-class variable is replaced by (itself - 1)
// wherever it multiplies.
inline DiffOp op_dilaton_shift(const DiffOp& in) {
    VarId slot = VarId::t(1, 0);
    DiffOp out;
    for (auto& [key, c] : in.terms) {
        int e = key.mono.exponent_of(slot);
        if (e == 0) {
            out.add(key, c);
            continue;
        }
        Mono rest = key.mono.times(Mono::var(slot, -e));
        for (int i = 0; i <= e; ++i) {
            OpKey k2 = key;
            k2.mono = rest.times(Mono::var(slot, i));
            Rat sign = ((e - i) % 2 == 0) ? 1 : -1;
            out.add(k2, c * sign * Rat(binomial(e, i)));
        }
    }
    return out;
}

// Central pairing of two quantized quadratic Hamiltonians, read off their
// hbar^2 dd and hbar^{-2} tt parts: diagonal pp/qq pairs weigh 2,
// off-diagonal 1, antisymmetrized.
inline Rat cocycle_pairing(const DiffOp& A, const DiffOp& B) {
    using PairMap = std::map<std::pair<VarId, VarId>, Rat>;
    auto collect = [](const DiffOp& op, PairMap& pp, PairMap& qq) {
        for (auto& [k, c] : op.terms) {
            if (k.hbar == 2 && k.mono.is_one() && k.derivs.size() == 2)
                pp[{k.derivs[0], k.derivs[1]}] += c;
            if (k.hbar == -2 && k.derivs.empty()) {
                std::vector<VarId> vars;
                for (auto& [v, e] : k.mono.factors)
                    for (int i = 0; i < e; ++i) vars.push_back(v);
                if (vars.size() == 2) qq[{vars[0], vars[1]}] += c;
            }
        }
    };
    PairMap ppA, qqA, ppB, qqB;
    collect(A, ppA, qqA);
    collect(B, ppB, qqB);
    Rat acc = 0;
    auto side = [&](const PairMap& pp, const PairMap& qq, int sign) {
        for (auto& [pr, cp] : pp) {
            auto it = qq.find(pr);
            if (it == qq.end()) continue;
            int weight = (pr.first == pr.second) ? 2 : 1;
            acc += cp * it->second * weight * sign;
        }
    };
    side(ppA, qqB, 1);
    side(ppB, qqA, -1);
    return acc;
}

// ---- connected action -----------------------------------------------------

namespace detail {

struct OpBounds {
    int max_deriv_level = 0;
    int max_mono_level = 0;
    int max_s_index = 1;
    int max_t_derivs = 0;
    int max_s_derivs = 0;
    int max_total_derivs = 0;
    int min_hbar = 0;
};

inline OpBounds scan_bounds(const DiffOp& op) {
    OpBounds b;
    for (auto& [k, c] : op.terms) {
        int td = 0, sd = 0;
        for (auto v : k.derivs) {
            if (v.kind() == VarId::Kind::t) {
                ++td;
                b.max_deriv_level = std::max(b.max_deriv_level, v.t_level());
            } else if (v.kind() == VarId::Kind::s) {
                ++sd;
                b.max_s_index = std::max(b.max_s_index, v.s_index());
            }
        }
        b.max_t_derivs = std::max(b.max_t_derivs, td);
        b.max_s_derivs = std::max(b.max_s_derivs, sd);
        b.max_total_derivs = std::max(b.max_total_derivs, td + sd);
        b.max_mono_level = std::max(b.max_mono_level, k.mono.max_t_level());
        b.max_s_index = std::max(b.max_s_index, k.mono.max_s_index());
        b.min_hbar = std::min(b.min_hbar, k.hbar);
    }
    return b;
}

}  // namespace detail

// One genus slice of the deformed free energy, with its s-monomials but
// without the hbar bookkeeping.
inline Series genus_block(CorrelatorEngine& eng, int g, const Truncation& tr) {
    Series out(tr);
    for_each_hodge_profile(tr, [&](const std::vector<int>& profile) {
        Mono smono;
        for (int j : profile) smono = smono.times(Mono::var(VarId::s((j + 1) / 2)));
        if (!tr.admits(smono)) return;
        Rat aut = Rat(multiset_aut(profile));
        Series block = double_bracket_profile(eng, g, {}, profile, tr);
        for (auto& [mono, v] : block.terms) out.add_term(mono.times(smono), v / aut);
    });
    return out;
}

// e^{-F} A e^{F} truncated: A's derivatives distribute over factors of the
// full free energy F = sum_g hbar^{2g-2} F_g, organized per genus block so
// that every admissible coefficient of the result is exact.
inline Series connected_action(const DiffOp& op, CorrelatorEngine& eng, const Truncation& tr) {
    auto bounds = detail::scan_bounds(op);
    if (bounds.max_total_derivs > 2)
        throw std::logic_error("connected_action: operators are at most second order");

    Truncation big = tr;
    big.t_degree = tr.t_degree + bounds.max_t_derivs;
    big.s_degree = tr.s_degree + bounds.max_s_derivs;
    big.max_level = std::max({tr.max_level, bounds.max_deriv_level, bounds.max_mono_level});
    big.s_index_max = std::max(tr.s_index_max, bounds.max_s_index);
    big.hbar_min = 0;
    big.hbar_max = 0;  // blocks carry no hbar; exponents are assigned below

    int g_cap = (tr.hbar_max + 2 - std::min(bounds.min_hbar, 0)) / 2 + 1;
    std::map<int, Series> blocks;
    auto block = [&](int g) -> const Series& {
        auto it = blocks.find(g);
        if (it == blocks.end()) it = blocks.emplace(g, genus_block(eng, g, big)).first;
        return it->second;
    };

    Series out(tr);
    auto emit = [&](const OpKey& key, const Rat& coeff, const Mono& extra, const Rat& extra_c,
                    int hbar_extra) {
        if (extra_c == 0) return;
        int h = key.hbar + hbar_extra;
        if (h < tr.hbar_min || h > tr.hbar_max) return;
        Mono mono = key.mono.times(extra);
        if (key.qpow != 0) mono = mono.times(Mono::var(VarId::q(), key.qpow));
        if (h != 0) mono = mono.times(Mono::var(VarId::hbar(), h));
        out.add_term(mono, coeff * extra_c);
    };

    for (auto& [key, c] : op.terms) {
        std::size_t nd = key.derivs.size();
        if (nd == 0) {
            emit(key, c, Mono::one(), 1, 0);
            continue;
        }
        if (nd == 1) {
            for (int g = 0; g <= g_cap; ++g) {
                if (key.hbar + 2 * g - 2 > tr.hbar_max) break;
                Series d = block(g).derivative(key.derivs[0]);
                for (auto& [mono, v] : d.terms) emit(key, c, mono, v, 2 * g - 2);
            }
            continue;
        }
        // two derivatives: both on one factor of F, or split across two
        for (int g = 0; g <= g_cap; ++g) {
            if (key.hbar + 2 * g - 2 > tr.hbar_max) break;
            Series dd = block(g).derivative(key.derivs[0]).derivative(key.derivs[1]);
            for (auto& [mono, v] : dd.terms) emit(key, c, mono, v, 2 * g - 2);
        }
        for (int g1 = 0; g1 <= g_cap; ++g1) {
            if (key.hbar + 2 * g1 - 4 > tr.hbar_max) break;
            Series d1 = block(g1).derivative(key.derivs[0]);
            if (d1.is_zero()) continue;
            for (int g2 = 0; g2 <= g_cap; ++g2) {
                int h_extra = 2 * g1 - 2 + 2 * g2 - 2;
                if (key.hbar + h_extra > tr.hbar_max) break;
                Series d2 = block(g2).derivative(key.derivs[1]);
                if (d2.is_zero()) continue;
                Series prod = d1 * d2;
                for (auto& [mono, v] : prod.terms) emit(key, c, mono, v, h_extra);
            }
        }
    }
    return out;
}

}  // namespace hviro
