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

#include <hviro/rational.hpp>

#include <algorithm>
#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace hviro {

// One formal variable: t_n^alpha (descendant coordinates, alpha 0-based in
// code), s_k (Hodge-character couplings, k >= 1), hbar, or the Novikov q.
// Encoded so that the natural integer order sorts t-variables by (level,
// class) first, then s, hbar, q.
struct VarId {
    std::uint32_t code = 0;

    enum class Kind : std::uint8_t { t = 0, s = 1, hbar = 2, q = 3 };

    static VarId t(int level, int alpha) {
        if (level < 0 || level > 0xFFFFF || alpha < 0 || alpha > 0xFF)
            throw std::domain_error("VarId::t: level or class out of range");
        return {(std::uint32_t)level << 8 | (std::uint32_t)alpha};
    }
    static VarId s(int k) {
        if (k < 1 || k > 0xFFFFF) throw std::domain_error("VarId::s: index out of range");
        return {1u << 28 | (std::uint32_t)k};
    }
    static VarId hbar() { return {2u << 28}; }
    static VarId q() { return {3u << 28}; }

    Kind kind() const { return (Kind)(code >> 28); }
    int t_level() const { return (int)((code >> 8) & 0xFFFFF); }
    int t_alpha() const { return (int)(code & 0xFF); }
    int s_index() const { return (int)(code & 0xFFFFF); }

    auto operator<=>(const VarId&) const = default;
};

// Exponent vector: sorted by VarId with no zero exponents. Only hbar may
// carry a negative exponent.
struct Mono {
    std::vector<std::pair<VarId, int>> factors;

    auto operator<=>(const Mono&) const = default;

    static Mono one() { return {}; }
    static Mono var(VarId v, int e = 1) {
        Mono m;
        if (e != 0) m.factors.push_back({v, e});
        return m;
    }

    bool is_one() const { return factors.empty(); }

    int exponent_of(VarId v) const {
        for (auto& [w, e] : factors)
            if (w == v) return e;
        return 0;
    }

    Mono times(const Mono& o) const {
        Mono r;
        r.factors.reserve(factors.size() + o.factors.size());
        auto a = factors.begin(), b = o.factors.begin();
        while (a != factors.end() || b != o.factors.end()) {
            if (b == o.factors.end() || (a != factors.end() && a->first < b->first)) {
                r.factors.push_back(*a++);
            } else if (a == factors.end() || b->first < a->first) {
                r.factors.push_back(*b++);
            } else {
                int e = a->second + b->second;
                if (e != 0) r.factors.push_back({a->first, e});
                ++a, ++b;
            }
        }
        return r;
    }

    int t_degree() const {
        int d = 0;
        for (auto& [v, e] : factors)
            if (v.kind() == VarId::Kind::t) d += e;
        return d;
    }
    int s_degree() const {
        int d = 0;
        for (auto& [v, e] : factors)
            if (v.kind() == VarId::Kind::s) d += e;
        return d;
    }
    int hbar_exp() const { return exponent_of(VarId::hbar()); }
    int q_exp() const { return exponent_of(VarId::q()); }
    int max_t_level() const {
        int l = 0;
        for (auto& [v, e] : factors)
            if (v.kind() == VarId::Kind::t) l = std::max(l, v.t_level());
        return l;
    }
    int max_s_index() const {
        int k = 0;
        for (auto& [v, e] : factors)
            if (v.kind() == VarId::Kind::s) k = std::max(k, v.s_index());
        return k;
    }
};

// Monomial admission policy. The hbar window is [-2, 2*genus_cap - 2] in the
// standard setup; it is stored explicitly so internal computations can widen
// it, but s indices and every degree bound must be finite.
struct Truncation {
    int t_degree = 2;
    int max_level = 6;
    int s_degree = 2;
    int s_index_max = 3;
    int q_max = 2;
    int hbar_min = -2;
    int hbar_max = 2;

    auto operator<=>(const Truncation&) const = default;

    static Truncation standard(int genus_cap = 2) {
        Truncation tr;
        tr.hbar_max = 2 * genus_cap - 2;
        return tr;
    }

    bool admits(const Mono& m) const {
        int td = 0, sd = 0;
        for (auto& [v, e] : m.factors) {
            switch (v.kind()) {
                case VarId::Kind::t:
                    if (e < 0 || v.t_level() > max_level) return false;
                    td += e;
                    break;
                case VarId::Kind::s:
                    if (e < 0 || v.s_index() > s_index_max) return false;
                    sd += e;
                    break;
                case VarId::Kind::hbar:
                    if (e < hbar_min || e > hbar_max) return false;
                    break;
                case VarId::Kind::q:
                    if (e < 0 || e > q_max) return false;
                    break;
            }
        }
        return td <= t_degree && sd <= s_degree;
    }

    Truncation intersect(const Truncation& o) const {
        Truncation r;
        r.t_degree = std::min(t_degree, o.t_degree);
        r.max_level = std::min(max_level, o.max_level);
        r.s_degree = std::min(s_degree, o.s_degree);
        r.s_index_max = std::min(s_index_max, o.s_index_max);
        r.q_max = std::min(q_max, o.q_max);
        r.hbar_min = std::max(hbar_min, o.hbar_min);
        r.hbar_max = std::min(hbar_max, o.hbar_max);
        return r;
    }
};

// Sparse exact series under a truncation policy. Stored monomials always
// satisfy the policy; arithmetic silently drops what falls outside it.
class Series {
  public:
    Truncation trunc;
    std::map<Mono, Rat> terms;

    Series() = default;
    explicit Series(Truncation tr) : trunc(tr) {}

    static Series zero(const Truncation& tr) { return Series(tr); }
    static Series constant(const Truncation& tr, Rat v) {
        Series r(tr);
        r.add_term(Mono::one(), std::move(v));
        return r;
    }
    static Series variable(const Truncation& tr, VarId v, int e = 1) {
        Series r(tr);
        r.add_term(Mono::var(v, e), Rat(1));
        return r;
    }

    bool is_zero() const { return terms.empty(); }

    void add_term(const Mono& m, Rat v) {
        if (v == 0 || !trunc.admits(m)) return;
        auto [it, fresh] = terms.emplace(m, v);
        if (!fresh) {
            it->second += v;
            if (it->second == 0) terms.erase(it);
        }
    }

    Rat coefficient_of(const Mono& m) const {
        auto it = terms.find(m);
        return it == terms.end() ? Rat(0) : it->second;
    }

    Series truncated(const Truncation& tr) const {
        Series r(tr);
        for (auto& [m, v] : terms) r.add_term(m, v);
        return r;
    }

    friend Series operator+(const Series& a, const Series& b) {
        if (a.trunc != b.trunc)
            throw std::runtime_error("series add: incompatible truncation policies");
        Series r = a;
        for (auto& [m, v] : b.terms) r.add_term(m, v);
        return r;
    }

    friend Series operator-(const Series& a, const Series& b) {
        if (a.trunc != b.trunc)
            throw std::runtime_error("series sub: incompatible truncation policies");
        Series r = a;
        for (auto& [m, v] : b.terms) r.add_term(m, -v);
        return r;
    }

    friend Series operator*(const Series& a, const Series& b) {
        Series r(a.trunc == b.trunc ? a.trunc : a.trunc.intersect(b.trunc));
        for (auto& [ma, va] : a.terms)
            for (auto& [mb, vb] : b.terms) r.add_term(ma.times(mb), va * vb);
        return r;
    }

    Series scaled(const Rat& c) const {
        Series r(trunc);
        if (c == 0) return r;
        for (auto& [m, v] : terms) r.terms.emplace(m, v * c);
        return r;
    }

    // Formal partial derivative; works for t, s and q variables alike.
    Series derivative(VarId v) const {
        Series r(trunc);
        for (auto& [m, c] : terms) {
            int e = m.exponent_of(v);
            if (e == 0) continue;
            r.add_term(m.times(Mono::var(v, -1)), c * e);
        }
        return r;
    }

    // Multiplies by a single variable power (used for hbar bookkeeping).
    Series shifted_by(VarId v, int e) const {
        Series r(trunc);
        Mono f = Mono::var(v, e);
        for (auto& [m, c] : terms) r.add_term(m.times(f), c);
        return r;
    }

    friend bool operator==(const Series& a, const Series& b) {
        return a.terms == b.terms;  // policies may differ; values decide
    }
};

// t-tilde_n^alpha = t_n^alpha - delta_{n,1} delta_{alpha,1}: the dilaton
// shift, as a one- or two-term series.
inline bool is_dilaton_slot(int level, int alpha) { return level == 1 && alpha == 0; }

inline Series dilaton_shift(const Truncation& tr, int level, int alpha) {
    Series r = Series::variable(tr, VarId::t(level, alpha));
    if (is_dilaton_slot(level, alpha)) r.add_term(Mono::one(), Rat(-1));
    return r;
}

// ---- text serialization -------------------------------------------------
// One term per line: `<monomial> ; <rational>`. Monomial factors are
// space-separated `t(n,a)`, `s(k)`, `h`, `q` with an optional `^exp`; the
// empty monomial prints as `1`. Class indices are 1-based in text. A header
// line `truncation ...` carries the policy.

inline std::string var_to_string(VarId v) {
    switch (v.kind()) {
        case VarId::Kind::t:
            return "t(" + std::to_string(v.t_level()) + "," + std::to_string(v.t_alpha() + 1) + ")";
        case VarId::Kind::s: return "s(" + std::to_string(v.s_index()) + ")";
        case VarId::Kind::hbar: return "h";
        case VarId::Kind::q: return "q";
    }
    return "?";
}

inline std::string mono_to_string(const Mono& m) {
    if (m.is_one()) return "1";
    std::string out;
    for (auto& [v, e] : m.factors) {
        if (!out.empty()) out += " ";
        out += var_to_string(v);
        if (e != 1) out += "^" + std::to_string(e);
    }
    return out;
}

inline VarId var_from_string(const std::string& tok) {
    auto bad = [&] { return std::runtime_error("bad variable '" + tok + "'"); };
    if (tok == "h") return VarId::hbar();
    if (tok == "q") return VarId::q();
    if (tok.size() >= 4 && tok[0] == 't' && tok[1] == '(' && tok.back() == ')') {
        std::string body = tok.substr(2, tok.size() - 3);
        std::size_t comma = body.find(',');
        if (comma == std::string::npos) throw bad();
        try {
            int n = std::stoi(body.substr(0, comma));
            int a = std::stoi(body.substr(comma + 1));
            return VarId::t(n, a - 1);
        } catch (const std::exception&) {
            throw bad();
        }
    }
    if (tok.size() >= 4 && tok[0] == 's' && tok[1] == '(' && tok.back() == ')') {
        try {
            return VarId::s(std::stoi(tok.substr(2, tok.size() - 3)));
        } catch (const std::exception&) {
            throw bad();
        }
    }
    throw bad();
}

inline Mono mono_from_string(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> toks;
    std::string tok;
    while (in >> tok) toks.push_back(tok);
    if (toks.empty()) throw std::runtime_error("mono_from_string: empty monomial");
    if (toks.size() == 1 && toks[0] == "1") return Mono::one();
    Mono m;
    for (auto& t : toks) {
        std::size_t caret = t.rfind('^');
        std::size_t paren = t.find(')');
        bool has_exp = caret != std::string::npos &&
                       (paren == std::string::npos || caret > paren);
        std::string name = has_exp ? t.substr(0, caret) : t;
        int e = 1;
        if (has_exp) {
            try {
                std::size_t used = 0;
                e = std::stoi(t.substr(caret + 1), &used);
                if (used != t.size() - caret - 1) throw std::invalid_argument(t);
            } catch (const std::exception&) {
                throw std::runtime_error("mono_from_string: bad exponent in '" + t + "'");
            }
        }
        m = m.times(Mono::var(var_from_string(name), e));
    }
    return m;
}

inline void write_series(std::ostream& out, const Series& s) {
    out << "truncation t_degree=" << s.trunc.t_degree << " max_level=" << s.trunc.max_level
        << " s_degree=" << s.trunc.s_degree << " s_index_max=" << s.trunc.s_index_max
        << " q_max=" << s.trunc.q_max << " hbar_min=" << s.trunc.hbar_min
        << " hbar_max=" << s.trunc.hbar_max << "\n";
    for (auto& [m, v] : s.terms) out << mono_to_string(m) << " ; " << rat_to_string(v) << "\n";
}

inline Series read_series(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("truncation", 0) != 0)
        throw std::runtime_error("read_series: missing truncation header");
    Truncation tr;
    {
        std::istringstream hs(line);
        std::string word;
        hs >> word;
        while (hs >> word) {
            std::size_t eq = word.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("read_series: bad header field '" + word + "'");
            std::string key = word.substr(0, eq);
            int val = std::stoi(word.substr(eq + 1));
            if (key == "t_degree") tr.t_degree = val;
            else if (key == "max_level") tr.max_level = val;
            else if (key == "s_degree") tr.s_degree = val;
            else if (key == "s_index_max") tr.s_index_max = val;
            else if (key == "q_max") tr.q_max = val;
            else if (key == "hbar_min") tr.hbar_min = val;
            else if (key == "hbar_max") tr.hbar_max = val;
            else throw std::runtime_error("read_series: unknown header field '" + key + "'");
        }
    }
    Series s(tr);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t semi = line.rfind(';');
        if (semi == std::string::npos)
            throw std::runtime_error("read_series: missing ';' in '" + line + "'");
        Mono m = mono_from_string(line.substr(0, semi));
        Rat v = rat_from_string([&] {
            std::string t = line.substr(semi + 1);
            std::size_t a = t.find_first_not_of(" \t");
            std::size_t b = t.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : t.substr(a, b - a + 1);
        }());
        s.add_term(m, v);
    }
    return s;
}

}  // namespace hviro
