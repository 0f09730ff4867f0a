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

#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace hviro {

using RatMatrix = std::vector<std::vector<Rat>>;

inline RatMatrix mat_identity(int n) {
    RatMatrix m(n, std::vector<Rat>(n, Rat(0)));
    for (int i = 0; i < n; ++i) m[i][i] = 1;
    return m;
}

inline RatMatrix mat_mul(const RatMatrix& a, const RatMatrix& b) {
    int n = (int)a.size(), k = (int)b.size(), p = k ? (int)b[0].size() : 0;
    RatMatrix c(n, std::vector<Rat>(p, Rat(0)));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) {
            if (a[i][j] == 0) continue;
            for (int l = 0; l < p; ++l) c[i][l] += a[i][j] * b[j][l];
        }
    return c;
}

inline bool mat_symmetric(const RatMatrix& a) {
    int n = (int)a.size();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (a[i][j] != a[j][i]) return false;
    return true;
}

// Exact Gauss-Jordan inverse; throws if singular.
inline RatMatrix mat_inverse(const RatMatrix& a) {
    int n = (int)a.size();
    RatMatrix work = a, inv = mat_identity(n);
    for (int col = 0; col < n; ++col) {
        int pivot = -1;
        for (int r = col; r < n; ++r)
            if (work[r][col] != 0) {
                pivot = r;
                break;
            }
        if (pivot < 0) throw std::runtime_error("mat_inverse: singular matrix");
        std::swap(work[pivot], work[col]);
        std::swap(inv[pivot], inv[col]);
        Rat p = work[col][col];
        for (int j = 0; j < n; ++j) {
            work[col][j] /= p;
            inv[col][j] /= p;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col || work[r][col] == 0) continue;
            Rat f = work[r][col];
            for (int j = 0; j < n; ++j) {
                work[r][j] -= f * work[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    return inv;
}

// Finite cohomological data of a target variety. Basis indices are 0-based in
// code; basis class 0 is the identity. Immutable after construction.
struct TargetModel {
    std::string name;
    int basis_size = 0;  // N
    int dim = 0;         // complex dimension d
    std::vector<int> hol_deg;
    RatMatrix eta;
    RatMatrix eta_inv;
    RatMatrix chern;  // chern[a][b] is the phi_b coefficient of c_1 cup phi_a
    Rat euler;
    Rat cd_integral;
    Rat c1cd1_integral;
    bool has_novikov = false;
    Rat novikov_c1_pairing = 0;  // <c_1(X), A> for the positive generator A of H_2
};

// b_alpha = p_alpha - (d-1)/2 and its partner b^alpha = 1 - b_alpha.
inline Rat b_lower(const TargetModel& m, int alpha) {
    if (alpha < 0 || alpha >= m.basis_size) throw std::out_of_range("b_lower: basis index out of range");
    return Rat(m.hol_deg[alpha]) - Rat(m.dim - 1, 2);
}

inline Rat b_upper(const TargetModel& m, int alpha) {
    return Rat(1) - b_lower(m, alpha);
}

inline std::pair<Rat, Rat> b_values(const TargetModel& m, int alpha) {
    return {b_lower(m, alpha), b_upper(m, alpha)};
}

enum class ChernVariant { mixed, raised, lowered };

// Powers of the first-Chern multiplication matrix:
//   mixed   (C^j)_a^b,
//   lowered <c_1^j cup phi_a, phi_b>       = C^j eta,
//   raised  <c_1^j cup phi^a, phi^b>       = eta^{-1} C^j.
inline RatMatrix chern_power(const TargetModel& m, int j, ChernVariant variant) {
    if (j < 0) throw std::domain_error("chern_power: negative power");
    RatMatrix p = mat_identity(m.basis_size);
    for (int i = 0; i < j; ++i) p = mat_mul(p, m.chern);
    switch (variant) {
        case ChernVariant::mixed: return p;
        case ChernVariant::lowered: return mat_mul(p, m.eta);
        case ChernVariant::raised: return mat_mul(m.eta_inv, p);
    }
    throw std::logic_error("chern_power: bad variant");
}

// Enforces every structural invariant of the type. `where` maps a field name
// to a source line for diagnostics (empty for builtins).
inline void validate_model(const TargetModel& m, const std::map<std::string, int>& where = {}) {
    auto fail = [&](const std::string& field, const std::string& msg) {
        std::string loc;
        auto it = where.find(field);
        if (it != where.end()) loc = "line " + std::to_string(it->second) + ": ";
        throw std::runtime_error("model '" + m.name + "': " + loc + msg);
    };
    int n = m.basis_size;
    if (n <= 0) fail("rank", "rank must be positive");
    if (m.dim < 0) fail("dimension", "dimension must be nonnegative");
    if ((int)m.hol_deg.size() != n) fail("degrees", "degrees list must have one entry per basis class");
    if (m.hol_deg[0] != 0) fail("degrees", "first basis class must have degree 0 (identity)");
    if ((int)m.eta.size() != n) fail("eta", "eta must be a rank x rank matrix");
    for (auto& row : m.eta)
        if ((int)row.size() != n) fail("eta", "eta must be a rank x rank matrix");
    if ((int)m.chern.size() != n) fail("chern", "chern must be a rank x rank matrix");
    for (auto& row : m.chern)
        if ((int)row.size() != n) fail("chern", "chern must be a rank x rank matrix");
    if (!mat_symmetric(m.eta)) fail("eta", "eta must be symmetric");
    try {
        (void)mat_inverse(m.eta);
    } catch (const std::exception&) {
        fail("eta", "eta must be invertible");
    }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            if (m.eta[a][b] != 0 && m.hol_deg[a] + m.hol_deg[b] != m.dim)
                fail("eta", "eta pairs classes whose degrees do not sum to the dimension");
            if (m.chern[a][b] != 0 && m.hol_deg[b] != m.hol_deg[a] + 1)
                fail("chern", "chern must raise holomorphic degree by one");
        }
    if (!mat_symmetric(mat_mul(m.chern, m.eta)))
        fail("chern", "chern must be self-adjoint for eta (lowered matrix symmetric)");
}

inline TargetModel builtin_model(const std::string& name) {
    TargetModel m;
    if (name == "point") {
        m.name = "point";
        m.basis_size = 1;
        m.dim = 0;
        m.hol_deg = {0};
        m.eta = {{Rat(1)}};
        m.chern = {{Rat(0)}};
        m.euler = 1;
        m.cd_integral = 1;
        m.c1cd1_integral = 0;
        m.has_novikov = false;
    } else if (name == "p1") {
        m.name = "p1";
        m.basis_size = 2;
        m.dim = 1;
        m.hol_deg = {0, 1};
        m.eta = {{Rat(0), Rat(1)}, {Rat(1), Rat(0)}};
        m.chern = {{Rat(0), Rat(2)}, {Rat(0), Rat(0)}};
        m.euler = 2;
        m.cd_integral = 2;
        m.c1cd1_integral = 2;
        m.has_novikov = true;
        m.novikov_c1_pairing = 2;
    } else {
        throw std::runtime_error("builtin_model: unknown model '" + name + "'");
    }
    m.eta_inv = mat_inverse(m.eta);
    validate_model(m);
    return m;
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline RatMatrix parse_matrix(const std::string& value, int line, const std::string& key) {
    RatMatrix rows;
    std::string v = value;
    std::size_t pos = 0;
    while (true) {
        std::size_t semi = v.find(';', pos);
        std::string row_text = v.substr(pos, semi == std::string::npos ? std::string::npos : semi - pos);
        std::istringstream in(row_text);
        std::vector<Rat> row;
        std::string tok;
        while (in >> tok) {
            try {
                row.push_back(rat_from_string(tok));
            } catch (const std::exception&) {
                throw std::runtime_error("line " + std::to_string(line) + ": bad rational '" + tok +
                                         "' in " + key);
            }
        }
        if (row.empty())
            throw std::runtime_error("line " + std::to_string(line) + ": empty matrix row in " + key);
        rows.push_back(std::move(row));
        if (semi == std::string::npos) break;
        pos = semi + 1;
    }
    return rows;
}

}  // namespace detail

// Flat key = value format; '#' starts a comment; matrices are row-major with
// ';' between rows, e.g. `eta = 0/1 1/1 ; 1/1 0/1`. Keys:
//   name, dimension, rank, degrees, eta, chern, euler, cd_integral,
//   c1cd1_integral, novikov (optional pairing value; omit for none).
// Violations of any structural invariant are reported with the line of the
// offending key.
inline TargetModel load_model(std::istream& in) {
    TargetModel m;
    std::map<std::string, int> where;
    std::map<std::string, std::pair<std::string, int>> kv;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        std::size_t hash = s.find('#');
        if (hash != std::string::npos) s = s.substr(0, hash);
        s = detail::trim(s);
        if (s.empty()) continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("line " + std::to_string(line) + ": expected key = value");
        std::string key = detail::trim(s.substr(0, eq));
        std::string value = detail::trim(s.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::runtime_error("line " + std::to_string(line) + ": expected key = value");
        if (kv.count(key))
            throw std::runtime_error("line " + std::to_string(line) + ": duplicate key '" + key + "'");
        kv[key] = {value, line};
        where[key] = line;
    }
    auto need = [&](const std::string& key) -> std::pair<std::string, int> {
        auto it = kv.find(key);
        if (it == kv.end()) throw std::runtime_error("missing required key '" + key + "'");
        return it->second;
    };
    auto as_int = [&](const std::string& key) {
        auto [v, ln] = need(key);
        try {
            std::size_t used = 0;
            int r = std::stoi(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw std::runtime_error("line " + std::to_string(ln) + ": bad integer for '" + key + "'");
        }
    };
    auto as_rat = [&](const std::string& key) {
        auto [v, ln] = need(key);
        try {
            return rat_from_string(v);
        } catch (const std::exception&) {
            throw std::runtime_error("line " + std::to_string(ln) + ": bad rational for '" + key + "'");
        }
    };

    m.name = need("name").first;
    m.dim = as_int("dimension");
    m.basis_size = as_int("rank");
    {
        auto [v, ln] = need("degrees");
        std::istringstream ds(v);
        std::string tok;
        while (ds >> tok) {
            try {
                m.hol_deg.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw std::runtime_error("line " + std::to_string(ln) + ": bad integer '" + tok +
                                         "' in degrees");
            }
        }
    }
    {
        auto [v, ln] = need("eta");
        m.eta = detail::parse_matrix(v, ln, "eta");
    }
    {
        auto [v, ln] = need("chern");
        m.chern = detail::parse_matrix(v, ln, "chern");
    }
    m.euler = as_rat("euler");
    m.cd_integral = as_rat("cd_integral");
    m.c1cd1_integral = as_rat("c1cd1_integral");
    if (kv.count("novikov")) {
        m.has_novikov = true;
        m.novikov_c1_pairing = as_rat("novikov");
    }
    for (auto& [key, vp] : kv) {
        static const std::vector<std::string> known = {"name",  "dimension", "rank",
                                                       "degrees", "eta",     "chern",
                                                       "euler", "cd_integral", "c1cd1_integral",
                                                       "novikov"};
        bool ok = false;
        for (auto& k : known) ok = ok || k == key;
        if (!ok)
            throw std::runtime_error("line " + std::to_string(vp.second) + ": unknown key '" + key + "'");
    }
    validate_model(m, where);  // size checks before inverting eta
    m.eta_inv = mat_inverse(m.eta);
    return m;
}

inline TargetModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
    return load_model(in);
}

}  // namespace hviro
