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

#include <hviro/model.hpp>
#include <hviro/rational.hpp>

#include <mutex>
#include <tuple>
#include <vector>

namespace hviro {

// Dense univariate polynomial over Rat, stored low degree first with no
// trailing zero coefficients.
struct UniPoly {
    std::vector<Rat> c;

    UniPoly() = default;
    explicit UniPoly(Rat constant) {
        if (constant != 0) c.push_back(std::move(constant));
    }

    static UniPoly x_plus(Rat a) {
        UniPoly p;
        p.c = {std::move(a), Rat(1)};
        return p;
    }

    void normalize() {
        while (!c.empty() && c.back() == 0) c.pop_back();
    }

    bool is_zero() const { return c.empty(); }
    int degree() const { return (int)c.size() - 1; }  // -1 for the zero polynomial

    Rat eval(const Rat& x) const {
        Rat r = 0;
        for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
        return r;
    }

    friend bool operator==(const UniPoly& a, const UniPoly& b) { return a.c == b.c; }

    friend UniPoly operator+(const UniPoly& a, const UniPoly& b) {
        UniPoly r;
        r.c.resize(std::max(a.c.size(), b.c.size()), Rat(0));
        for (std::size_t i = 0; i < a.c.size(); ++i) r.c[i] += a.c[i];
        for (std::size_t i = 0; i < b.c.size(); ++i) r.c[i] += b.c[i];
        r.normalize();
        return r;
    }

    friend UniPoly operator-(const UniPoly& a, const UniPoly& b) {
        UniPoly r;
        r.c.resize(std::max(a.c.size(), b.c.size()), Rat(0));
        for (std::size_t i = 0; i < a.c.size(); ++i) r.c[i] += a.c[i];
        for (std::size_t i = 0; i < b.c.size(); ++i) r.c[i] -= b.c[i];
        r.normalize();
        return r;
    }

    friend UniPoly operator*(const UniPoly& a, const UniPoly& b) {
        if (a.is_zero() || b.is_zero()) return {};
        UniPoly r;
        r.c.assign(a.c.size() + b.c.size() - 1, Rat(0));
        for (std::size_t i = 0; i < a.c.size(); ++i) {
            if (a.c[i] == 0) continue;
            for (std::size_t j = 0; j < b.c.size(); ++j) r.c[i + j] += a.c[i] * b.c[j];
        }
        r.normalize();
        return r;
    }

    UniPoly scaled(const Rat& s) const {
        if (s == 0) return {};
        UniPoly r = *this;
        for (auto& x : r.c) x *= s;
        return r;
    }

    // p(x + a) by binomial expansion.
    UniPoly shifted(const Rat& a) const {
        UniPoly r;
        if (is_zero()) return r;
        r.c.assign(c.size(), Rat(0));
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (c[i] == 0) continue;
            Rat pow = 1;
            for (std::size_t j = 0; j <= i; ++j) {
                r.c[i - j] += c[i] * Rat(binomial((int)i, (int)j)) * pow;
                pow *= a;
            }
        }
        r.normalize();
        return r;
    }
};

// e_j(x_0..x_{n}) as [t^{count-j}] prod (t + x_i), by the usual one-pass
// update. j outside [0, count] gives 0; the empty list gives e_0 = 1.
inline UniPoly elem_sym(int j, const std::vector<UniPoly>& xs) {
    int count = (int)xs.size();
    if (j < 0 || j > count) return {};
    std::vector<UniPoly> e(j + 1);
    e[0] = UniPoly(Rat(1));
    for (int i = 0; i < count; ++i)
        for (int deg = std::min(j, i + 1); deg >= 1; --deg) e[deg] = e[deg] + xs[i] * e[deg - 1];
    return e[j];
}

inline Rat elem_sym(int j, const std::vector<Rat>& xs) {
    std::vector<UniPoly> lift;
    lift.reserve(xs.size());
    for (auto& x : xs) lift.push_back(UniPoly(x));
    UniPoly r = elem_sym(j, lift);
    return r.is_zero() ? Rat(0) : r.c[0];
}

enum class EKind { hat, check };

// e_j(x + b, x + 1 + b, ..., x + n + b) where b is b_alpha for hat and
// b^alpha for check. n = -1 means the empty product (e_0 = 1). Polynomials
// depend only on (j, n, b), which keys the cache.
inline const UniPoly& shifted_elem_sym(int j, int n, const Rat& b) {
    static std::mutex mu;
    static std::map<std::tuple<int, int, Rat>, UniPoly> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_tuple(j, n, b);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<UniPoly> xs;
    for (int i = 0; i <= n; ++i) xs.push_back(UniPoly::x_plus(Rat(i) + b));
    return cache.emplace(key, elem_sym(j, xs)).first->second;
}

inline const UniPoly& hat_check_e(EKind kind, int j, int n, const TargetModel& m, int alpha) {
    if (n < -1) throw std::domain_error("hat_check_e: n must be >= -1");
    Rat b = kind == EKind::hat ? b_lower(m, alpha) : b_upper(m, alpha);
    return shifted_elem_sym(j, n, b);
}

// Delta_k f = f(x + k) - f(x), composed left to right over `shifts`.
inline UniPoly iterated_delta(const std::vector<int>& shifts, UniPoly f) {
    for (int k : shifts) {
        if (k <= 0) throw std::domain_error("iterated_delta: shifts must be positive");
        f = f.shifted(Rat(k)) - f;
    }
    return f;
}

}  // namespace hviro
