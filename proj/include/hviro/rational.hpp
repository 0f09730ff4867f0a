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

#include <boost/multiprecision/cpp_int.hpp>

#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace hviro {

// Exact rational scalar. cpp_rational keeps values in lowest terms with a
// positive denominator, so equality is plain value equality.
using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline Rat rat(long long num, long long den = 1) {
    if (den == 0) throw std::domain_error("rat: zero denominator");
    // cpp_rational's two-argument constructor rejects negative denominators.
    if (den < 0) {
        num = -num;
        den = -den;
    }
    return Rat(Int(num), Int(den));
}

inline Int rat_num(const Rat& x) { return boost::multiprecision::numerator(x); }
inline Int rat_den(const Rat& x) { return boost::multiprecision::denominator(x); }

// Renders "p/q" in lowest terms, "p" when q == 1.
inline std::string rat_to_string(const Rat& x) {
    std::string s = rat_num(x).str();
    if (rat_den(x) != 1) {
        s += "/";
        s += rat_den(x).str();
    }
    return s;
}

// Accepts an optional sign, digits, and an optional "/digits" tail.
inline Rat rat_from_string(const std::string& text) {
    auto bad = [&]() -> std::runtime_error {
        return std::runtime_error("rat_from_string: malformed rational '" + text + "'");
    };
    if (text.empty()) throw bad();
    std::size_t slash = text.find('/');
    auto check_int = [&](const std::string& part, bool allow_sign) {
        if (part.empty()) throw bad();
        std::size_t i = 0;
        if (allow_sign && (part[0] == '+' || part[0] == '-')) i = 1;
        if (i == part.size()) throw bad();
        for (; i < part.size(); ++i)
            if (part[i] < '0' || part[i] > '9') throw bad();
    };
    // cpp_int's parser rejects a leading '+'.
    auto parse_int = [](std::string part) {
        if (!part.empty() && part[0] == '+') part.erase(0, 1);
        return Int(part);
    };
    if (slash == std::string::npos) {
        check_int(text, true);
        return parse_int(text);
    }
    std::string num = text.substr(0, slash);
    std::string den = text.substr(slash + 1);
    check_int(num, true);
    check_int(den, false);
    Int d(den);
    if (d == 0) throw std::runtime_error("rat_from_string: zero denominator '" + text + "'");
    return Rat(parse_int(num), d);
}

inline Int factorial(int n) {
    if (n < 0) throw std::domain_error("factorial: negative argument");
    Int r = 1;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

// (2k-1)!! = 1*3*5*...*(2k-1); double_factorial(-1) = 1 by convention.
inline Int odd_double_factorial(int m) {
    if (m < -1 || m % 2 == 0) throw std::domain_error("odd_double_factorial: argument must be odd and >= -1");
    Int r = 1;
    for (int i = 3; i <= m; i += 2) r *= i;
    return r;
}

inline Int binomial(int n, int k) {
    if (k < 0 || k > n || n < 0) return 0;
    if (k > n - k) k = n - k;
    Int r = 1;
    for (int i = 1; i <= k; ++i) {
        r *= (n - k + i);
        r /= i;
    }
    return r;
}

// Bernoulli numbers with B_1 = -1/2, computed from
//   sum_{j=0}^{m} binom(m+1, j) B_j = 0  for m >= 1.
// Values are cached; safe to call from several threads.
inline Rat bernoulli(int m) {
    if (m < 0) throw std::domain_error("bernoulli: negative index");
    static std::mutex mu;
    static std::vector<Rat> cache{Rat(1)};
    std::lock_guard<std::mutex> lock(mu);
    while ((int)cache.size() <= m) {
        int n = (int)cache.size();  // computing B_n
        Rat acc = 0;
        for (int j = 0; j < n; ++j) acc += Rat(binomial(n + 1, j)) * cache[j];
        cache.push_back(-acc / Rat(n + 1));
    }
    return cache[m];
}

}  // namespace hviro
