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
#include <hviro/series.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

namespace hviro {

// Bump when any reduction rule changes; persisted caches from other versions
// are discarded on load.
inline constexpr const char* correlator_oracle_version = "oracle-v1";

enum class Provenance { seed, dvv, reconstruction, fp_reduction, dimension_zero };

inline const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::seed: return "seed";
        case Provenance::dvv: return "dvv";
        case Provenance::reconstruction: return "reconstruction";
        case Provenance::fp_reduction: return "fp_reduction";
        case Provenance::dimension_zero: return "dimension_zero";
    }
    return "?";
}

inline Provenance provenance_from_name(const std::string& s) {
    if (s == "seed") return Provenance::seed;
    if (s == "dvv") return Provenance::dvv;
    if (s == "reconstruction") return Provenance::reconstruction;
    if (s == "fp_reduction") return Provenance::fp_reduction;
    if (s == "dimension_zero") return Provenance::dimension_zero;
    throw std::runtime_error("unknown provenance tag '" + s + "'");
}

// Identifies one correlator: descendant insertions (level, class) plus a
// multiset of odd Hodge-character indices 2l-1. Insertion order never
// matters, so keys are kept sorted.
struct CorrelatorKey {
    std::string model;
    int g = 0;
    int degree = 0;  // Novikov degree; always 0 for targets without one
    std::vector<std::pair<int, int>> insertions;
    std::vector<int> hodge;

    void canonicalize() {
        std::sort(insertions.begin(), insertions.end());
        std::sort(hodge.begin(), hodge.end());
    }

    auto operator<=>(const CorrelatorKey&) const = default;
};

inline std::string key_to_string(const CorrelatorKey& k) {
    std::string s = k.model + "|g" + std::to_string(k.g) + "|d" + std::to_string(k.degree) + "|tau:";
    if (k.insertions.empty()) s += "-";
    for (std::size_t i = 0; i < k.insertions.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(k.insertions[i].first) + "." + std::to_string(k.insertions[i].second + 1);
    }
    s += "|ch:";
    if (k.hodge.empty()) s += "-";
    for (std::size_t i = 0; i < k.hodge.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(k.hodge[i]);
    }
    return s;
}

inline CorrelatorKey key_from_string(const std::string& text) {
    auto bad = [&] { return std::runtime_error("bad correlator key '" + text + "'"); };
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        std::size_t bar = text.find('|', pos);
        parts.push_back(text.substr(pos, bar == std::string::npos ? std::string::npos : bar - pos));
        if (bar == std::string::npos) break;
        pos = bar + 1;
    }
    if (parts.size() != 5 || parts[1].size() < 2 || parts[1][0] != 'g' || parts[2].size() < 2 ||
        parts[2][0] != 'd' || parts[3].rfind("tau:", 0) != 0 || parts[4].rfind("ch:", 0) != 0)
        throw bad();
    CorrelatorKey k;
    k.model = parts[0];
    try {
        k.g = std::stoi(parts[1].substr(1));
        k.degree = std::stoi(parts[2].substr(1));
        std::string taus = parts[3].substr(4);
        if (taus != "-" && !taus.empty()) {
            std::size_t p = 0;
            while (p < taus.size()) {
                std::size_t comma = taus.find(',', p);
                std::string item = taus.substr(p, comma == std::string::npos ? std::string::npos : comma - p);
                std::size_t dot = item.find('.');
                if (dot == std::string::npos) throw bad();
                k.insertions.push_back(
                    {std::stoi(item.substr(0, dot)), std::stoi(item.substr(dot + 1)) - 1});
                if (comma == std::string::npos) break;
                p = comma + 1;
            }
        }
        std::string chs = parts[4].substr(3);
        if (chs != "-" && !chs.empty()) {
            std::size_t p = 0;
            while (p < chs.size()) {
                std::size_t comma = chs.find(',', p);
                k.hodge.push_back(std::stoi(
                    chs.substr(p, comma == std::string::npos ? std::string::npos : comma - p)));
                if (comma == std::string::npos) break;
                p = comma + 1;
            }
        }
    } catch (const std::exception&) {
        throw bad();
    }
    k.canonicalize();
    return k;
}

// Memoized key -> (value, provenance). Conflicting re-insertion for a key is
// a hard error: two reduction paths disagreeing means an oracle bug.
class CorrelatorStore {
  public:
    std::optional<std::pair<Rat, Provenance>> get(const CorrelatorKey& k) const {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = memo_.find(k);
        if (it == memo_.end()) return std::nullopt;
        return it->second;
    }

    void put(const CorrelatorKey& k, const Rat& v, Provenance p) {
        std::lock_guard<std::mutex> lock(mu_);
        auto [it, fresh] = memo_.emplace(k, std::make_pair(v, p));
        if (!fresh && it->second.first != v)
            throw std::logic_error("correlator store conflict for " + key_to_string(k) + ": " +
                                   rat_to_string(it->second.first) + " vs " + rat_to_string(v));
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mu_);
        return memo_.size();
    }

    void for_each(const std::function<void(const CorrelatorKey&, const Rat&, Provenance)>& fn) const {
        std::lock_guard<std::mutex> lock(mu_);
        for (auto& [k, vp] : memo_) fn(k, vp.first, vp.second);
    }

    // Cache file: header `# hviro-correlators <hash>` then key<TAB>value<TAB>tag.
    void save(std::ostream& out, const std::string& content_hash) const {
        out << "# hviro-correlators " << content_hash << "\n";
        for_each([&](const CorrelatorKey& k, const Rat& v, Provenance p) {
            out << key_to_string(k) << "\t" << rat_to_string(v) << "\t" << provenance_name(p) << "\n";
        });
    }

    // Returns false (and leaves the store untouched) on hash mismatch or any
    // malformed content; stale caches are dropped, never trusted.
    bool load(std::istream& in, const std::string& expected_hash) {
        std::string header;
        if (!std::getline(in, header)) return false;
        if (header != "# hviro-correlators " + expected_hash) return false;
        std::vector<std::tuple<CorrelatorKey, Rat, Provenance>> staged;
        std::string line;
        try {
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                std::size_t tab1 = line.find('\t');
                std::size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
                if (tab2 == std::string::npos) return false;
                staged.emplace_back(key_from_string(line.substr(0, tab1)),
                                    rat_from_string(line.substr(tab1 + 1, tab2 - tab1 - 1)),
                                    provenance_from_name(line.substr(tab2 + 1)));
            }
        } catch (const std::exception&) {
            return false;
        }
        std::lock_guard<std::mutex> lock(mu_);
        for (auto& [k, v, p] : staged) {
            auto it = memo_.find(k);
            if (it != memo_.end() && it->second.first != v) return false;
        }
        for (auto& [k, v, p] : staged) memo_.emplace(k, std::make_pair(v, p));
        return true;
    }

  private:
    mutable std::mutex mu_;
    std::map<CorrelatorKey, std::pair<Rat, Provenance>> memo_;
};

// Enumerates sub-multisets of `items` (element, multiplicity), calling
// fn(chosen_counts, weight) with weight = prod binom(mult_i, chosen_i): the
// number of ways to pick that sub-multiset from labeled copies.
template <class T, class Fn>
inline void for_each_weighted_split(const std::vector<std::pair<T, int>>& items, Fn&& fn) {
    std::vector<int> chosen(items.size(), 0);
    std::function<void(std::size_t, Int)> rec = [&](std::size_t i, Int weight) {
        if (i == items.size()) {
            fn(chosen, weight);
            return;
        }
        for (int c = 0; c <= items[i].second; ++c) {
            chosen[i] = c;
            rec(i + 1, weight * binomial(items[i].second, c));
        }
        chosen[i] = 0;
    };
    rec(0, Int(1));
}

template <class T>
inline std::vector<std::pair<T, int>> to_multiset(const std::vector<T>& sorted_items) {
    std::vector<std::pair<T, int>> out;
    for (auto& x : sorted_items) {
        if (!out.empty() && out.back().first == x)
            ++out.back().second;
        else
            out.push_back({x, 1});
    }
    return out;
}

template <class T>
inline Int multiset_aut(const std::vector<T>& sorted_items) {
    Int a = 1;
    int run = 1;
    for (std::size_t i = 1; i < sorted_items.size(); ++i) {
        if (sorted_items[i] == sorted_items[i - 1])
            a *= ++run;
        else
            run = 1;
    }
    return a;
}

// Genus-0 point closed form (n-3)!/prod k_i!, valid for all n >= 3. Used as
// an oracle against the recursion, never as part of it.
inline Rat point_genus0_multinomial(const std::vector<int>& ks) {
    int n = (int)ks.size();
    long long sum = 0;
    for (int k : ks) {
        if (k < 0) return 0;
        sum += k;
    }
    if (n < 3 || sum != n - 3) return 0;
    Rat v = Rat(factorial(n - 3));
    for (int k : ks) v /= Rat(factorial(k));
    return v;
}

// Exact correlator oracle for one target model. All values are memoized in
// the store; seeds are plain fields so tests can perturb them.
class CorrelatorEngine {
  public:
    TargetModel model;
    int q_max = 2;
    Rat point_seed_three = 1;            // <tau_0^3>_0
    Rat point_seed_torus = rat(1, 24);   // <tau_1>_1
    Rat p1_seed = 1;                     // <>_{0,1}, equivalently <tau_0(w)tau_0(w)>_{0,1}
    CorrelatorStore store;

    explicit CorrelatorEngine(TargetModel m, int qmax = 2) : model(std::move(m)), q_max(qmax) {}

    Rat correlator(CorrelatorKey key) {
        key.model = model.name;
        key.canonicalize();
        check_key(key);
        if (auto hit = store.get(key)) return hit->first;
        auto [v, prov] = compute(key);
        store.put(key, v, prov);
        return v;
    }

    Rat descendant_point(int g, std::vector<int> ks) {
        CorrelatorKey k;
        k.g = g;
        for (int lev : ks) k.insertions.push_back({lev, 0});
        return correlator(std::move(k));
    }

    Rat descendant_p1(std::vector<std::pair<int, int>> ins, int d) {
        CorrelatorKey k;
        k.degree = d;
        k.insertions = std::move(ins);
        return correlator(std::move(k));
    }

    Rat hodge_correlator(CorrelatorKey key) { return correlator(std::move(key)); }

    // One elimination step of the Hodge-character reduction, removing
    // hodge[which]. Exposed so tests can confirm the result is independent
    // of the elimination order; `correlator` always removes the largest.
    Rat fp_reduce_step(const CorrelatorKey& raw, std::size_t which) {
        CorrelatorKey key = raw;
        key.model = model.name;
        key.canonicalize();
        check_key(key);
        if (key.hodge.empty() || which >= key.hodge.size())
            throw std::runtime_error("fp_reduce_step: no Hodge entry at that position");
        std::swap(key.hodge[which], key.hodge.back());
        return fp_reduce(key);
    }

    // Content hash for cache files; covers the model data, the oracle
    // version, and the seeds (a perturbed engine must never share a cache).
    std::string content_hash() const {
        std::string sig = model.name + ";" + std::to_string(model.basis_size) + ";" +
                          std::to_string(model.dim) + ";";
        for (int d : model.hol_deg) sig += std::to_string(d) + ",";
        auto mat = [&](const RatMatrix& m) {
            for (auto& row : m)
                for (auto& x : row) sig += rat_to_string(x) + ",";
            sig += ";";
        };
        mat(model.eta);
        mat(model.chern);
        sig += rat_to_string(model.euler) + ";" + rat_to_string(model.cd_integral) + ";" +
               rat_to_string(model.c1cd1_integral) + ";";
        sig += model.has_novikov ? rat_to_string(model.novikov_c1_pairing) : "none";
        sig += ";";
        sig += correlator_oracle_version;
        sig += ";" + rat_to_string(point_seed_three) + ";" + rat_to_string(point_seed_torus) + ";" +
               rat_to_string(p1_seed);
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : sig) {
            h ^= c;
            h *= 1099511628211ull;
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
        return buf;
    }

  private:
    void check_key(const CorrelatorKey& k) const {
        if (k.g < 0) throw std::runtime_error("correlator: negative genus in " + key_to_string(k));
        if (k.degree < 0)
            throw std::runtime_error("correlator: negative degree in " + key_to_string(k));
        if (!model.has_novikov && k.degree != 0)
            throw std::runtime_error("correlator: nonzero degree for model without Novikov grading in " +
                                     key_to_string(k));
        if (model.has_novikov && k.degree > q_max)
            throw std::runtime_error("correlator: degree exceeds the q cap in " + key_to_string(k));
        for (auto& [lev, a] : k.insertions) {
            if (lev < 0)
                throw std::runtime_error("correlator: negative level in " + key_to_string(k));
            if (a < 0 || a >= model.basis_size)
                throw std::runtime_error("correlator: class index out of range in " + key_to_string(k));
        }
        for (int j : k.hodge)
            if (j < 1) throw std::runtime_error("correlator: bad Hodge index in " + key_to_string(k));
    }

    std::pair<Rat, Provenance> compute(const CorrelatorKey& key) {
        for (int j : key.hodge)
            if (j % 2 == 0) return {0, Provenance::dimension_zero};  // even characters vanish
        if (!key.hodge.empty() && key.g == 0)
            return {0, Provenance::dimension_zero};  // rank-0 Hodge bundle in genus 0
        if (model.name == "p1" && key.g != 0)
            throw std::runtime_error("p1 correlators: genus >= 1 unsupported (" +
                                     key_to_string(key) + ")");
        if (!dimension_ok(key)) return {0, Provenance::dimension_zero};
        if (!key.hodge.empty()) return {fp_reduce(key), Provenance::fp_reduction};
        if (model.name == "point") return point_value(key);
        if (model.name == "p1") return p1_value(key);
        throw std::runtime_error("no correlator oracle for model '" + model.name + "'");
    }

    bool dimension_ok(const CorrelatorKey& key) const {
        // integrand degree == dim Mbar_{g,n}(X,beta) =
        //   (1-g)(dim-3) + n + <c_1, beta>
        Rat lhs = 0;
        for (auto& [lev, a] : key.insertions) lhs += lev + model.hol_deg[a];
        for (int j : key.hodge) lhs += j;
        Rat rhs = Rat(1 - key.g) * (model.dim - 3) + (int)key.insertions.size() +
                  model.novikov_c1_pairing * key.degree;
        return lhs == rhs;
    }

    // ---- point: Witten-Kontsevich via the double-factorial recursion ----

    std::pair<Rat, Provenance> point_value(const CorrelatorKey& key) {
        int n = (int)key.insertions.size();
        if (n == 0) return {0, Provenance::dimension_zero};
        std::vector<int> ks;
        for (auto& [lev, a] : key.insertions) ks.push_back(lev);
        if (key.g == 0 && n == 3 && ks == std::vector<int>{0, 0, 0})
            return {point_seed_three, Provenance::seed};
        if (key.g == 1 && n == 1 && ks == std::vector<int>{1})
            return {point_seed_torus, Provenance::seed};
        if (ks.back() == 0) return {0, Provenance::dimension_zero};  // all tau_0, no stable case left
        // Pivot on the largest level, written tau_{k+1}.
        int k = ks.back() - 1;
        std::vector<int> rest(ks.begin(), ks.end() - 1);
        Rat rhs = 0;
        for (std::size_t j = 0; j < rest.size(); ++j) {
            std::vector<int> next = rest;
            next.erase(next.begin() + j);
            next.push_back(rest[j] + k);
            rhs += Rat(odd_double_factorial(2 * rest[j] + 2 * k + 1)) /
                   Rat(odd_double_factorial(2 * rest[j] - 1)) * point_eval(key.g, next);
        }
        auto rest_ms = to_multiset(rest);
        for (int b = 0; b <= k - 1; ++b) {
            int c = k - 1 - b;
            Rat ff = Rat(odd_double_factorial(2 * b + 1)) * Rat(odd_double_factorial(2 * c + 1));
            if (key.g >= 1) {
                std::vector<int> low = rest;
                low.push_back(b);
                low.push_back(c);
                rhs += ff / 2 * point_eval(key.g - 1, low);
            }
            for (int g1 = 0; g1 <= key.g; ++g1) {
                int g2 = key.g - g1;
                for_each_weighted_split(rest_ms, [&](const std::vector<int>& chosen, const Int& w) {
                    std::vector<int> left, right;
                    for (std::size_t i = 0; i < rest_ms.size(); ++i) {
                        for (int c2 = 0; c2 < chosen[i]; ++c2) left.push_back(rest_ms[i].first);
                        for (int c2 = chosen[i]; c2 < rest_ms[i].second; ++c2)
                            right.push_back(rest_ms[i].first);
                    }
                    left.push_back(b);
                    right.push_back(c);
                    Rat lv = point_eval(g1, left);
                    if (lv == 0) return;
                    rhs += ff / 2 * Rat(w) * lv * point_eval(g2, right);
                });
            }
        }
        return {rhs / Rat(odd_double_factorial(2 * k + 3)), Provenance::dvv};
    }

    Rat point_eval(int g, std::vector<int> ks) {
        if (g < 0) return 0;
        CorrelatorKey k;
        k.g = g;
        for (int lev : ks) {
            if (lev < 0) return 0;
            k.insertions.push_back({lev, 0});
        }
        return correlator(std::move(k));
    }

    // ---- P^1 genus 0: string > divisor > TRR, with a divisor-backwards
    // ---- lift for one- and two-point keys ----

    Rat p1_eval(std::vector<std::pair<int, int>> ins, int d) {
        if (d < 0) return 0;
        for (auto& [lev, a] : ins)
            if (lev < 0) return 0;
        CorrelatorKey k;
        k.degree = d;
        k.insertions = std::move(ins);
        return correlator(std::move(k));
    }

    // <tau_{k-1}(pivot) phi_mu>.<phi^mu anchor1 anchor2>, summed over degree
    // splits and basis pairs. Computed inline, never memo-keyed: the
    // two-point rules call it at their own total level.
    Rat p1_trr3(std::pair<int, int> pivot, std::pair<int, int> anchor1, std::pair<int, int> anchor2,
                int d) {
        Rat acc = 0;
        for (int d1 = 0; d1 <= d; ++d1) {
            int d2 = d - d1;
            for (int mu = 0; mu < model.basis_size; ++mu)
                for (int nu = 0; nu < model.basis_size; ++nu) {
                    if (model.eta_inv[mu][nu] == 0) continue;
                    Rat lv = p1_eval({{pivot.first - 1, pivot.second}, {0, mu}}, d1);
                    if (lv == 0) continue;
                    acc += model.eta_inv[mu][nu] * lv * p1_eval({{0, nu}, anchor1, anchor2}, d2);
                }
        }
        return acc;
    }

    std::pair<Rat, Provenance> p1_value(const CorrelatorKey& key) {
        const int id = 0, om = 1;
        int n = (int)key.insertions.size();
        int d = key.degree;
        auto& ins = key.insertions;

        if (n == 0) return {p1_seed, Provenance::seed};  // gate already forced d == 1

        if (n >= 3) {
            if (d == 0 && n == 3) {
                // A degree-0 stable map contracts the whole three-pointed
                // curve, so psi-classes vanish and only the classical cup
                // product integral survives.
                bool pure = ins[0].first == 0 && ins[1].first == 0 && ins[2].first == 0;
                if (!pure) return {0, Provenance::dimension_zero};
                int psum = model.hol_deg[ins[0].second] + model.hol_deg[ins[1].second] +
                           model.hol_deg[ins[2].second];
                return {psum == (int)model.dim ? Rat(1) : Rat(0), Provenance::reconstruction};
            }
            auto has = [&](int lev, int a) {
                return std::find(ins.begin(), ins.end(), std::make_pair(lev, a)) != ins.end();
            };
            if (has(0, id)) {
                std::vector<std::pair<int, int>> rest = ins;
                rest.erase(std::find(rest.begin(), rest.end(), std::make_pair(0, id)));
                Rat acc = 0;
                for (std::size_t j = 0; j < rest.size(); ++j) {
                    if (rest[j].first == 0) continue;
                    auto next = rest;
                    next[j].first -= 1;
                    acc += p1_eval(next, d);
                }
                return {acc, Provenance::reconstruction};
            }
            if (has(0, om)) {
                std::vector<std::pair<int, int>> rest = ins;
                rest.erase(std::find(rest.begin(), rest.end(), std::make_pair(0, om)));
                Rat acc = Rat(d) * p1_eval(rest, d);
                for (std::size_t j = 0; j < rest.size(); ++j) {
                    // cup with w: kills w-classes, sends 1 to w
                    if (rest[j].first == 0 || rest[j].second != id) continue;
                    auto next = rest;
                    next[j].first -= 1;
                    next[j].second = om;
                    acc += p1_eval(next, d);
                }
                return {acc, Provenance::reconstruction};
            }
            // No tau_0 insertion at all: pivot on the largest level (>= 1
            // whenever the dimension gate passed), anchored on the first two
            // of the rest.
            auto sorted = ins;  // already canonical: the last has max level
            auto pivot = sorted.back();
            sorted.pop_back();
            auto anchor1 = sorted[0];
            auto anchor2 = sorted[1];
            std::vector<std::pair<int, int>> spectators(sorted.begin() + 2, sorted.end());
            auto spec_ms = to_multiset(spectators);
            Rat acc = 0;
            for (int d1 = 0; d1 <= d; ++d1) {
                int d2 = d - d1;
                for_each_weighted_split(spec_ms, [&](const std::vector<int>& chosen, const Int& w) {
                    std::vector<std::pair<int, int>> s1, s2;
                    for (std::size_t i = 0; i < spec_ms.size(); ++i) {
                        for (int c = 0; c < chosen[i]; ++c) s1.push_back(spec_ms[i].first);
                        for (int c = chosen[i]; c < spec_ms[i].second; ++c)
                            s2.push_back(spec_ms[i].first);
                    }
                    for (int mu = 0; mu < model.basis_size; ++mu)
                        for (int nu = 0; nu < model.basis_size; ++nu) {
                            if (model.eta_inv[mu][nu] == 0) continue;
                            auto left = s1;
                            left.push_back({pivot.first - 1, pivot.second});
                            left.push_back({0, mu});
                            Rat lv = p1_eval(left, d1);
                            if (lv == 0) continue;
                            auto right = s2;
                            right.push_back({0, nu});
                            right.push_back(anchor1);
                            right.push_back(anchor2);
                            acc += Rat(w) * model.eta_inv[mu][nu] * lv * p1_eval(right, d2);
                        }
                });
            }
            return {acc, Provenance::reconstruction};
        }

        if (n == 2) {
            auto [k1, a] = ins[0];
            auto [k2, b] = ins[1];
            if (k1 == 0 && a == id) {
                // string
                if (k2 == 0) return {0, Provenance::dimension_zero};
                return {p1_eval({{k2 - 1, b}}, d), Provenance::reconstruction};
            }
            if (k1 == 0 && k2 == 0) {
                // both level 0, no identity: (w, w); gate already forced d == 1
                return {p1_seed, Provenance::seed};
            }
            if (d == 0) return {0, Provenance::dimension_zero};
            if (k1 == 0) {
                // (0, w) with (k2, b), k2 >= 1: divisor equation read backwards
                Rat v = p1_trr3({k2, b}, {0, om}, {0, om}, d);
                if (b == id) v -= p1_eval({{0, om}, {k2 - 1, om}}, d);
                return {v / d, Provenance::reconstruction};
            }
            // both levels >= 1
            Rat v = p1_trr3({k2, b}, {0, om}, {k1, a}, d);
            if (a == id) v -= p1_eval({{k1 - 1, om}, {k2, b}}, d);
            if (b == id) v -= p1_eval({{k1, a}, {k2 - 1, om}}, d);
            return {v / d, Provenance::reconstruction};
        }

        // n == 1
        auto [K, c] = ins[0];
        if (K == 0) return {p1_seed, Provenance::seed};  // gate forced (w, d=1)
        if (d == 0) return {0, Provenance::dimension_zero};
        Rat v = p1_eval({{0, om}, {K, c}}, d);
        if (c == id) v -= p1_eval({{K - 1, om}}, d);
        return {v / d, Provenance::reconstruction};
    }

    // ---- Hodge insertions: one ch_{2l-1} eliminated per step through the
    // ---- coefficient equations of the Faber-Pandharipande operators ----

    Rat fp_reduce(const CorrelatorKey& key) {
        int twol_minus_1 = key.hodge.back();  // largest index; order is a tested non-choice
        int l = (twol_minus_1 + 1) / 2;
        std::vector<int> mu(key.hodge.begin(), key.hodge.end() - 1);
        std::sort(mu.begin(), mu.end());
        const auto& I = key.insertions;
        Rat acc = 0;

        auto sub = [&](std::vector<std::pair<int, int>> insertions, std::vector<int> hodge, int g) {
            if (g < 0) return Rat(0);
            CorrelatorKey k;
            k.degree = key.degree;
            k.g = g;
            k.insertions = std::move(insertions);
            k.hodge = std::move(hodge);
            return correlator(std::move(k));
        };

        // -sum over t-slots: one insertion raised by 2l-1
        auto I_ms = to_multiset(I);
        for (auto& [slot, mult] : I_ms) {
            auto next = I;
            next.erase(std::find(next.begin(), next.end(), slot));
            next.push_back({slot.first + 2 * l - 1, slot.second});
            acc -= Rat(mult) * sub(next, mu, key.g);
        }
        // dilaton-shift constant: one extra tau_{2l}(identity)
        {
            auto next = I;
            next.push_back({2 * l, 0});
            acc += sub(next, mu, key.g);
        }
        // hbar^2 part: genus drop plus all stable splits
        auto mu_ms = to_multiset(mu);
        for (int i = 0; i <= 2 * l - 2; ++i) {
            int ibar = 2 * l - 2 - i;
            Rat sign = (i % 2 == 0) ? 1 : -1;
            for (int al = 0; al < model.basis_size; ++al)
                for (int be = 0; be < model.basis_size; ++be) {
                    Rat eta_ab = model.eta_inv[al][be];
                    if (eta_ab == 0) continue;
                    if (key.g >= 1) {
                        auto next = I;
                        next.push_back({i, al});
                        next.push_back({ibar, be});
                        acc += sign * eta_ab / 2 * sub(next, mu, key.g - 1);
                    }
                    for (int g1 = 0; g1 <= key.g; ++g1) {
                        int g2 = key.g - g1;
                        for_each_weighted_split(I_ms, [&](const std::vector<int>& ci, const Int& wi) {
                            std::vector<std::pair<int, int>> left, right;
                            for (std::size_t x = 0; x < I_ms.size(); ++x) {
                                for (int c = 0; c < ci[x]; ++c) left.push_back(I_ms[x].first);
                                for (int c = ci[x]; c < I_ms[x].second; ++c)
                                    right.push_back(I_ms[x].first);
                            }
                            left.push_back({i, al});
                            right.push_back({ibar, be});
                            for_each_weighted_split(
                                mu_ms, [&](const std::vector<int>& cm, const Int& wm) {
                                    std::vector<int> mu1, mu2;
                                    for (std::size_t x = 0; x < mu_ms.size(); ++x) {
                                        for (int c = 0; c < cm[x]; ++c) mu1.push_back(mu_ms[x].first);
                                        for (int c = cm[x]; c < mu_ms[x].second; ++c)
                                            mu2.push_back(mu_ms[x].first);
                                    }
                                    Rat lv = sub(left, mu1, g1);
                                    if (lv == 0) return;
                                    acc += sign * eta_ab / 2 * Rat(wi) * Rat(wm) * lv *
                                           sub(right, mu2, g2);
                                });
                        });
                    }
                }
        }
        return bernoulli(2 * l) / Rat(factorial(2 * l)) * acc;
    }
};

// ---- generating-function views over the store ---------------------------

namespace detail {

// Enumerates t-multisets (sorted insertion lists) with total count <= max_deg
// and levels <= max_level over the model's classes.
inline void for_each_t_multiset(const TargetModel& m, int max_level, int max_deg,
                                const std::function<void(const std::vector<std::pair<int, int>>&)>& fn) {
    std::vector<std::pair<int, int>> current;
    // nondecreasing (level, class) choices so each multiset appears once
    std::function<void(int, int, int)> rec = [&](int level, int alpha, int remaining) {
        fn(current);
        if (remaining == 0) return;
        for (int lev = level; lev <= max_level; ++lev)
            for (int a = (lev == level ? alpha : 0); a < m.basis_size; ++a) {
                current.push_back({lev, a});
                rec(lev, a, remaining - 1);
                current.pop_back();
            }
    };
    rec(0, 0, max_deg);
}

}  // namespace detail

// The t-(and q-)series of the stated multi-derivative of F_g, with
// coefficients from the oracle. `profile` adds a fixed multiset of Hodge
// characters to every extracted correlator.
inline Series double_bracket_profile(CorrelatorEngine& eng, int g,
                                     const std::vector<std::pair<int, int>>& dirs,
                                     const std::vector<int>& profile, const Truncation& tr) {
    Series out(tr);
    int dmax = eng.model.has_novikov ? std::min(tr.q_max, eng.q_max) : 0;
    detail::for_each_t_multiset(eng.model, tr.max_level, tr.t_degree,
                                [&](const std::vector<std::pair<int, int>>& J) {
        Rat aut = Rat(multiset_aut(J));
        for (int d = 0; d <= dmax; ++d) {
            CorrelatorKey key;
            key.g = g;
            key.degree = d;
            key.insertions = J;
            for (auto& dir : dirs) key.insertions.push_back(dir);
            key.hodge = profile;
            Rat v = eng.correlator(std::move(key));
            if (v == 0) continue;
            Mono mono;
            for (auto& [lev, a] : J) mono = mono.times(Mono::var(VarId::t(lev, a)));
            if (d > 0) mono = mono.times(Mono::var(VarId::q(), d));
            out.add_term(mono, v / aut);
        }
    });
    return out;
}

inline Series double_bracket(CorrelatorEngine& eng, int g,
                             const std::vector<std::pair<int, int>>& dirs, const Truncation& tr) {
    return double_bracket_profile(eng, g, dirs, {}, tr);
}

// Enumerates Hodge profiles (multisets over {1..s_index_max}, stored as odd
// character indices 2k-1) with size <= s_degree.
inline void for_each_hodge_profile(const Truncation& tr,
                                   const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> profile;
    std::function<void(int, int)> rec = [&](int kmin, int remaining) {
        fn(profile);
        if (remaining == 0) return;
        for (int k = kmin; k <= tr.s_index_max; ++k) {
            profile.push_back(2 * k - 1);
            rec(k, remaining - 1);
            profile.pop_back();
        }
    };
    rec(1, tr.s_degree);
}

// The full free energy sum_g hbar^{2g-2} F_g^E(t, s, q) materialized under
// the truncation. Genus range follows the hbar window, so a caller wanting
// only genus 0 passes hbar_max = -2.
inline Series hodge_potential(CorrelatorEngine& eng, const Truncation& tr) {
    Series out(tr);
    int g_lo = std::max(0, (tr.hbar_min + 2) / 2);
    int g_hi = (tr.hbar_max + 2) / 2;
    for (int g = g_lo; g <= g_hi; ++g) {
        for_each_hodge_profile(tr, [&](const std::vector<int>& profile) {
            // s-monomial: profile entry 2k-1 contributes one factor s_k
            Mono smono;
            for (int j : profile) smono = smono.times(Mono::var(VarId::s((j + 1) / 2)));
            Rat aut = Rat(multiset_aut(profile));
            Series block = double_bracket_profile(eng, g, {}, profile, tr);
            if (block.is_zero()) return;
            Mono hb = Mono::var(VarId::hbar(), 2 * g - 2).times(smono);
            for (auto& [mono, v] : block.terms) out.add_term(mono.times(hb), v / aut);
        });
    }
    return out;
}

// Index-lowered components of W1 * W2 (the big quantum product) as t/q
// series: component beta carries <<W1 W2 phi_alpha>>_0 eta^{alpha beta}.
inline std::vector<Series> quantum_product(CorrelatorEngine& eng,
                                           const std::vector<std::tuple<int, int, Rat>>& w1,
                                           const std::vector<std::tuple<int, int, Rat>>& w2,
                                           const Truncation& tr) {
    std::vector<Series> comp(eng.model.basis_size, Series(tr));
    for (auto& [k1, a1, c1] : w1)
        for (auto& [k2, a2, c2] : w2) {
            if (c1 == 0 || c2 == 0) continue;
            for (int al = 0; al < eng.model.basis_size; ++al) {
                Series bracket =
                    double_bracket(eng, 0, {{k1, a1}, {k2, a2}, {0, al}}, tr).scaled(c1 * c2);
                if (bracket.is_zero()) continue;
                for (int be = 0; be < eng.model.basis_size; ++be) {
                    if (eng.model.eta_inv[al][be] == 0) continue;
                    comp[be] = comp[be] + bracket.scaled(eng.model.eta_inv[al][be]);
                }
            }
        }
    return comp;
}

}  // namespace hviro
