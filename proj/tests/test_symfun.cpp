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
#include <catch2/catch_amalgamated.hpp>

#include <hviro/symfun.hpp>

#include <random>

using namespace hviro;

static UniPoly poly(std::initializer_list<long long> coeffs_low_first) {
    UniPoly p;
    for (auto v : coeffs_low_first) p.c.push_back(Rat(v));
    p.normalize();
    return p;
}

TEST_CASE("polynomial arithmetic", "[symfun]") {
    UniPoly p = poly({3, 0, 1});  // x^2 + 3
    UniPoly q = poly({-3, 0, -1});
    CHECK((p + q).is_zero());
    CHECK((p + q).degree() == -1);
    CHECK(p.eval(rat(2)) == 7);
    CHECK((p * p).eval(rat(2)) == 49);
    CHECK(p.shifted(rat(1)) == poly({4, 2, 1}));
    CHECK(p.shifted(rat(1)).shifted(rat(-1)) == p);
    CHECK(p.scaled(rat(0)).is_zero());
}

TEST_CASE("elementary symmetric functions", "[symfun]") {
    CHECK(elem_sym(0, std::vector<Rat>{rat(5), rat(7)}) == 1);
    CHECK(elem_sym(2, std::vector<Rat>{rat(1), rat(2), rat(3)}) == 11);
    CHECK(elem_sym(4, std::vector<Rat>{rat(1), rat(2), rat(3)}) == 0);
    CHECK(elem_sym(-1, std::vector<Rat>{rat(1)}) == 0);
    CHECK(elem_sym(0, std::vector<Rat>{}) == 1);
    // Generating identity: prod (t + x_i) = sum_j e_j t^{count-j}.
    std::vector<Rat> xs = {rat(2), rat(-1, 3), rat(5, 2), rat(7)};
    Rat t = rat(3, 4);
    Rat lhs = 1;
    for (auto& x : xs) lhs *= (t + x);
    Rat rhs = 0, tp = 1;
    for (int j = (int)xs.size(); j >= 0; --j) {
        rhs += elem_sym(j, xs) * tp;
        tp *= t;
    }
    CHECK(lhs == rhs);
}

TEST_CASE("shifted elementary symmetric polynomials", "[symfun]") {
    TargetModel pt = builtin_model("point");
    TargetModel p1 = builtin_model("p1");

    // (x + 1/2)(x + 3/2) = x^2 + 2x + 3/4
    UniPoly h = hat_check_e(EKind::hat, 2, 1, pt, 0);
    CHECK(h.c == std::vector<Rat>{rat(3, 4), rat(2), rat(1)});
    CHECK(hat_check_e(EKind::hat, 0, 3, p1, 1) == UniPoly(Rat(1)));
    // check kind, j=1, n=1 on the degree-1 class of p1: b^alpha = 0.
    CHECK(hat_check_e(EKind::check, 1, 1, p1, 1) == poly({1, 2}));
    // n = -1: empty product.
    CHECK(hat_check_e(EKind::hat, 0, -1, pt, 0) == UniPoly(Rat(1)));
    CHECK(hat_check_e(EKind::hat, 1, -1, pt, 0).is_zero());
    CHECK(hat_check_e(EKind::hat, 3, 1, pt, 0).is_zero());
    CHECK(hat_check_e(EKind::hat, -2, 1, pt, 0).is_zero());

    // check equals hat with the argument translated by b^a - b_a.
    for (auto& m : {pt, p1})
        for (int a = 0; a < m.basis_size; ++a)
            for (int n = -1; n <= 4; ++n)
                for (int j = 0; j <= n + 1; ++j) {
                    Rat t = b_upper(m, a) - b_lower(m, a);
                    CHECK(hat_check_e(EKind::check, j, n, m, a) ==
                          hat_check_e(EKind::hat, j, n, m, a).shifted(t));
                }
}

TEST_CASE("difference operators", "[symfun]") {
    TargetModel pt = builtin_model("point");
    TargetModel p1 = builtin_model("p1");

    CHECK(iterated_delta({5}, UniPoly(Rat(1))).is_zero());
    CHECK(iterated_delta({}, poly({1, 2, 3})) == poly({1, 2, 3}));
    CHECK_THROWS(iterated_delta({0}, poly({1, 1})));

    // Delta_{2k-1} e-hat_1(1,a) is the constant 2(2k-1); at k=2 this is 6.
    for (auto& m : {pt, p1})
        for (int a = 0; a < m.basis_size; ++a)
            for (int k = 1; k <= 3; ++k) {
                UniPoly d1 = iterated_delta({2 * k - 1}, hat_check_e(EKind::hat, 1, 1, m, a));
                CHECK(d1 == UniPoly(rat(2 * (2 * k - 1))));
                // Delta_{2k-1} e-hat_2(1,a) = 2(2k-1)(x + b_a + k).
                UniPoly d2 = iterated_delta({2 * k - 1}, hat_check_e(EKind::hat, 2, 1, m, a));
                CHECK(d2 == UniPoly::x_plus(b_lower(m, a) + k).scaled(rat(2 * (2 * k - 1))));
            }

    // Delta_1 contraction against one fewer point, hat side then check side.
    for (auto& m : {pt, p1})
        for (int a = 0; a < m.basis_size; ++a)
            for (int n = 0; n <= 4; ++n)
                for (int j = 0; j <= n; ++j) {
                    UniPoly lhs = iterated_delta({1}, hat_check_e(EKind::hat, n + 1 - j, n, m, a));
                    UniPoly rhs = hat_check_e(EKind::hat, n - j, n - 1, m, a).shifted(rat(1)).scaled(rat(n + 1));
                    CHECK(lhs == rhs);
                    UniPoly lhs2 = iterated_delta({1}, hat_check_e(EKind::check, n + 1 - j, n, m, a));
                    UniPoly rhs2 = hat_check_e(EKind::check, n - j, n - 1, m, a).shifted(rat(1)).scaled(rat(n + 1));
                    for (int s = -6; s <= 6; ++s) CHECK(lhs2.eval(rat(-s - 1)) == rhs2.eval(rat(-s - 1)));
                }

    // Shifts commute and each application drops the degree by one.
    std::mt19937 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        UniPoly f;
        int deg = (int)(rng() % 5);
        for (int i = 0; i <= deg; ++i) f.c.push_back(rat((long long)(rng() % 19) - 9));
        f.normalize();
        std::vector<int> shifts;
        int m = (int)(rng() % 3 + 1);
        for (int i = 0; i < m; ++i) shifts.push_back((int)(rng() % 6 + 1));
        std::vector<int> perm = shifts;
        std::shuffle(perm.begin(), perm.end(), rng);
        UniPoly a = iterated_delta(shifts, f);
        CHECK(a == iterated_delta(perm, f));
        if (!f.is_zero()) CHECK(a.degree() <= std::max(f.degree() - (int)shifts.size(), -1));
    }
}
