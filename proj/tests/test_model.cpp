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

#include <hviro/model.hpp>

#include <sstream>

using namespace hviro;

TEST_CASE("builtin models carry the classical data", "[model]") {
    TargetModel pt = builtin_model("point");
    CHECK(pt.basis_size == 1);
    CHECK(pt.dim == 0);
    CHECK(pt.eta[0][0] == 1);
    CHECK(pt.chern[0][0] == 0);
    CHECK(pt.euler == 1);
    CHECK(pt.cd_integral == 1);
    CHECK(pt.c1cd1_integral == 0);
    CHECK_FALSE(pt.has_novikov);

    TargetModel p1 = builtin_model("p1");
    CHECK(p1.basis_size == 2);
    CHECK(p1.dim == 1);
    CHECK(p1.hol_deg == std::vector<int>{0, 1});
    CHECK(p1.eta == RatMatrix{{Rat(0), Rat(1)}, {Rat(1), Rat(0)}});
    CHECK(p1.chern[0] == std::vector<Rat>{Rat(0), Rat(2)});
    CHECK(p1.chern[1] == std::vector<Rat>{Rat(0), Rat(0)});
    CHECK(p1.euler == 2);
    CHECK(p1.cd_integral == 2);
    CHECK(p1.c1cd1_integral == 2);
    CHECK(p1.has_novikov);
    CHECK(p1.novikov_c1_pairing == 2);
    CHECK(mat_mul(p1.eta, p1.eta_inv) == mat_identity(2));

    CHECK_THROWS(builtin_model("p2"));
}

TEST_CASE("grading shifts", "[model]") {
    TargetModel pt = builtin_model("point");
    CHECK(b_values(pt, 0) == std::make_pair(rat(1, 2), rat(1, 2)));
    TargetModel p1 = builtin_model("p1");
    CHECK(b_values(p1, 0) == std::make_pair(rat(0), rat(1)));
    CHECK(b_values(p1, 1) == std::make_pair(rat(1), rat(0)));
    CHECK_THROWS(b_values(p1, 2));
    CHECK_THROWS(b_values(p1, -1));
    for (int a = 0; a < 2; ++a) CHECK(b_lower(p1, a) + b_upper(p1, a) == 1);
}

TEST_CASE("chern powers", "[model]") {
    TargetModel pt = builtin_model("point");
    CHECK(chern_power(pt, 1, ChernVariant::mixed)[0][0] == 0);
    CHECK(chern_power(pt, 0, ChernVariant::mixed) == mat_identity(1));

    TargetModel p1 = builtin_model("p1");
    CHECK(chern_power(p1, 0, ChernVariant::lowered) == p1.eta);
    CHECK(chern_power(p1, 0, ChernVariant::raised) == p1.eta_inv);
    // c_1 = 2w and w cup w = 0, so all powers j >= 2 vanish.
    for (int j = 2; j <= 5; ++j) {
        RatMatrix z = chern_power(p1, j, ChernVariant::mixed);
        for (auto& row : z)
            for (auto& x : row) CHECK(x == 0);
    }
    // The two index placements of the same pairing matrix.
    CHECK(chern_power(p1, 1, ChernVariant::lowered) == RatMatrix{{Rat(2), Rat(0)}, {Rat(0), Rat(0)}});
    CHECK(chern_power(p1, 1, ChernVariant::raised) == RatMatrix{{Rat(0), Rat(0)}, {Rat(0), Rat(2)}});
    for (auto model : {builtin_model("point"), builtin_model("p1")})
        for (int j = 0; j <= 4; ++j) {
            CHECK(chern_power(model, j + 1, ChernVariant::mixed) ==
                  mat_mul(chern_power(model, j, ChernVariant::mixed), model.chern));
            CHECK(mat_symmetric(chern_power(model, j, ChernVariant::lowered)));
            CHECK(mat_symmetric(chern_power(model, j, ChernVariant::raised)));
        }
}

static TargetModel from_text(const std::string& text) {
    std::istringstream in(text);
    return load_model(in);
}

TEST_CASE("model config loader", "[model]") {
    std::string good =
        "# two-class target\n"
        "name = demo\n"
        "dimension = 1\n"
        "rank = 2\n"
        "degrees = 0 1\n"
        "eta = 0/1 1/1 ; 1/1 0/1\n"
        "chern = 0 2 ; 0 0\n"
        "euler = 2\n"
        "cd_integral = 2\n"
        "c1cd1_integral = 2\n"
        "novikov = 2\n";
    TargetModel m = from_text(good);
    CHECK(m.name == "demo");
    CHECK(m.eta == builtin_model("p1").eta);
    CHECK(m.chern == builtin_model("p1").chern);
    CHECK(m.has_novikov);

    auto expect_error = [&](const std::string& text, const std::string& needle) {
        try {
            from_text(text);
            FAIL("expected a load error containing '" << needle << "'");
        } catch (const std::exception& e) {
            INFO(e.what());
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };

    // Diagnostics name the offending line.
    expect_error(
        "name = bad\ndimension = 1\nrank = 2\ndegrees = 0 1\n"
        "eta = 0 1 ; 1 1/2\nchern = 0 2 ; 0 0\neuler = 2\ncd_integral = 2\nc1cd1_integral = 2\n",
        "line 5");
    // eta not symmetric.
    expect_error(
        "name = bad\ndimension = 1\nrank = 2\ndegrees = 0 1\n"
        "eta = 0 1 ; 2 0\nchern = 0 2 ; 0 0\neuler = 2\ncd_integral = 2\nc1cd1_integral = 2\n",
        "symmetric");
    // eta singular.
    expect_error(
        "name = bad\ndimension = 2\nrank = 2\ndegrees = 0 1\n"
        "eta = 0 0 ; 0 0\nchern = 0 1 ; 0 0\neuler = 2\ncd_integral = 2\nc1cd1_integral = 2\n",
        "invertible");
    // chern must raise degree by exactly one.
    expect_error(
        "name = bad\ndimension = 1\nrank = 2\ndegrees = 0 1\n"
        "eta = 0 1 ; 1 0\nchern = 1 0 ; 0 0\neuler = 2\ncd_integral = 2\nc1cd1_integral = 2\n",
        "degree");
    // identity class must come first.
    expect_error(
        "name = bad\ndimension = 1\nrank = 2\ndegrees = 1 0\n"
        "eta = 0 1 ; 1 0\nchern = 0 0 ; 2 0\neuler = 2\ncd_integral = 2\nc1cd1_integral = 2\n",
        "identity");
    expect_error("name = bad\n", "missing required key");
    expect_error("nonsense line\n", "line 1");
    expect_error(good + "mystery = 1\n", "unknown key");
    expect_error(good + "name = twice\n", "duplicate");
}
