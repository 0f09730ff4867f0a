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

#include <hviro/diffop.hpp>

#include <algorithm>
#include <map>
#include <vector>

using namespace hviro;

namespace {

OpKey mk(Mono mono, std::vector<VarId> derivs = {}, int hbar = 0) {
    OpKey k;
    k.hbar = hbar;
    k.mono = std::move(mono);
    k.derivs = std::move(derivs);
    std::sort(k.derivs.begin(), k.derivs.end());
    return k;
}

Rat coeff(const DiffOp& op, const OpKey& key) {
    auto it = op.terms.find(key);
    return it == op.terms.end() ? Rat(0) : it->second;
}

// Keeps only terms whose variable and derivative levels stay at or below
// max_level and whose s-degree stays at or below s_cap.
DiffOp window(const DiffOp& op, int max_level, int s_cap) {
    DiffOp out;
    for (const auto& [k, c] : op.terms) {
        if (k.mono.max_t_level() > max_level) continue;
        if (k.mono.s_degree() > s_cap) continue;
        bool ok = true;
        for (VarId v : k.derivs)
            if (v.kind() == VarId::Kind::t && v.t_level() > max_level) ok = false;
        if (ok) out.add(k, c);
    }
    return out;
}

const VarId t00 = VarId::t(0, 0);
const VarId t10 = VarId::t(1, 0);
const VarId t20 = VarId::t(2, 0);
const VarId t01 = VarId::t(0, 1);
const VarId s1v = VarId::s(1);

}  // namespace

TEST_CASE("composition follows the Leibniz rule", "[diffop]") {
    DiffOp D;
    D.add(mk(Mono::one(), {t00}), 1);

    SECTION("single derivative against a linear coefficient") {
        DiffOp T;
        T.add(mk(Mono::var(t00)), 1);
        DiffOp r = compose(D, T);
        CHECK(r.terms.size() == 2);
        CHECK(coeff(r, mk(Mono::var(t00), {t00})) == 1);
        CHECK(coeff(r, OpKey{}) == 1);
    }

    SECTION("identity composes trivially on both sides") {
        DiffOp A = build_Ln(builtin_model("point"), 0, 3);
        CHECK(compose(DiffOp::identity(), A) == A);
        CHECK(compose(A, DiffOp::identity()) == A);
    }

    SECTION("derivative against a quadratic with an hbar weight") {
        DiffOp B;
        B.add(mk(Mono::var(t00, 2), {}, -2), rat(1, 2));
        DiffOp r = compose(D, B);
        CHECK(r.terms.size() == 2);
        CHECK(coeff(r, mk(Mono::var(t00, 2), {t00}, -2)) == rat(1, 2));
        CHECK(coeff(r, mk(Mono::var(t00), {}, -2)) == 1);
    }

    SECTION("second derivative against a square counts both routes") {
        DiffOp DD;
        DD.add(mk(Mono::one(), {t00, t00}), 1);
        DiffOp T2;
        T2.add(mk(Mono::var(t00, 2)), 1);
        DiffOp r = compose(DD, T2);
        CHECK(r.terms.size() == 3);
        CHECK(coeff(r, mk(Mono::var(t00, 2), {t00, t00})) == 1);
        CHECK(coeff(r, mk(Mono::var(t00), {t00})) == 4);
        CHECK(coeff(r, OpKey{}) == 2);
    }

    SECTION("deformation variables participate in the rule") {
        DiffOp A;
        A.add(mk(Mono::var(s1v), {s1v}, 2), 1);
        DiffOp B;
        B.add(mk(Mono::var(s1v, 2)), 1);
        DiffOp r = compose(A, B);
        CHECK(coeff(r, mk(Mono::var(s1v, 3), {s1v}, 2)) == 1);
        CHECK(coeff(r, mk(Mono::var(s1v, 2), {}, 2)) == 2);
    }
}

TEST_CASE("commutator agrees with the composition difference", "[diffop]") {
    SECTION("canonical pair") {
        DiffOp D;
        D.add(mk(Mono::one(), {t00}), 1);
        DiffOp T;
        T.add(mk(Mono::var(t00)), 1);
        CHECK(commutator(D, T) == DiffOp::identity());
        CHECK(commutator(T, D) == DiffOp::identity(-1));
    }

    SECTION("structured operators, flat model") {
        DiffOp A = build_Ln(builtin_model("point"), 1, 4);
        DiffOp B = build_Ln(builtin_model("point"), -1, 4);
        CHECK(commutator(A, B) == compose(A, B) - compose(B, A));
        CHECK(commutator(A, A).is_zero());
    }

    SECTION("structured operators, curved model with deformation terms") {
        TargetModel p1 = builtin_model("p1");
        DiffOp A = build_LnE(p1, 1, 2, 3);
        DiffOp B = build_zhat(p1, 2, 3);
        CHECK(commutator(A, B) == compose(A, B) - compose(B, A));
        CHECK(commutator(B, B).is_zero());
    }
}

TEST_CASE("flat-model lowering and grading operators take their classical forms",
          "[diffop]") {
    TargetModel pt = builtin_model("point");

    SECTION("lowering operator") {
        DiffOp L = build_Ln(pt, -1, 6);
        CHECK(L.terms.size() == 8);
        CHECK(coeff(L, mk(Mono::var(t00, 2), {}, -2)) == rat(1, 2));
        CHECK(coeff(L, mk(Mono::one(), {t00})) == -1);
        for (int r = 1; r <= 6; ++r)
            CHECK(coeff(L, mk(Mono::var(VarId::t(r, 0)), {VarId::t(r - 1, 0)})) == 1);
    }

    SECTION("grading operator") {
        DiffOp L = build_Ln(pt, 0, 6);
        CHECK(L.terms.size() == 9);
        for (int r = 0; r <= 6; ++r)
            CHECK(coeff(L, mk(Mono::var(VarId::t(r, 0)), {VarId::t(r, 0)})) ==
                  Rat(2 * r + 1) / 2);
        CHECK(coeff(L, mk(Mono::one(), {t10})) == rat(-3, 2));
        CHECK(coeff(L, OpKey{}) == rat(1, 16));
        CHECK(coeff(L, mk(Mono::var(t00, 2), {}, -2)) == 0);
    }

    SECTION("first raising operator") {
        DiffOp L = build_Ln(pt, 1, 6);
        CHECK(coeff(L, mk(Mono::one(), {t00, t00}, 2)) == rat(1, 8));
        CHECK(coeff(L, mk(Mono::var(t00), {t10})) == rat(3, 4));
        CHECK(coeff(L, mk(Mono::one(), {t20})) == rat(-15, 4));
        CHECK(coeff(L, OpKey{}) == 0);
    }

    SECTION("index below the lowering bound is rejected") {
        CHECK_THROWS_AS(build_Ln(pt, -2, 4), std::invalid_argument);
    }
}

TEST_CASE("curved-model operators mix classes through the divisor action", "[diffop]") {
    TargetModel p1 = builtin_model("p1");

    SECTION("lowering operator") {
        DiffOp L = build_Ln(p1, -1, 6);
        CHECK(L.terms.size() == 14);
        CHECK(coeff(L, mk(Mono::var(t00).times(Mono::var(t01)), {}, -2)) == 1);
        CHECK(coeff(L, mk(Mono::one(), {t00})) == -1);
        CHECK(coeff(L, mk(Mono::var(VarId::t(3, 1)), {VarId::t(2, 1)})) == 1);
    }

    SECTION("grading operator") {
        DiffOp L = build_Ln(p1, 0, 6);
        CHECK(L.terms.size() == 22);
        // Diagonal rows weigh level plus holomorphic offset.
        CHECK(coeff(L, mk(Mono::var(VarId::t(3, 0)), {VarId::t(3, 0)})) == 3);
        CHECK(coeff(L, mk(Mono::var(VarId::t(3, 1)), {VarId::t(3, 1)})) == 4);
        // The divisor row lowers the level by one while raising the class.
        CHECK(coeff(L, mk(Mono::var(t10), {t01})) == 2);
        CHECK(coeff(L, mk(Mono::var(VarId::t(4, 0)), {VarId::t(3, 1)})) == 2);
        // No same-level cross-class row exists: the divisor shift is strict.
        CHECK(coeff(L, mk(Mono::var(t00), {t01})) == 0);
        // Shift constants produced by the distinguished level-one slot.
        CHECK(coeff(L, mk(Mono::one(), {t10})) == -1);
        CHECK(coeff(L, mk(Mono::one(), {t01})) == -2);
        // Quadratic part pairs the identity class with itself.
        CHECK(coeff(L, mk(Mono::var(t00, 2), {}, -2)) == 1);
        CHECK(coeff(L, OpKey{}) == 0);
    }
}

TEST_CASE("deformed operators carry the Bernoulli coefficient rows", "[diffop]") {
    const Rat row_k[4] = {0, rat(-1, 12), rat(1, 240), rat(-1, 6048)};

    SECTION("lowest deformation is a pure constant shift") {
        for (const char* name : {"point", "p1"}) {
            TargetModel m = builtin_model(name);
            DiffOp diff = build_LnE(m, -1, 2, 6) - build_Ln(m, -1, 6);
            DiffOp expect;
            expect.add(mk(Mono::var(s1v)), m.euler / 24);
            INFO(name);
            CHECK(diff == expect);
        }
    }

    SECTION("grading deformation rows are model independent") {
        for (const char* name : {"point", "p1"}) {
            TargetModel m = builtin_model(name);
            DiffOp L = build_LnE(m, 0, 2, 8);
            for (int k = 1; k <= 3; ++k)
                for (int alpha = 0; alpha < m.basis_size; ++alpha) {
                    Mono mono = Mono::var(VarId::s(k)).times(Mono::var(VarId::t(2, alpha)));
                    OpKey key = mk(mono, {VarId::t(2 + 2 * k - 1, alpha)});
                    INFO(name << " k=" << k << " alpha=" << alpha);
                    CHECK(coeff(L, key) == row_k[k]);
                }
        }
    }

    SECTION("first raising deformation row on the flat model") {
        DiffOp L = build_LnE(builtin_model("point"), 1, 2, 8);
        auto expect = [](int k, int r) {
            Rat bern = bernoulli(2 * k) / Rat(factorial(2 * k));
            return -bern * 2 * (2 * k - 1) * (Rat(2 * r + 1) / 2 + k);
        };
        for (auto [k, r] : std::vector<std::pair<int, int>>{{1, 0}, {1, 2}, {2, 1}, {3, 2}}) {
            Mono mono = Mono::var(VarId::s(k)).times(Mono::var(VarId::t(r, 0)));
            OpKey key = mk(mono, {VarId::t(r + 2 * k, 0)});
            INFO("k=" << k << " r=" << r);
            CHECK(coeff(L, key) == expect(k, r));
        }
        CHECK(coeff(L, mk(Mono::var(s1v).times(Mono::var(t00)), {t20})) == rat(-1, 4));
        CHECK(coeff(L, mk(Mono::var(s1v).times(Mono::var(t20)), {VarId::t(4, 0)})) ==
              rat(-7, 12));
    }

    SECTION("structural bounds hold for every term") {
        DiffOp L = build_LnE(builtin_model("p1"), 2, 2, 6);
        for (const auto& [k, c] : L.terms) {
            CHECK(k.derivs.size() <= 2);
            CHECK((k.hbar == -2 || k.hbar == 0 || k.hbar == 2));
            CHECK(k.mono.s_degree() <= 2);
            CHECK(k.mono.max_t_level() <= 6);
            for (VarId v : k.derivs)
                if (v.kind() == VarId::Kind::t) CHECK(v.t_level() <= 6);
        }
    }
}

TEST_CASE("flow generators match their displayed form", "[diffop]") {
    TargetModel pt = builtin_model("point");

    SECTION("first generator") {
        DiffOp D = build_FP(pt, 1, 6);
        CHECK(coeff(D, mk(Mono::one(), {s1v})) == -1);
        CHECK(coeff(D, mk(Mono::var(t00), {t10})) == rat(-1, 12));
        CHECK(coeff(D, mk(Mono::one(), {t20})) == rat(1, 12));
        CHECK(coeff(D, mk(Mono::one(), {t00, t00}, 2)) == rat(1, 24));
    }

    SECTION("second generator alternates the sign of the quadratic tail") {
        DiffOp D = build_FP(pt, 2, 6);
        CHECK(coeff(D, mk(Mono::one(), {VarId::s(2)})) == -1);
        CHECK(coeff(D, mk(Mono::var(t00), {VarId::t(3, 0)})) == rat(1, 720));
        CHECK(coeff(D, mk(Mono::one(), {t00, t20}, 2)) == rat(-1, 720));
        CHECK(coeff(D, mk(Mono::one(), {t10, t10}, 2)) == rat(1, 1440));
    }

    SECTION("index below one is rejected") {
        CHECK_THROWS_AS(build_FP(pt, 0, 4), std::invalid_argument);
    }
}

TEST_CASE("closed-form and iterated-bracket assemblies agree", "[diffop]") {
    SECTION("full agreement at matching truncations") {
        for (const char* name : {"point", "p1"}) {
            TargetModel m = builtin_model(name);
            for (int n = -1; n <= 2; ++n) {
                INFO(name << " n=" << n);
                CHECK(bch_LnE(m, n, 2, 6) == build_LnE(m, n, 2, 6));
            }
        }
        CHECK(bch_LnE(builtin_model("point"), 2, 2, 8) ==
              build_LnE(builtin_model("point"), 2, 2, 8));
    }

    SECTION("zero deformation depth reduces to the undeformed operator") {
        TargetModel pt = builtin_model("point");
        for (int n = 0; n <= 2; ++n) {
            INFO("n=" << n);
            CHECK(build_LnE(pt, n, 0, 6) == build_Ln(pt, n, 6));
            CHECK(bch_LnE(pt, n, 0, 6) == build_Ln(pt, n, 6));
        }
    }

    SECTION("lowest index keeps only the constant correction") {
        TargetModel pt = builtin_model("point");
        DiffOp diff = bch_LnE(pt, -1, 1, 5) - build_Ln(pt, -1, 5);
        DiffOp expect;
        expect.add(mk(Mono::var(s1v)), rat(1, 24));
        CHECK(diff == expect);
    }

    SECTION("iterated brackets commute across the tuple order") {
        TargetModel pt = builtin_model("point");
        DiffOp L2 = build_Ln(pt, 2, 6);
        DiffOp z1 = build_zhat(pt, 1, 6);
        DiffOp z2 = build_zhat(pt, 2, 6);
        CHECK(commutator(commutator(L2, z1), z2) == commutator(commutator(L2, z2), z1));
    }
}

TEST_CASE("commutation relations hold inside the safe window", "[diffop]") {
    struct Setup {
        const char* name;
        int cap;
    };
    for (Setup setup : {Setup{"point", 8}, Setup{"p1", 7}}) {
        TargetModel m = builtin_model(setup.name);
        std::map<int, DiffOp> E;
        for (int n = -1; n <= 2; ++n) E.emplace(n, build_LnE(m, n, 2, setup.cap));
        for (int n = 0; n <= 2; ++n)
            for (int mm = -1; mm < n; ++mm) {
                if (n + mm > 2) continue;
                DiffOp lhs = commutator(E.at(n), E.at(mm));
                DiffOp rhs = E.at(n + mm).scaled(n - mm);
                INFO(setup.name << " bracket (" << n << "," << mm << ")");
                CHECK(window(lhs - rhs, setup.cap - 3, 2).is_zero());
            }
    }
}

TEST_CASE("central terms emerge from the normal ordering", "[diffop]") {
    SECTION("constant shift in the grading-lowering bracket") {
        for (const char* name : {"point", "p1"}) {
            TargetModel m = builtin_model(name);
            DiffOp b = commutator(build_LnE(m, 0, 2, 6), build_LnE(m, -1, 2, 6));
            INFO(name);
            CHECK(coeff(b, mk(Mono::var(s1v))) == m.euler / 24);
        }
    }

    SECTION("scalar part of the raising-lowering bracket") {
        DiffOp bp = commutator(build_Ln(builtin_model("point"), 1, 6),
                               build_Ln(builtin_model("point"), -1, 6));
        CHECK(coeff(bp, OpKey{}) == rat(1, 8));
        DiffOp bq = commutator(build_Ln(builtin_model("p1"), 1, 6),
                               build_Ln(builtin_model("p1"), -1, 6));
        CHECK(coeff(bq, OpKey{}) == 0);
    }
}

TEST_CASE("bracket nesting is associative in the operator algebra", "[diffop]") {
    for (const char* name : {"point", "p1"}) {
        TargetModel m = builtin_model(name);
        DiffOp A = build_Ln(m, -1, 5);
        DiffOp B = build_Ln(m, 0, 5);
        DiffOp C = build_Ln(m, 1, 5);
        DiffOp J = commutator(commutator(A, B), C) + commutator(commutator(B, C), A) +
                   commutator(commutator(C, A), B);
        INFO(name);
        CHECK(J.is_zero());
    }
    TargetModel pt = builtin_model("point");
    DiffOp A = build_LnE(pt, -1, 2, 5);
    DiffOp B = build_LnE(pt, 0, 2, 5);
    DiffOp C = build_LnE(pt, 1, 2, 5);
    DiffOp J = commutator(commutator(A, B), C) + commutator(commutator(B, C), A) +
               commutator(commutator(C, A), B);
    CHECK(J.is_zero());
}

TEST_CASE("quantization reproduces the operator constructors", "[diffop]") {
    SECTION("odd power symbols") {
        for (const char* name : {"point", "p1"}) {
            TargetModel m = builtin_model(name);
            for (int k = 1; k <= 3; ++k) {
                INFO(name << " k=" << k);
                CHECK(op_dilaton_shift(quantize(m, sym_z_odd(k), 5)) ==
                      build_zhat(m, k, 5));
            }
        }
    }

    SECTION("loop-rotation symbols") {
        for (const char* name : {"point", "p1"}) {
            TargetModel m = builtin_model(name);
            for (int n = -1; n <= 2; ++n) {
                DiffOp q = op_dilaton_shift(quantize(m, sym_ln(m, n), 4));
                DiffOp expect = build_Ln(m, n, 4);
                if (n == 0) expect = expect - DiffOp::identity(coeff(expect, OpKey{}));
                INFO(name << " n=" << n);
                CHECK(q.scaled(-1) == expect);
            }
        }
    }

    SECTION("the scalar removed at index zero is the stated constant") {
        CHECK(coeff(build_Ln(builtin_model("point"), 0, 4), OpKey{}) == rat(1, 16));
        CHECK(coeff(build_Ln(builtin_model("p1"), 0, 4), OpKey{}) == 0);
    }

    SECTION("zero symbol quantizes to zero") {
        SymplecticSymbol zero{[](int, int) {
            return std::vector<std::tuple<int, int, Rat>>{};
        }};
        CHECK(quantize(builtin_model("point"), zero, 4).is_zero());
    }

    SECTION("even powers are rejected as non-symplectic") {
        SymplecticSymbol even{[](int r, int a) {
            return std::vector<std::tuple<int, int, Rat>>{{r + 2, a, Rat(1)}};
        }};
        CHECK_THROWS_AS(quantize(builtin_model("point"), even, 3), std::runtime_error);
    }
}

TEST_CASE("central pairing of quantized symbols", "[diffop]") {
    SECTION("lowering against odd powers sees the Euler number once") {
        for (const char* name : {"point", "p1"}) {
            TargetModel m = builtin_model(name);
            DiffOp low = quantize(m, sym_ln(m, -1), 5);
            for (int k = 1; k <= 3; ++k) {
                Rat expect = (k == 1) ? m.euler / 2 : Rat(0);
                INFO(name << " k=" << k);
                CHECK(cocycle_pairing(low, quantize(m, sym_z_odd(k), 5)) == expect);
            }
        }
    }

    SECTION("toy table values") {
        DiffOp pp;
        pp.add(mk(Mono::one(), {t00, t00}, 2), 1);
        DiffOp qq;
        qq.add(mk(Mono::var(t00, 2), {}, -2), 1);
        CHECK(cocycle_pairing(pp, qq) == 2);
        CHECK(cocycle_pairing(qq, pp) == -2);
        CHECK(cocycle_pairing(qq, qq) == 0);
        CHECK(cocycle_pairing(pp, pp) == 0);
    }

    SECTION("the pairing is what the bracket produces as a scalar") {
        for (const char* name : {"point", "p1"}) {
            TargetModel m = builtin_model(name);
            DiffOp low = quantize(m, sym_ln(m, -1), 6);
            DiffOp odd = quantize(m, sym_z_odd(1), 6);
            DiffOp b = window(commutator(low, odd), 4, 2);
            INFO(name);
            CHECK(b == DiffOp::identity(m.euler / 2));
        }
    }
}

TEST_CASE("shifted-variable rewriting expands binomially", "[diffop]") {
    DiffOp in;
    in.add(mk(Mono::var(t10, 2).times(Mono::var(t00)), {t00}), 1);
    DiffOp out = op_dilaton_shift(in);
    CHECK(out.terms.size() == 3);
    CHECK(coeff(out, mk(Mono::var(t10, 2).times(Mono::var(t00)), {t00})) == 1);
    CHECK(coeff(out, mk(Mono::var(t10).times(Mono::var(t00)), {t00})) == -2);
    CHECK(coeff(out, mk(Mono::var(t00), {t00})) == 1);

    DiffOp plain;
    plain.add(mk(Mono::var(t20), {t00}, 2), rat(1, 3));
    CHECK(op_dilaton_shift(plain) == plain);
}

TEST_CASE("operator text dump is stable", "[diffop]") {
    CHECK(dump_op(DiffOp{}) == "0\n");
    DiffOp L = build_Ln(builtin_model("point"), -1, 2);
    CHECK(dump_op(L) ==
          "1/2 | h^-2 | s:1 | t:t(0,1)^2 | d:-\n"
          "-1 | h^0 | s:1 | t:1 | d:t(0,1)\n"
          "1 | h^0 | s:1 | t:t(1,1) | d:t(0,1)\n"
          "1 | h^0 | s:1 | t:t(2,1) | d:t(1,1)\n");
}

TEST_CASE("connected action distributes derivatives over the free energy",
          "[diffop]") {
    CorrelatorEngine eng(builtin_model("point"));
    Truncation tr;
    tr.t_degree = 2;
    tr.max_level = 2;
    tr.s_degree = 0;
    tr.s_index_max = 1;
    tr.q_max = 0;
    tr.hbar_min = -2;
    tr.hbar_max = 2;

    SECTION("single derivative reads off one-point slices") {
        DiffOp D;
        D.add(mk(Mono::one(), {t00}), 1);
        Series S = connected_action(D, eng, tr);
        CHECK(S.coefficient_of(Mono::var(VarId::hbar(), -2)) == 0);
        CHECK(S.coefficient_of(Mono::var(VarId::hbar(), -2).times(Mono::var(t00, 2))) ==
              rat(1, 2));
        CHECK(S.coefficient_of(Mono::var(t20)) == rat(1, 24));
    }

    SECTION("double derivative splits across genus blocks") {
        DiffOp D2;
        D2.add(mk(Mono::one(), {t00, t00}, 2), 1);
        Series S2 = connected_action(D2, eng, tr);
        CHECK(S2.coefficient_of(Mono::one()) == 0);
        CHECK(S2.coefficient_of(Mono::var(t00)) == 1);

        DiffOp D3;
        D3.add(mk(Mono::one(), {t00, t20}, 2), 1);
        Series S3 = connected_action(D3, eng, tr);
        CHECK(S3.coefficient_of(Mono::var(VarId::hbar(), 2)) == rat(1, 24));
    }

    SECTION("scalar operators act by multiplication") {
        Series S = connected_action(DiffOp::identity(5), eng, tr);
        CHECK(S.coefficient_of(Mono::one()) == 5);
        CHECK(S.coefficient_of(Mono::var(t00)) == 0);
    }

    SECTION("deformation derivatives read the twisted blocks") {
        Truncation trs = tr;
        trs.s_degree = 1;
        DiffOp D;
        D.add(mk(Mono::one(), {s1v}), 1);
        Series S = connected_action(D, eng, trs);
        CHECK(S.coefficient_of(Mono::var(VarId::hbar(), -2)) == 0);
        // The constant slice pairs with a zero-pointed moduli space and dies;
        // the first marked point carries the classical twisted one-point value.
        CHECK(S.coefficient_of(Mono::one()) == 0);
        CHECK(S.coefficient_of(Mono::var(t00)) == rat(1, 24));
    }

    SECTION("operators of order three are rejected") {
        DiffOp D;
        D.add(mk(Mono::one(), {t00, t00, t10}), 1);
        CHECK_THROWS_AS(connected_action(D, eng, tr), std::logic_error);
    }

    SECTION("missing high-genus data propagates as an error") {
        CorrelatorEngine curved(builtin_model("p1"), 2);
        Truncation bad = tr;
        bad.q_max = 2;
        bad.hbar_min = 0;
        bad.hbar_max = 0;
        DiffOp D;
        D.add(mk(Mono::one(), {t00}), 1);
        CHECK_THROWS(connected_action(D, curved, bad));
    }
}

TEST_CASE("flow generators annihilate the deformed potential", "[diffop]") {
    SECTION("flat model across two flows") {
        CorrelatorEngine eng(builtin_model("point"));
        Truncation tr;
        tr.t_degree = 2;
        tr.max_level = 3;
        tr.s_degree = 2;
        tr.s_index_max = 2;
        tr.q_max = 0;
        tr.hbar_min = -2;
        tr.hbar_max = 2;
        CHECK(connected_action(build_FP(builtin_model("point"), 1, 6), eng, tr).is_zero());
        CHECK(connected_action(build_FP(builtin_model("point"), 2, 8), eng, tr).is_zero());
    }

    SECTION("curved model in the genus-zero window") {
        CorrelatorEngine eng(builtin_model("p1"), 2);
        Truncation tr;
        tr.t_degree = 2;
        tr.max_level = 3;
        tr.s_degree = 2;
        tr.s_index_max = 1;
        tr.q_max = 2;
        tr.hbar_min = -2;
        tr.hbar_max = -2;
        CHECK(connected_action(build_FP(builtin_model("p1"), 1, 6), eng, tr).is_zero());
    }
}
