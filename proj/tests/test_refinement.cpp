// Copyright 2026 The cascade-compiler Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Refinement-operator tests: window preservation, transition matrices
// (checked entry-by-entry against an independent boost-rational evaluation
// of the index formula), patch vectorization, and the cross-oracle
// identities tying the direct recursion to the digit-driven matrix product.

#include <cstdint>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <catch2/catch_amalgamated.hpp>

#include "cascade/cpwl.hpp"
#include "cascade/dyadic.hpp"
#include "cascade/refinement.hpp"
#include "cascade/serialize.hpp"

namespace {

using boost::multiprecision::cpp_rational;
using cascade::DomainError;
using cascade::ParseError;
using cascade::Rational;
using cascade::cpwl::CpwlFunction2D;
using cascade::cpwl::CpwlMesh;
using cascade::cpwl::Tri;
using cascade::cpwl::Vec2;
using cascade::refinement::Mask;
using cascade::refinement::PatchIndexing;
using cascade::refinement::TransitionMatrices;
using cascade::refinement::Window;

cpp_rational br(const Rational& r) { return cpp_rational(r.str()); }

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  std::int64_t int_in(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(rng() % span);
  }
  Rational rat_in(std::int64_t lo, std::int64_t hi, std::int64_t max_den) {
    const std::int64_t den = int_in(1, max_den);
    return Rational(int_in(lo * den, hi * den), den);
  }
};

// Tensor hat mask c_{j,k} = t_j t_k with t = (1/2, 1, 1/2).
Mask hat_mask() {
  const Rational t[3] = {Rational(1, 2), Rational(1), Rational(1, 2)};
  Mask m;
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) m.set(j, k, t[j] * t[k]);
  }
  return m;
}

// Pyramid seed on [0,2]^2 (apex value 1 at (1,1)).
CpwlFunction2D pyramid() {
  std::vector<Vec2> verts = {{Rational(0), Rational(0)},
                             {Rational(2), Rational(0)},
                             {Rational(2), Rational(2)},
                             {Rational(0), Rational(2)},
                             {Rational(1), Rational(1)}};
  std::vector<Tri> tris = {{0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}};
  std::vector<Rational> vals = {Rational(0), Rational(0), Rational(0),
                                Rational(0), Rational(1)};
  return {CpwlMesh(std::move(verts), std::move(tris), std::move(vals)),
          Rational(0)};
}

// Small pyramid supported in the unit square (apex value 1 at (1/2,1/2)).
CpwlFunction2D unit_pyramid() {
  std::vector<Vec2> verts = {{Rational(0), Rational(0)},
                             {Rational(1), Rational(0)},
                             {Rational(1), Rational(1)},
                             {Rational(0), Rational(1)},
                             {Rational(1, 2), Rational(1, 2)}};
  std::vector<Tri> tris = {{0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}};
  std::vector<Rational> vals = {Rational(0), Rational(0), Rational(0),
                                Rational(0), Rational(1)};
  return {CpwlMesh(std::move(verts), std::move(tris), std::move(vals)),
          Rational(0)};
}

}  // namespace

TEST_CASE("window preservation: certificate and violations") {
  const Window w{2, 2};
  auto rep = cascade::refinement::check_window_preservation(hat_mask(), w);
  CHECK(rep.preserved);
  CHECK(rep.violations.empty());

  Mask low = hat_mask();
  low.set(-1, 0, Rational(1, 7));
  rep = cascade::refinement::check_window_preservation(low, w);
  CHECK_FALSE(rep.preserved);
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0] == std::pair<std::int64_t, std::int64_t>(-1, 0));

  Mask high = hat_mask();
  high.set(3, 0, Rational(1));
  rep = cascade::refinement::check_window_preservation(high, w);
  CHECK_FALSE(rep.preserved);
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0] == std::pair<std::int64_t, std::int64_t>(3, 0));

  CHECK_THROWS_AS(cascade::refinement::transition_matrices(high, w),
                  DomainError);
  CHECK_THROWS_AS(cascade::refinement::check_window_preservation(
                      hat_mask(), Window{0, 2}),
                  DomainError);

  // Setting an entry to zero removes it, so it cannot violate.
  Mask zeroed = hat_mask();
  zeroed.set(-5, -5, Rational(0));
  CHECK(cascade::refinement::check_window_preservation(zeroed, w).preserved);
}

TEST_CASE("transition matrices: fixed entries and independent formula") {
  const Window w{2, 2};
  const Mask m = hat_mask();
  const TransitionMatrices tm = cascade::refinement::transition_matrices(m, w);
  const PatchIndexing pi(w);

  // Hand-derived entries.
  CHECK(tm.at(0, 0).at(pi.index(1, 1), pi.index(1, 1)) == Rational(1, 4));
  CHECK(tm.at(1, 1).at(pi.index(1, 1), pi.index(2, 2)) == Rational(1, 4));
  CHECK(tm.at(1, 0).at(pi.index(2, 1), pi.index(1, 2)) == Rational(0));

  // Every entry of every matrix against an independent evaluation of the
  // index formula over boost rationals, for the hat mask and random masks
  // on random windows.
  Gen gen(0x3e5eed01);
  for (int iter = 0; iter < 25; ++iter) {
    Window rw{gen.int_in(1, 3), gen.int_in(1, 3)};
    Mask rm;
    if (iter == 0) {
      rw = w;
      rm = m;
    } else {
      const int count = static_cast<int>(gen.int_in(1, 8));
      for (int e = 0; e < count; ++e) {
        rm.set(gen.int_in(0, rw.L1), gen.int_in(0, rw.L2),
               gen.rat_in(-3, 3, 8));
      }
      if (!rm.any_nonzero()) rm.set(0, 0, Rational(1));
    }
    std::map<std::pair<std::int64_t, std::int64_t>, cpp_rational> oc;
    for (const auto& [idx, v] : rm.entries) oc[idx] = br(v);
    auto oc_at = [&](std::int64_t j, std::int64_t k) -> cpp_rational {
      const auto it = oc.find({j, k});
      return it == oc.end() ? cpp_rational(0) : it->second;
    };
    const TransitionMatrices rtm =
        cascade::refinement::transition_matrices(rm, rw);
    for (int q1 = 0; q1 <= 1; ++q1) {
      for (int q2 = 0; q2 <= 1; ++q2) {
        for (std::int64_t a = 1; a <= rw.L1; ++a) {
          for (std::int64_t b = 1; b <= rw.L2; ++b) {
            for (std::int64_t al = 1; al <= rw.L1; ++al) {
              for (std::int64_t be = 1; be <= rw.L2; ++be) {
                const auto row =
                    static_cast<std::uint32_t>((a - 1) * rw.L2 + (b - 1));
                const auto col =
                    static_cast<std::uint32_t>((al - 1) * rw.L2 + (be - 1));
                CHECK(br(rtm.at(q1, q2).at(row, col)) ==
                      oc_at(q1 + 2 * (a - 1) - (al - 1),
                            q2 + 2 * (b - 1) - (be - 1)));
              }
            }
          }
        }
      }
    }
  }
}

TEST_CASE("transition norm bound B and the transpose inequality") {
  const Window w{2, 2};
  const TransitionMatrices tm =
      cascade::refinement::transition_matrices(hat_mask(), w);
  const Rational bound = cascade::refinement::transition_norm_bound(tm);
  CHECK(bound == Rational(1));  // hat-mask columns each sum to at most 1

  Gen gen(0x3e5eed02);
  auto check_inequality = [&](const TransitionMatrices& t,
                              const Rational& b_val, int reps) {
    const std::size_t dim = PatchIndexing(t.window).size();
    for (int r = 0; r < reps; ++r) {
      std::vector<Rational> v;
      for (std::size_t i = 0; i < dim; ++i) v.push_back(gen.rat_in(-4, 4, 9));
      Rational vmax(0);
      for (const auto& x : v) vmax = max(vmax, x.abs());
      for (const auto& mat : t.T) {
        // T^T v computed directly from the entries.
        for (std::uint32_t c = 0; c < mat.n; ++c) {
          Rational acc(0);
          for (std::uint32_t r2 = 0; r2 < mat.n; ++r2) {
            acc += mat.at(r2, c) * v[r2];
          }
          CHECK(acc.abs() <= b_val * vmax);
        }
      }
    }
  };
  check_inequality(tm, bound, 1000);

  for (int iter = 0; iter < 20; ++iter) {
    const Window rw{gen.int_in(1, 3), gen.int_in(1, 3)};
    Mask rm;
    const int count = static_cast<int>(gen.int_in(1, 6));
    for (int e = 0; e < count; ++e) {
      rm.set(gen.int_in(0, rw.L1), gen.int_in(0, rw.L2),
             gen.rat_in(-3, 3, 8));
    }
    if (!rm.any_nonzero()) rm.set(1, 1, Rational(2, 3));
    const TransitionMatrices rtm =
        cascade::refinement::transition_matrices(rm, rw);
    check_inequality(rtm, cascade::refinement::transition_norm_bound(rtm),
                     50);
  }
}

TEST_CASE("patch vectorization and localization") {
  const Window w{2, 2};
  const PatchIndexing pi(w);
  CHECK(pi.size() == 4);
  CHECK(pi.b11() == 0);
  CHECK(pi.index(1, 2) == 1);
  CHECK(pi.index(2, 1) == 2);
  CHECK(pi.index(2, 2) == 3);
  CHECK(pi.patch(3) == std::pair<std::int64_t, std::int64_t>(2, 2));
  CHECK_THROWS_AS(pi.index(0, 1), DomainError);
  CHECK_THROWS_AS(pi.index(1, 3), DomainError);
  CHECK_THROWS_AS(pi.patch(4), DomainError);

  // Seed inside the unit square: only patch (1,1) is live.
  const CpwlFunction2D up = unit_pyramid();
  const cascade::refinement::VectorizedSeed unit(up, w);
  Gen gen(0x3e5eed03);
  const cascade::cpwl::MeshEvaluator unit_ev(up);
  for (int iter = 0; iter < 200; ++iter) {
    const Vec2 z{gen.rat_in(0, 1, 21), gen.rat_in(0, 1, 21)};
    const auto state = unit.eval(z);
    REQUIRE(state.size() == 4);
    CHECK(state[pi.b11()] == unit_ev.eval(z));
    CHECK(state[1] == Rational(0));
    CHECK(state[2] == Rational(0));
    CHECK(state[3] == Rational(0));
  }

  // Pyramid on the full window: patch (2,2) at z = (0,0) sees g(1,1) = 1.
  const cascade::refinement::VectorizedSeed big(pyramid(), w);
  const auto at_origin = big.eval({Rational(0), Rational(0)});
  CHECK(at_origin[pi.index(2, 2)] == Rational(1));
  CHECK(at_origin[pi.b11()] == Rational(0));

  // Localization picks the higher patch at integer coordinates and clamps
  // at the window edge.
  auto loc = cascade::refinement::localize(w, {Rational(1), Rational(1)});
  CHECK(loc.a == 2);
  CHECK(loc.b == 2);
  CHECK(loc.z.x == Rational(0));
  CHECK(loc.z.y == Rational(0));
  loc = cascade::refinement::localize(w, {Rational(2), Rational(2)});
  CHECK(loc.a == 2);
  CHECK(loc.b == 2);
  CHECK(loc.z.x == Rational(1));
  CHECK(loc.z.y == Rational(1));
  loc = cascade::refinement::localize(w, {Rational(0), Rational(3, 2)});
  CHECK(loc.a == 1);
  CHECK(loc.b == 2);
  CHECK_THROWS_AS(
      cascade::refinement::localize(w, {Rational(-1, 2), Rational(0)}),
      DomainError);

  // Round-trip: devectorize(vectorize(g)(z), x) = g(x) at random points.
  const CpwlFunction2D bp = pyramid();
  const cascade::cpwl::MeshEvaluator big_ev(bp);
  for (int iter = 0; iter < 1000; ++iter) {
    const Vec2 x{gen.rat_in(0, 2, 17), gen.rat_in(0, 2, 17)};
    const auto l = cascade::refinement::localize(w, x);
    const Rational got =
        cascade::refinement::devectorize(big.eval(l.z), w, x);
    CHECK(got == big_ev.eval(x));
  }

  CHECK_THROWS_AS(big.eval({Rational(2), Rational(0)}), DomainError);
  CHECK_THROWS_AS(cascade::refinement::devectorize({Rational(0)}, w,
                                                   {Rational(0), Rational(0)}),
                  DomainError);
}

TEST_CASE("vectorize rejects seeds that violate the window") {
  // Pyramid on [0,2]^2 against a (1,1) window: vertices outside the window
  // vanish but edge midpoints do not.
  CHECK_THROWS_AS(
      cascade::refinement::VectorizedSeed(pyramid(), Window{1, 1}),
      DomainError);
  CpwlFunction2D shifted = unit_pyramid();
  shifted.outside_value = Rational(1, 5);
  CHECK_THROWS_AS(
      cascade::refinement::VectorizedSeed(std::move(shifted), Window{2, 2}),
      DomainError);
}

TEST_CASE("one-step identity: Vec(Vg)(z) = T_Q(z) Vec(g)(R(z))") {
  const Window w{2, 2};
  const Mask m = hat_mask();
  const TransitionMatrices tm = cascade::refinement::transition_matrices(m, w);
  const PatchIndexing pi(w);
  const cascade::refinement::VectorizedSeed seed(pyramid(), w);
  const cascade::refinement::DirectOracle direct(pyramid(), m);

  Gen gen(0x3e5eed04);
  for (int iter = 0; iter < 1000; ++iter) {
    const Vec2 z{gen.rat_in(0, 1, 19), gen.rat_in(0, 1, 19)};
    const auto orbit = cascade::dyadic::orbit_2d({z.x, z.y}, 1);
    const auto rhs = cascade::refinement::matvec(
        tm.at(orbit.digits[0].first, orbit.digits[0].second),
        seed.eval({orbit.terminal.first, orbit.terminal.second}));
    for (std::int64_t a = 1; a <= w.L1; ++a) {
      for (std::int64_t b = 1; b <= w.L2; ++b) {
        const Rational lhs = direct.eval(
            1, {z.x + Rational(a - 1), z.y + Rational(b - 1)});
        CHECK(lhs == rhs[pi.index(a, b)]);
      }
    }
  }
}

TEST_CASE("iterated identity: cascade oracle equals direct oracle") {
  const Window w{2, 2};
  const Mask m = hat_mask();
  const TransitionMatrices tm = cascade::refinement::transition_matrices(m, w);
  const PatchIndexing pi(w);
  const cascade::refinement::VectorizedSeed seed(pyramid(), w);
  const cascade::refinement::DirectOracle direct(pyramid(), m);

  // n = 1 at the apex: only the c_{1,1} term lands on the support peak.
  CHECK(direct.eval(1, {Rational(1), Rational(1)}) == Rational(1));

  Gen gen(0x3e5eed05);
  const int reps[5] = {300, 300, 200, 100, 40};
  for (unsigned n = 0; n <= 4; ++n) {
    for (int iter = 0; iter < reps[n]; ++iter) {
      const Vec2 z{gen.rat_in(0, 1, 15), gen.rat_in(0, 1, 15)};
      const auto state = cascade::refinement::oracle_cascade(seed, tm, n, z);
      if (n == 4) {
        const Rational want = direct.eval(n, z);  // patch (1,1) only
        CHECK(state[pi.b11()] == want);
      } else {
        for (std::int64_t a = 1; a <= w.L1; ++a) {
          for (std::int64_t b = 1; b <= w.L2; ++b) {
            const Rational want = direct.eval(
                n, {z.x + Rational(a - 1), z.y + Rational(b - 1)});
            CHECK(state[pi.index(a, b)] == want);
          }
        }
      }
    }
  }

  // Sticky endpoint: digits all (1,1), so the state is T_11^n G(1,1).
  const unsigned n = 3;
  const auto at_one =
      cascade::refinement::oracle_cascade(seed, tm, n, {Rational(1),
                                                        Rational(1)});
  auto manual = seed.eval({Rational(1), Rational(1)});
  for (unsigned j = 0; j < n; ++j) {
    manual = cascade::refinement::matvec(tm.at(1, 1), manual);
  }
  REQUIRE(at_one.size() == manual.size());
  for (std::size_t i = 0; i < manual.size(); ++i) {
    CHECK(at_one[i] == manual[i]);
  }

  // n = 0 reduces to the vectorized seed itself.
  const Vec2 z0{Rational(2, 7), Rational(3, 5)};
  const auto state0 = cascade::refinement::oracle_cascade(seed, tm, 0, z0);
  const auto direct0 = seed.eval(z0);
  for (std::size_t i = 0; i < direct0.size(); ++i) {
    CHECK(state0[i] == direct0[i]);
  }
}

TEST_CASE("zero mask and window vanishing") {
  Mask zero;
  const cascade::refinement::DirectOracle oz(pyramid(), zero);
  Gen gen(0x3e5eed06);
  for (unsigned n = 1; n <= 3; ++n) {
    for (int iter = 0; iter < 50; ++iter) {
      const Vec2 p{gen.rat_in(-1, 3, 9), gen.rat_in(-1, 3, 9)};
      CHECK(oz.eval(n, p) == Rational(0));
    }
  }

  // With a certificate, V^n g vanishes outside the window.
  const cascade::refinement::DirectOracle direct(pyramid(), hat_mask());
  auto outside_point = [&]() -> Vec2 {
    for (;;) {
      const Vec2 p{gen.rat_in(-2, 4, 11), gen.rat_in(-2, 4, 11)};
      if (p.x.sign() < 0 || p.y.sign() < 0 || p.x > Rational(2) ||
          p.y > Rational(2)) {
        return p;
      }
    }
  };
  const int reps[5] = {0, 400, 300, 30, 8};
  for (unsigned n = 1; n <= 4; ++n) {
    for (int iter = 0; iter < reps[n]; ++iter) {
      const Vec2 p = outside_point();
      CHECK(direct.eval(n, p) == Rational(0));
    }
  }
}

TEST_CASE("mask and window json round-trips and errors") {
  const Mask m = hat_mask();
  const auto j = cascade::io::mask_to_json(m);
  CHECK(j.at("entries").size() == 9);
  const Mask back = cascade::io::mask_from_json(j);
  CHECK(back.entries == m.entries);
  CHECK(cascade::io::canonical_dump(cascade::io::mask_to_json(back)) ==
        cascade::io::canonical_dump(j));

  using cascade::io::json;
  CHECK_THROWS_AS(cascade::io::mask_from_json(json::parse("{}")), ParseError);
  CHECK_THROWS_AS(
      cascade::io::mask_from_json(json::parse(R"({"entries":[[0,0]]})")),
      ParseError);
  CHECK_THROWS_AS(cascade::io::mask_from_json(
                      json::parse(R"({"entries":[[0,0,0.25]]})")),
                  ParseError);
  CHECK_THROWS_AS(cascade::io::mask_from_json(
                      json::parse(R"({"entries":[["a",0,"1/4"]]})")),
                  ParseError);

  const Window w{2, 3};
  const auto wj = cascade::io::window_to_json(w);
  const Window wback = cascade::io::window_from_json(wj);
  CHECK(wback.L1 == 2);
  CHECK(wback.L2 == 3);
  CHECK_THROWS_AS(cascade::io::window_from_json(json::parse("{}")),
                  ParseError);
  CHECK_THROWS_AS(cascade::io::window_from_json(
                      json::parse(R"({"L1":0,"L2":2})")),
                  ParseError);
  CHECK_THROWS_AS(cascade::io::window_from_json(
                      json::parse(R"({"L1":1.5,"L2":2})")),
                  ParseError);
}
