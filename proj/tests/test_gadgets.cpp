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
// Selector and product-gadget tests: trapezoid traces against an independent
// closed form, partition of unity, binary digit reads off the transition
// set, structural weight growth, and the three exact gadget identities.

#include <cstdint>
#include <random>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "cascade/controller.hpp"
#include "cascade/gadgets.hpp"
#include "cascade/network.hpp"

namespace {

using cascade::DomainError;
using cascade::Rational;
using cascade::controller::loop_E;
using cascade::gadgets::SelectorParams;
using cascade::ir::ReluNetwork;

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

Rational net_at(const ReluNetwork& net, const Rational& x, const Rational& y) {
  return cascade::ir::eval_exact(net, {x, y})[0];
}

// Independent trapezoid: piecewise formula evaluated directly.
Rational chi0_oracle(const Rational& t, const Rational& dn) {
  const Rational half(1, 2), one(1);
  if (t.sign() >= 0 && t <= dn) return t / dn;
  if (t > dn && t <= half) return one;
  if (t > half && t <= half + dn) return one - (t - half) / dn;
  return Rational(0);
}

bool in_jn(const Rational& t, const Rational& dn) {
  const Rational half(1, 2);
  return (t.sign() >= 0 && t <= dn) || (t >= half && t <= half + dn);
}

}  // namespace

TEST_CASE("selector params: delta_n formula and validation") {
  for (unsigned n = 0; n <= 10; ++n) {
    const SelectorParams p{Rational(1, 2), Rational(1, 4), n};
    CHECK(p.delta_n() ==
          Rational(1, 2) * Rational(1, 4) * cascade::pow2(-static_cast<int>(n)));
  }
  const SelectorParams big{Rational(1), Rational(1, 4), 0};
  const SelectorParams none{Rational(0), Rational(1, 4), 0};
  const SelectorParams flat{Rational(1, 2), Rational(1, 2), 0};
  CHECK_THROWS_AS(big.check(), DomainError);
  CHECK_THROWS_AS(none.check(), DomainError);
  CHECK_THROWS_AS(flat.check(), DomainError);
  CHECK_THROWS_AS(cascade::gadgets::build_selector(2, SelectorParams{}),
                  DomainError);
}

TEST_CASE("selectors: traces, partition of unity, binary reads") {
  Gen gen(1312);
  for (const unsigned n : {0u, 1u, 2u, 3u}) {
    const SelectorParams p{Rational(1, 2), Rational(1, 4), n};
    const Rational dn = p.delta_n();
    const ReluNetwork chi0 = cascade::gadgets::build_selector(0, p);
    const ReluNetwork chi1 = cascade::gadgets::build_selector(1, p);
    CHECK(chi0.input_dim() == 2);
    CHECK(chi0.output_dim() == 1);

    // Fixed examples: plateau reads and the seam.
    CHECK(net_at(chi0, loop_E(Rational(1, 4)).x, loop_E(Rational(1, 4)).y) ==
          Rational(1));
    CHECK(net_at(chi0, loop_E(Rational(3, 4)).x, loop_E(Rational(3, 4)).y) ==
          Rational(0));
    CHECK(net_at(chi0, Rational(0), Rational(0)) == Rational(0));
    CHECK(net_at(chi1, Rational(0), Rational(0)) == Rational(1));

    // Trace agreement, partition of unity, and range at random parameters,
    // plus the trapezoid breakpoints themselves.
    std::vector<Rational> ts = {Rational(0),           dn,
                                Rational(1, 2),        Rational(1, 2) + dn,
                                dn / Rational(2),      Rational(1),
                                Rational(1, 3),        Rational(2, 3),
                                Rational(1, 2) + dn / Rational(2)};
    for (int i = 0; i < 500; ++i) ts.push_back(gen.rat_in(0, 1, 640));
    for (const Rational& t : ts) {
      const auto z = loop_E(t);
      const Rational v0 = net_at(chi0, z.x, z.y);
      const Rational v1 = net_at(chi1, z.x, z.y);
      CHECK(v0 == chi0_oracle(t, dn));
      CHECK(v1 == Rational(1) - chi0_oracle(t, dn));
      CHECK(v0 + v1 == Rational(1));
      CHECK(v0.sign() >= 0);
      CHECK(v0 <= Rational(1));
      CHECK(v1.sign() >= 0);
      CHECK(v1 <= Rational(1));
      if (!in_jn(t, dn)) {
        const bool first_half = t < Rational(1, 2);
        CHECK(v0 == (first_half ? Rational(1) : Rational(0)));
        CHECK(v1 == (first_half ? Rational(0) : Rational(1)));
      }
    }
  }
}

TEST_CASE("selectors: maximal weight doubles per depth step") {
  std::vector<Rational> max0, max1;
  std::vector<Rational> ramp;
  for (unsigned n = 0; n <= 6; ++n) {
    const SelectorParams p{Rational(1, 2), Rational(1, 4), n};
    max0.push_back(cascade::gadgets::build_selector(0, p).stats().max_abs_weight);
    max1.push_back(cascade::gadgets::build_selector(1, p).stats().max_abs_weight);
    ramp.push_back(Rational(2) / (Rational(3) * p.delta_n()));
  }
  // chi_0 doubles from the start; chi_1 carries an n-independent weight 6
  // (difference of its two opposing plateau pieces) that dominates the ramp
  // slope only at n = 0, so its exact doubling starts at n = 1.
  for (std::size_t i = 1; i < max0.size(); ++i) {
    CHECK(max0[i] == Rational(2) * max0[i - 1]);
    if (i >= 2) CHECK(max1[i] == Rational(2) * max1[i - 1]);
  }
  CHECK(max1[0] == Rational(6));
  // The dominant coefficient is the ramp slope 2/(3 delta_n).
  for (std::size_t i = 0; i < max0.size(); ++i) {
    CHECK(max0[i] == ramp[i]);
    if (i >= 1) CHECK(max1[i] == ramp[i]);
  }
}

TEST_CASE("product gadget: lemma identities") {
  using cascade::gadgets::product_gadget;

  // Fixed examples.
  {
    const ReluNetwork g = product_gadget(Rational(2), 2);
    CHECK(g.input_dim() == 3);
    CHECK(g.output_dim() == 2);
    CHECK(cascade::ir::eval_exact(
              g, {Rational(1), Rational(3, 2), Rational(-1)}) ==
          std::vector<Rational>{Rational(3, 2), Rational(-1)});
    CHECK(cascade::ir::eval_exact(
              g, {Rational(0), Rational(3, 2), Rational(-1)}) ==
          std::vector<Rational>{Rational(0), Rational(0)});
  }
  {
    const ReluNetwork g = product_gadget(Rational(1), 1);
    CHECK(cascade::ir::eval_exact(g, {Rational(1, 2), Rational(1)}) ==
          std::vector<Rational>{Rational(1, 2)});
  }

  // Structural shape: widths 2N+1 and 2N, three affine layers. The paper
  // states the same architecture counting its two hidden layers.
  {
    const ReluNetwork g = product_gadget(Rational(2), 3);
    const auto s = g.stats();
    CHECK(s.width == 7);
    CHECK(s.depth == 3);
    CHECK(g.layers()[0].out_dim == 7);
    CHECK(g.layers()[1].out_dim == 6);
  }

  // Identity families on the stated grid for several scales and sizes.
  for (const Rational& a :
       {Rational(2), Rational(1, 3), Rational(7, 5), Rational(1)}) {
    for (const std::uint32_t N : {1u, 2u, 3u}) {
      const ReluNetwork g = product_gadget(a, N);
      const std::vector<Rational> lams = {Rational(0), Rational(1, 4),
                                          Rational(1, 2), Rational(3, 4),
                                          Rational(1)};
      const std::vector<Rational> ys = {-a, -a / Rational(2), Rational(0),
                                        a / Rational(2), a};
      // Pi_a(lambda, 0) = 0 for every lambda.
      for (const Rational& lam : lams) {
        std::vector<Rational> in(N + 1, Rational(0));
        in[0] = lam;
        const auto out = cascade::ir::eval_exact(g, in);
        for (const Rational& v : out) CHECK(v == Rational(0));
      }
      // Pi_a(1, y) = y and Pi_a(0, y) = 0 over the y grid (all component
      // combinations for N <= 2, a scanned diagonal family for N = 3).
      std::vector<std::vector<Rational>> states;
      if (N <= 2) {
        states.emplace_back();
        for (std::uint32_t c = 0; c < N; ++c) {
          std::vector<std::vector<Rational>> next;
          for (const auto& s : states) {
            for (const Rational& y : ys) {
              auto e = s;
              e.push_back(y);
              next.push_back(std::move(e));
            }
          }
          states = std::move(next);
        }
      } else {
        for (const Rational& y : ys) {
          for (const Rational& w : ys) {
            states.push_back({y, w, y});
            states.push_back({w, y, w});
          }
        }
      }
      for (const auto& y : states) {
        std::vector<Rational> on = {Rational(1)};
        on.insert(on.end(), y.begin(), y.end());
        CHECK(cascade::ir::eval_exact(g, on) == y);
        on[0] = Rational(0);
        const auto zero = cascade::ir::eval_exact(g, on);
        for (const Rational& v : zero) CHECK(v == Rational(0));
      }
    }
  }

  // Random interior checks of the same identities.
  Gen gen(41);
  for (int i = 0; i < 300; ++i) {
    const Rational a = gen.rat_in(0, 3, 50) + Rational(1, 50);
    const std::uint32_t N = static_cast<std::uint32_t>(gen.int_in(1, 4));
    const ReluNetwork g = product_gadget(a, N);
    std::vector<Rational> y;
    for (std::uint32_t c = 0; c < N; ++c) {
      y.push_back(a * gen.rat_in(-1, 1, 90));
    }
    std::vector<Rational> in = {Rational(1)};
    in.insert(in.end(), y.begin(), y.end());
    CHECK(cascade::ir::eval_exact(g, in) == y);
    in[0] = Rational(0);
    for (const Rational& v : cascade::ir::eval_exact(g, in)) {
      CHECK(v == Rational(0));
    }
    std::fill(in.begin() + 1, in.end(), Rational(0));
    in[0] = gen.rat_in(0, 1, 70);
    for (const Rational& v : cascade::ir::eval_exact(g, in)) {
      CHECK(v == Rational(0));
    }
  }

  // Scale and size validation.
  CHECK_THROWS_AS(product_gadget(Rational(0), 2), DomainError);
  CHECK_THROWS_AS(product_gadget(Rational(-1), 2), DomainError);
  CHECK_THROWS_AS(product_gadget(Rational(1), 0), DomainError);
}
