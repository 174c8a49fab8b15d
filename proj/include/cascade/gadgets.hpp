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
// Depth-dependent loop selectors and the exact product gadget:
//
//   * build_selector(q, p) - the binary selector chi_{q,n} on the loop
//     Gamma: chi_{0,n}(E(t)) is the trapezoid ramping 0 -> 1 on [0,delta_n],
//     1 on [delta_n,1/2], ramping back to 0 on [1/2,1/2+delta_n], and 0 on
//     the rest; chi_{1,n} is the complementary trapezoid. Off the transition
//     set J_n = [0,delta_n] u [1/2,1/2+delta_n] the selectors are binary and
//     read the next dyadic digit; on Gamma they always form an exact
//     partition of unity with values in [0,1].
//
//   * product_gadget(a, N) - the exact gate
//         Pi_a(lambda, y) = -ReLU(lambda a 1 - y)
//                           - ReLU((1-lambda) a 1 - ReLU(-y)) + a 1,
//     which for lambda in [0,1] and y in [-a,a]^N satisfies Pi_a(1,y) = y,
//     Pi_a(0,y) = 0 and Pi_a(lambda,0) = 0. It multiplexes a bounded state
//     by a selector value without implementing general multiplication.

#ifndef CASCADE_GADGETS_HPP
#define CASCADE_GADGETS_HPP

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "cascade/controller.hpp"
#include "cascade/cpwl.hpp"
#include "cascade/network.hpp"
#include "cascade/rational.hpp"

namespace cascade {
namespace gadgets {

// Parameters of the depth-n selector pair. delta_n shrinks geometrically so
// the transition set J_n loses measure as the cascade deepens.
struct SelectorParams {
  Rational delta_bar = Rational(1, 2);
  Rational rho = Rational(1, 4);
  unsigned n = 0;

  void check() const {
    if (!(delta_bar.sign() > 0 && delta_bar < Rational(1))) {
      throw DomainError("selector params: need 0 < delta_bar < 1");
    }
    if (!(rho.sign() > 0 && rho < Rational(1, 2))) {
      throw DomainError("selector params: need 0 < rho < 1/2");
    }
  }

  Rational delta_n() const {
    check();
    return delta_bar * rho * pow2(-static_cast<int>(n));
  }
};

// chi_{q,n} along the loop parameter; chi_1 is the complement of chi_0.
// This is the ground truth the compiled selectors are checked against.
inline Rational selector_trace(const Rational& t, const Rational& dn, int q) {
  const Rational half(1, 2);
  Rational v;
  if (t <= dn) {
    v = t / dn;
  } else if (t <= half) {
    v = Rational(1);
  } else if (t <= half + dn) {
    v = Rational(1) - (t - half) / dn;
  } else {
    v = Rational(0);
  }
  return q == 0 ? v : Rational(1) - v;
}

// chi_{q,n} as a CPwL function on Delta: the trace breakpoints and the loop
// corners coned to the standard apex. Affine in t between consecutive ring
// parameters on both sides, so the mesh restricted to Gamma equals the trace
// exactly. The apex takes the seam value of the trace (0 for chi_0, 1 for
// chi_1): that choice makes the steepest piece coefficients pure multiples
// of 1/delta_n, so the maximal weight doubles exactly per depth step as
// soon as the ramp slope 2/(3 delta_n) dominates the n-independent plateau
// pieces (immediately for chi_0; from n = 1 for chi_1 at the defaults).
inline cpwl::CpwlFunction2D selector_function(int q, const SelectorParams& p) {
  if (q != 0 && q != 1) throw DomainError("selector: digit must be 0 or 1");
  const Rational dn = p.delta_n();
  std::vector<Rational> ts = {Rational(0),     Rational(1, 3), Rational(2, 3),
                              dn,              Rational(1, 2), Rational(1, 2) + dn};
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<cpwl::Vec2> ring;
  std::vector<Rational> vals;
  for (const Rational& t : ts) {
    ring.push_back(controller::loop_E(t));
    vals.push_back(selector_trace(t, dn, q));
  }
  const Rational apex_value = selector_trace(Rational(0), dn, q);
  return {controller::cone_mesh(std::move(ring), std::move(vals),
                                controller::cone_apex(), apex_value),
          Rational(0)};
}

// The selector compiled to a network (2 -> 1), exact on Delta. The measured
// per-depth weight constant C with max |weight| = C * 2^n goes into meta.
inline ir::ReluNetwork build_selector(int q, const SelectorParams& p) {
  const cpwl::CpwlFunction2D f = selector_function(q, p);
  ir::ReluNetwork net = cpwl::compile_2d(f);
  net.meta()["selector_digit"] = q == 0 ? "0" : "1";
  net.meta()["selector_delta_n"] = p.delta_n().str();
  net.meta()["cone_apex_value"] = f.mesh.values().back().str();
  net.meta()["weight_scale_constant"] =
      (net.stats().max_abs_weight * pow2(-static_cast<int>(p.n))).str();
  return net;
}

// Pi_a as a network (N+1 -> N): input (lambda, y_1..y_N), hidden layers of
// widths 2N+1 and 2N (three affine layers). lambda rides a single ReLU
// channel, which is exact on the gadget's domain lambda >= 0.
inline ir::ReluNetwork product_gadget(const Rational& a, std::uint32_t N) {
  if (a.sign() <= 0) throw DomainError("product gadget: scale must be > 0");
  if (N == 0) throw DomainError("product gadget: state must be nonempty");

  // Hidden 1: ReLU(lambda), then ReLU(y_i), ReLU(-y_i) per component.
  ir::LayerSpec h1;
  h1.push_back({{{0, Rational(1)}}, Rational(0)});
  for (std::uint32_t i = 0; i < N; ++i) {
    h1.push_back({{{i + 1, Rational(1)}}, Rational(0)});
    h1.push_back({{{i + 1, Rational(-1)}}, Rational(0)});
  }

  // Hidden 2: p_i = ReLU(a lambda - y_i), q_i = ReLU(a - a lambda - ReLU(-y_i)).
  ir::LayerSpec h2;
  for (std::uint32_t i = 0; i < N; ++i) {
    const std::uint32_t ypos = 2 * i + 1, yneg = 2 * i + 2;
    h2.push_back(
        {{{0, a}, {ypos, Rational(-1)}, {yneg, Rational(1)}}, Rational(0)});
    h2.push_back({{{0, -a}, {yneg, Rational(-1)}}, a});
  }

  // Output: -p_i - q_i + a.
  ir::LayerSpec out;
  for (std::uint32_t i = 0; i < N; ++i) {
    out.push_back(
        {{{2 * i, Rational(-1)}, {2 * i + 1, Rational(-1)}}, a});
  }

  return ir::ReluNetwork::build(N + 1, {h1, h2, out});
}

}  // namespace gadgets
}  // namespace cascade

#endif  // CASCADE_GADGETS_HPP
