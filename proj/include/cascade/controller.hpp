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
// Dyadic loop controller over the triangle Delta with vertices
// a0 = (0,0), a1 = (1,1), a2 = (1,0) and boundary loop Gamma:
//
//   * loop_E          - the closed polygonal parametrization E : [0,1] -> Gamma
//                       with seam E(0) = E(1) = a0,
//   * loop_F_boundary - the boundary self-map F_Gamma conjugating E to the
//                       doubling map, F_Gamma(E(t)) = E(r(t)),
//   * build_F_net     - a CPwL extension of F_Gamma to the plane (exact on
//                       Gamma), compiled to a ReLU network,
//   * build_controller_iterate - the torus controller z_n(x,y) =
//                       (E(r^n x), E(r^n y)) as one E block and n F blocks,
//   * build_readouts  - complementary terminal readouts rho^-/rho^+ that
//                       invert E away from the seam,
//   * build_H_readout - the four-branch min network computing H(R_n(x,y))
//                       exactly for a special atom H.
//
// All constructions are exact over rationals; loop transport never leaves
// Gamma, so the off-Gamma behavior of the extensions is never exercised.

#ifndef CASCADE_CONTROLLER_HPP
#define CASCADE_CONTROLLER_HPP

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "cascade/cpwl.hpp"
#include "cascade/network.hpp"
#include "cascade/rational.hpp"

namespace cascade {
namespace controller {

inline cpwl::Vec2 vertex_a0() { return {Rational(0), Rational(0)}; }
inline cpwl::Vec2 vertex_a1() { return {Rational(1), Rational(1)}; }
inline cpwl::Vec2 vertex_a2() { return {Rational(1), Rational(0)}; }

// Parameters shared by the readouts and the downstream selector/atom
// machinery. rho is the support inset of special atoms; eps_bar is the seam
// ramp width of the terminal readouts.
struct ControllerParams {
  Rational rho = Rational(1, 4);
  Rational eps_bar = Rational(1, 8);

  void check() const {
    if (!(eps_bar.sign() > 0 && eps_bar < rho && rho < Rational(1, 2))) {
      throw DomainError("controller params: need 0 < eps_bar < rho < 1/2");
    }
  }
};

// E(t): traverses the diagonal a0 -> a1, the right edge a1 -> a2, and the
// bottom edge a2 -> a0, each at parameter speed 3.
inline cpwl::Vec2 loop_E(const Rational& t) {
  if (t.sign() < 0 || t > Rational(1)) {
    throw DomainError("loop_E: parameter outside [0,1]");
  }
  const Rational three(3);
  if (t <= Rational(1, 3)) return {three * t, three * t};
  if (t <= Rational(2, 3)) return {Rational(1), Rational(2) - three * t};
  return {three - three * t, Rational(0)};
}

// Exact membership test for Gamma = boundary of Delta.
inline bool on_gamma(const cpwl::Vec2& z) {
  const Rational zero(0), one(1);
  if (z.x == z.y) return z.x >= zero && z.x <= one;
  if (z.x == one) return z.y >= zero && z.y <= one;
  if (z.y == zero) return z.x >= zero && z.x <= one;
  return false;
}

// The boundary self-map F_Gamma, one affine rule per half-edge of Gamma.
// Satisfies F_Gamma(E(t)) = E(r(t)) with r the doubling map; the rules agree
// at shared corners and half-edge midpoints, so dispatch order is immaterial.
inline cpwl::Vec2 loop_F_boundary(const cpwl::Vec2& z) {
  if (!on_gamma(z)) throw DomainError("loop_F_boundary: point off Gamma");
  const Rational one(1), two(2), half(1, 2);
  if (z.x == z.y) {
    const Rational& s = z.x;
    if (s <= half) return {two * s, two * s};
    return {one, two - two * s};
  }
  if (z.x == one) {
    const Rational& y = z.y;
    if (y >= half) return {two * y - one, Rational(0)};
    return {one - two * y, one - two * y};
  }
  const Rational& x = z.x;
  if (x >= half) return {one, two * x - one};
  return {two * x, Rational(0)};
}

// Fan triangulation of a convex polygon: ring vertices (in cyclic order)
// coned to an interior apex. Triangle winding is normalized by the mesh.
inline cpwl::CpwlMesh cone_mesh(std::vector<cpwl::Vec2> ring,
                                std::vector<Rational> ring_values,
                                const cpwl::Vec2& apex,
                                const Rational& apex_value) {
  const auto n = static_cast<std::uint32_t>(ring.size());
  std::vector<cpwl::Vec2> verts = std::move(ring);
  verts.push_back(apex);
  std::vector<Rational> vals = std::move(ring_values);
  vals.push_back(apex_value);
  std::vector<cpwl::Tri> tris;
  tris.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    tris.push_back({i, (i + 1) % n, n});
  }
  return cpwl::CpwlMesh(std::move(verts), std::move(tris), std::move(vals));
}

// Interior apex used by every cone triangulation of Delta: off all three
// boundary lines, so no fan triangle degenerates.
inline cpwl::Vec2 cone_apex() { return {Rational(2, 3), Rational(1, 3)}; }

namespace detail {

// Coordinate traces of E as 1D CPwL functions: E(t) = (e1(t), e2(t)).
inline cpwl::PiecewiseLinear1D e_component(int comp) {
  cpwl::PiecewiseLinear1D f;
  f.breakpoints = {Rational(0), Rational(1, 3), Rational(2, 3), Rational(1)};
  if (comp == 0) {
    f.values = {Rational(0), Rational(1), Rational(1), Rational(0)};
  } else {
    f.values = {Rational(0), Rational(1), Rational(0), Rational(0)};
  }
  f.slope_left = Rational(0);
  f.slope_right = Rational(0);
  return f;
}

// Component `comp` of the extension of F_Gamma to Delta: the six boundary
// breakpoints E(k/6) coned to the apex, with the apex value set to the
// average of the boundary values. F_Gamma is affine on each half-edge, so
// the cone restricted to Gamma reproduces it exactly.
inline cpwl::CpwlFunction2D f_component(int comp) {
  std::vector<cpwl::Vec2> ring;
  std::vector<Rational> vals;
  Rational sum(0);
  for (int k = 0; k < 6; ++k) {
    const cpwl::Vec2 p = loop_E(Rational(k, 6));
    const cpwl::Vec2 q = loop_F_boundary(p);
    ring.push_back(p);
    vals.push_back(comp == 0 ? q.x : q.y);
    sum = sum + vals.back();
  }
  return {cone_mesh(std::move(ring), std::move(vals), cone_apex(),
                    sum / Rational(6)),
          Rational(0)};
}

// Readout value along the loop parameter. The minus readout ramps from 1 at
// the seam down to eps at t = eps and is the identity on [eps, 1]; the plus
// readout is the identity on [0, 1-eps] and ramps from 1-eps down to 0 at
// t = 1. Both traces are continuous across the seam E(0) = E(1).
inline Rational readout_trace(const Rational& t, const Rational& eps,
                              bool plus) {
  const Rational one(1);
  if (!plus) {
    if (t <= eps) return one - t * (one - eps) / eps;
    return t;
  }
  if (t <= one - eps) return t;
  return (one - t) * (one - eps) / eps;
}

}  // namespace detail

// The readout rho^- (plus = false) or rho^+ (plus = true) as a CPwL function
// on Delta: boundary values follow readout_trace at the loop breakpoints
// {0, 1/3, 2/3} plus the ramp endpoint, coned to an interior apex of value
// 1/2. The trace is affine in t between consecutive breakpoints and E is
// affine there too, so the mesh restricted to Gamma equals the trace exactly.
inline cpwl::CpwlFunction2D readout_function(const ControllerParams& params,
                                             bool plus) {
  params.check();
  const Rational eps = params.eps_bar;
  std::vector<Rational> ts = {Rational(0), Rational(1, 3), Rational(2, 3)};
  ts.push_back(plus ? Rational(1) - eps : eps);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<cpwl::Vec2> ring;
  std::vector<Rational> vals;
  for (const Rational& t : ts) {
    ring.push_back(loop_E(t));
    vals.push_back(detail::readout_trace(t, eps, plus));
  }
  return {cone_mesh(std::move(ring), std::move(vals), cone_apex(),
                    Rational(1, 2)),
          Rational(0)};
}

// CPwL extension of F_Gamma, compiled per component and juxtaposed (2 -> 2).
// Exact at every rational point of Gamma.
inline ir::ReluNetwork build_F_net() {
  const cpwl::CpwlFunction2D f1 = detail::f_component(0);
  const cpwl::CpwlFunction2D f2 = detail::f_component(1);
  const ir::ReluNetwork n1 = cpwl::compile_2d(f1);
  const ir::ReluNetwork n2 = cpwl::compile_2d(f2);
  return ir::juxtapose({&n1, &n2});
}

// The block E(x,y) = (E(x), E(y)) as a network (2 -> 4): each coordinate
// trace is compiled in one variable and wired to the proper input.
inline ir::ReluNetwork build_E_net() {
  const ir::ReluNetwork e1 = cpwl::compile_1d(detail::e_component(0));
  const ir::ReluNetwork e2 = cpwl::compile_1d(detail::e_component(1));
  const ir::LayerSpec id1 = ir::identity_rows(1);
  const ir::ReluNetwork ex1 = ir::affine_wrap(e1, ir::selection_rows({0}), 2, id1);
  const ir::ReluNetwork ex2 = ir::affine_wrap(e2, ir::selection_rows({0}), 2, id1);
  const ir::ReluNetwork ey1 = ir::affine_wrap(e1, ir::selection_rows({1}), 2, id1);
  const ir::ReluNetwork ey2 = ir::affine_wrap(e2, ir::selection_rows({1}), 2, id1);
  return ir::juxtapose({&ex1, &ex2, &ey1, &ey2});
}

// One torus step: the juxtaposed (F, F) block (4 -> 4) advancing the pair
// (E(r^j x), E(r^j y)) to (E(r^{j+1} x), E(r^{j+1} y)).
inline ir::ReluNetwork build_step_net() {
  const ir::ReluNetwork f = build_F_net();
  const ir::LayerSpec id2 = ir::identity_rows(2);
  const ir::ReluNetwork f_first =
      ir::affine_wrap(f, ir::selection_rows({0, 1}), 4, id2);
  const ir::ReluNetwork f_second =
      ir::affine_wrap(f, ir::selection_rows({2, 3}), 4, id2);
  return ir::juxtapose({&f_first, &f_second});
}

// One E block followed by n copies of the torus step: computes
// z_n(x,y) = (E(r^n x), E(r^n y)) exactly on [0,1]^2. Width is independent
// of n; depth is affine in n.
inline ir::ReluNetwork build_controller_iterate(unsigned n) {
  ir::ReluNetwork net = build_E_net();
  if (n == 0) return net;
  const ir::ReluNetwork ff = build_step_net();
  for (unsigned i = 0; i < n; ++i) net = ir::compose(net, ff);
  return net;
}

// The pair (rho^-, rho^+), each compiled to a network (2 -> 1), exact on
// Delta. rho^- maps Gamma into [eps_bar, 1], rho^+ into [0, 1-eps_bar];
// rho^-(E(t)) = t on [eps_bar, 1] and rho^+(E(t)) = t on [0, 1-eps_bar].
inline std::pair<ir::ReluNetwork, ir::ReluNetwork> build_readouts(
    const ControllerParams& params) {
  return {cpwl::compile_2d(readout_function(params, false)),
          cpwl::compile_2d(readout_function(params, true))};
}

// Validates that H is a special atom for the given rho: compactly supported,
// nonnegative at every vertex (hence everywhere), and supported inside
// [rho, 1-rho]^2. A triangle with any nonzero vertex value is nonzero on a
// dense subset of itself, so requiring every such triangle to lie inside the
// box is an exact support test.
inline void check_special_atom(const cpwl::CpwlFunction2D& H,
                               const ControllerParams& params) {
  params.check();
  if (!cpwl::is_compactly_supported(H)) {
    throw DomainError("special atom: function must be compactly supported");
  }
  for (const Rational& v : H.mesh.values()) {
    if (v.sign() < 0) {
      throw DomainError("special atom: negative vertex value");
    }
  }
  const Rational lo = params.rho;
  const Rational hi = Rational(1) - params.rho;
  const auto inside = [&](const cpwl::Vec2& p) {
    return p.x >= lo && p.x <= hi && p.y >= lo && p.y <= hi;
  };
  const auto& verts = H.mesh.vertices();
  const auto& vals = H.mesh.values();
  for (const cpwl::Tri& t : H.mesh.triangles()) {
    if (vals[t.a].is_zero() && vals[t.b].is_zero() && vals[t.c].is_zero()) {
      continue;
    }
    if (!inside(verts[t.a]) || !inside(verts[t.b]) || !inside(verts[t.c])) {
      throw DomainError("special atom: support leaves [rho, 1-rho]^2");
    }
  }
}

// The scalar readout network: controller iterate to z_n, then the four
// branches H(rho^s(z_n1), rho^t(z_n2)) for s,t in {-,+} in parallel, then a
// two-level min tree. Equals H(R_n(x,y)) exactly for every rational (x,y) in
// [0,1]^2, including seam and dyadic points: in each coordinate at least one
// readout inverts E, and a wrong branch lands in the seam collar where the
// nonnegative H vanishes, so the min discards it.
inline ir::ReluNetwork build_H_readout(const cpwl::CpwlFunction2D& H,
                                       const ControllerParams& params,
                                       unsigned n) {
  check_special_atom(H, params);
  const ir::ReluNetwork h = cpwl::compile_2d(H);
  const auto readouts = build_readouts(params);
  const ir::ReluNetwork* rho[2] = {&readouts.first, &readouts.second};
  const ir::LayerSpec id1 = ir::identity_rows(1);
  std::vector<ir::ReluNetwork> branches;
  branches.reserve(4);
  for (int s = 0; s < 2; ++s) {
    for (int t = 0; t < 2; ++t) {
      const ir::ReluNetwork first =
          ir::affine_wrap(*rho[s], ir::selection_rows({0, 1}), 4, id1);
      const ir::ReluNetwork second =
          ir::affine_wrap(*rho[t], ir::selection_rows({2, 3}), 4, id1);
      const ir::ReluNetwork coords = ir::juxtapose({&first, &second});
      branches.push_back(ir::compose(coords, h));
    }
  }
  std::vector<const ir::ReluNetwork*> refs;
  refs.reserve(branches.size());
  for (const auto& b : branches) refs.push_back(&b);
  const ir::ReluNetwork four = ir::juxtapose(refs);

  ir::TreeReducer reducer(4);
  std::vector<std::vector<ir::RowSpec>> groups(1);
  for (std::uint32_t i = 0; i < 4; ++i) {
    groups[0].push_back({{{i, Rational(1)}}, Rational(0)});
  }
  const ir::RowSpec out =
      reducer.reduce(std::move(groups), /*inner_min=*/true, /*outer_max=*/false);
  const ir::ReluNetwork min4 = reducer.finish(out);

  return ir::compose(build_controller_iterate(n), ir::compose(four, min4));
}

}  // namespace controller
}  // namespace cascade

#endif  // CASCADE_CONTROLLER_HPP
