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
// CPwL representation, evaluation, refinement, and compilation tests.
// Oracles are written independently over boost::multiprecision::cpp_rational:
// a direct segment-walk evaluator in 1D and a linear-scan barycentric
// evaluator in 2D. Compiled networks are evaluated exactly and compared to
// the oracles with zero tolerance.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <catch2/catch_amalgamated.hpp>

#include "cascade/cpwl.hpp"
#include "cascade/network.hpp"
#include "cascade/serialize.hpp"

namespace {

using boost::multiprecision::cpp_rational;
using cascade::DomainError;
using cascade::ParseError;
using cascade::Rational;
using cascade::cpwl::CpwlFunction2D;
using cascade::cpwl::CpwlMesh;
using cascade::cpwl::PiecewiseLinear1D;
using cascade::cpwl::Tri;
using cascade::cpwl::Vec2;

cpp_rational br(const Rational& r) { return cpp_rational(r.str()); }

bool same(const Rational& r, const cpp_rational& o) { return br(r) == o; }

// ---------------------------------------------------------------------------
// Independent oracles

cpp_rational oracle_pl1d(const PiecewiseLinear1D& f, const Rational& t_in) {
  const cpp_rational t = br(t_in);
  std::vector<cpp_rational> b, v;
  for (const auto& x : f.breakpoints) b.push_back(br(x));
  for (const auto& x : f.values) v.push_back(br(x));
  if (t <= b.front()) return v.front() + br(f.slope_left) * (t - b.front());
  if (t >= b.back()) return v.back() + br(f.slope_right) * (t - b.back());
  for (std::size_t i = 0; i + 1 < b.size(); ++i) {
    if (b[i] <= t && t <= b[i + 1]) {
      const cpp_rational s = (v[i + 1] - v[i]) / (b[i + 1] - b[i]);
      return v[i] + s * (t - b[i]);
    }
  }
  FAIL("oracle_pl1d: segment scan failed");
  return 0;
}

struct OPoint {
  cpp_rational x, y;
};

cpp_rational ocross(const OPoint& a, const OPoint& b, const OPoint& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// Value of the mesh function from one specific triangle, if p lies in it.
std::optional<cpp_rational> oracle_tri_value(const CpwlMesh& m,
                                             std::size_t ti, const OPoint& p) {
  const Tri& t = m.triangles()[ti];
  const OPoint a{br(m.vertices()[t.a].x), br(m.vertices()[t.a].y)};
  const OPoint b{br(m.vertices()[t.b].x), br(m.vertices()[t.b].y)};
  const OPoint c{br(m.vertices()[t.c].x), br(m.vertices()[t.c].y)};
  const cpp_rational wa = ocross(b, c, p);
  const cpp_rational wb = ocross(c, a, p);
  const cpp_rational wc = ocross(a, b, p);
  if (wa < 0 || wb < 0 || wc < 0) return std::nullopt;
  return (wa * br(m.values()[t.a]) + wb * br(m.values()[t.b]) +
          wc * br(m.values()[t.c])) /
         (wa + wb + wc);
}

cpp_rational oracle_mesh(const CpwlFunction2D& f, const Rational& x,
                         const Rational& y) {
  const OPoint p{br(x), br(y)};
  for (std::size_t ti = 0; ti < f.mesh.triangles().size(); ++ti) {
    if (auto v = oracle_tri_value(f.mesh, ti, p)) return *v;
  }
  return br(f.outside_value);
}

// ---------------------------------------------------------------------------
// Deterministic random data

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  std::int64_t int_in(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(rng() % span);
  }

  // Random rational in [lo, hi] with denominator up to max_den.
  Rational rat_in(std::int64_t lo, std::int64_t hi, std::int64_t max_den) {
    const std::int64_t den = int_in(1, max_den);
    return Rational(int_in(lo * den, hi * den), den);
  }
};

// ---------------------------------------------------------------------------
// Fixture meshes

// Pyramid on [0,2]^2: zero at the corners, one at the apex (1,1).
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

// Unit square split along the diagonal, with generic vertex values.
CpwlFunction2D square_generic() {
  std::vector<Vec2> verts = {{Rational(0), Rational(0)},
                             {Rational(1), Rational(0)},
                             {Rational(1), Rational(1)},
                             {Rational(0), Rational(1)}};
  std::vector<Tri> tris = {{0, 1, 2}, {0, 2, 3}};
  std::vector<Rational> vals = {Rational(3, 7), Rational(-1, 2), Rational(5),
                                Rational(2, 3)};
  return {CpwlMesh(std::move(verts), std::move(tris), std::move(vals)),
          Rational(0)};
}

// L-shaped (non-convex) domain [0,2]x[0,1] with the block [0,1]x[1,2].
CpwlFunction2D l_shape() {
  std::vector<Vec2> verts = {{Rational(0), Rational(0)},
                             {Rational(2), Rational(0)},
                             {Rational(2), Rational(1)},
                             {Rational(1), Rational(1)},
                             {Rational(1), Rational(2)},
                             {Rational(0), Rational(2)}};
  std::vector<Tri> tris = {{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 5}};
  std::vector<Rational> vals = {Rational(0), Rational(1), Rational(0),
                                Rational(2), Rational(0), Rational(0)};
  return {CpwlMesh(std::move(verts), std::move(tris), std::move(vals)),
          Rational(0)};
}

// Sample points tied to the mesh structure: vertices, edge midpoints,
// triangle barycenters.
std::vector<std::pair<Rational, Rational>> structural_points(
    const CpwlMesh& m) {
  std::vector<std::pair<Rational, Rational>> pts;
  for (const auto& v : m.vertices()) pts.emplace_back(v.x, v.y);
  const Rational half(1, 2), third(1, 3);
  std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (const auto& t : m.triangles()) {
    for (auto [u, v] : {std::pair{t.a, t.b}, {t.b, t.c}, {t.c, t.a}}) {
      edges.insert({std::min(u, v), std::max(u, v)});
    }
    const Vec2& a = m.vertices()[t.a];
    const Vec2& b = m.vertices()[t.b];
    const Vec2& c = m.vertices()[t.c];
    pts.emplace_back((a.x + b.x + c.x) * third, (a.y + b.y + c.y) * third);
  }
  for (auto [u, v] : edges) {
    pts.emplace_back((m.vertices()[u].x + m.vertices()[v].x) * half,
                     (m.vertices()[u].y + m.vertices()[v].y) * half);
  }
  return pts;
}

Rational net_at(const cascade::ir::ReluNetwork& net, const Rational& x,
                const Rational& y) {
  return cascade::ir::eval_exact(net, {x, y})[0];
}

}  // namespace

TEST_CASE("compile_1d: hat example and extrapolation") {
  PiecewiseLinear1D hat;
  hat.breakpoints = {Rational(0), Rational(1), Rational(2)};
  hat.values = {Rational(0), Rational(1), Rational(0)};
  hat.slope_left = Rational(0);
  hat.slope_right = Rational(0);
  const auto net = cascade::cpwl::compile_1d(hat);
  CHECK(net.depth() == 2);
  CHECK(net.input_dim() == 1);
  CHECK(net.output_dim() == 1);
  CHECK(cascade::ir::eval_exact(net, {Rational(1, 2)})[0] == Rational(1, 2));
  CHECK(cascade::ir::eval_exact(net, {Rational(-5)})[0] == Rational(0));
  CHECK(cascade::ir::eval_exact(net, {Rational(7)})[0] == Rational(0));
  CHECK(cascade::cpwl::eval_pl1d(hat, Rational(1, 2)) == Rational(1, 2));
}

TEST_CASE("compile_1d: random functions match the segment oracle") {
  Gen gen(0x1d5eed01);
  for (int iter = 0; iter < 60; ++iter) {
    PiecewiseLinear1D f;
    std::set<Rational> bset;
    const int want = static_cast<int>(gen.int_in(2, 6));
    while (static_cast<int>(bset.size()) < want) {
      bset.insert(gen.rat_in(-4, 4, 12));
    }
    f.breakpoints.assign(bset.begin(), bset.end());
    for (std::size_t i = 0; i < f.breakpoints.size(); ++i) {
      f.values.push_back(gen.rat_in(-5, 5, 9));
    }
    f.slope_left = gen.rat_in(-3, 3, 5);
    f.slope_right = gen.rat_in(-3, 3, 5);

    const auto net = cascade::cpwl::compile_1d(f);
    REQUIRE(net.depth() == 2);

    std::vector<Rational> probes = f.breakpoints;
    for (std::size_t i = 0; i + 1 < f.breakpoints.size(); ++i) {
      probes.push_back((f.breakpoints[i] + f.breakpoints[i + 1]) *
                       Rational(1, 2));
    }
    probes.push_back(f.breakpoints.front() - Rational(17, 3));
    probes.push_back(f.breakpoints.back() + Rational(8, 5));
    for (int k = 0; k < 17; ++k) probes.push_back(gen.rat_in(-9, 9, 40));

    for (const auto& t : probes) {
      const cpp_rational want_val = oracle_pl1d(f, t);
      CHECK(same(cascade::ir::eval_exact(net, {t})[0], want_val));
      CHECK(same(cascade::cpwl::eval_pl1d(f, t), want_val));
    }
  }
}

TEST_CASE("pl1d validation errors") {
  PiecewiseLinear1D bad;
  bad.breakpoints = {Rational(0)};
  bad.values = {Rational(1)};
  CHECK_THROWS_AS(cascade::cpwl::compile_1d(bad), DomainError);
  bad.breakpoints = {Rational(1), Rational(0)};
  bad.values = {Rational(0), Rational(0)};
  CHECK_THROWS_AS(cascade::cpwl::eval_pl1d(bad, Rational(0)), DomainError);
  bad.breakpoints = {Rational(0), Rational(1)};
  bad.values = {Rational(0)};
  CHECK_THROWS_AS(cascade::cpwl::compile_1d(bad), DomainError);
}

TEST_CASE("eval_mesh: pyramid fixed points and random oracle agreement") {
  const CpwlFunction2D f = pyramid();
  CHECK(cascade::cpwl::eval_mesh(f, {Rational(1), Rational(1)}) ==
        Rational(1));
  CHECK(cascade::cpwl::eval_mesh(f, {Rational(1, 2), Rational(1, 2)}) ==
        Rational(1, 2));
  CHECK(cascade::cpwl::eval_mesh(f, {Rational(3), Rational(3)}) ==
        Rational(0));
  CHECK(cascade::cpwl::eval_mesh(f, {Rational(-1), Rational(1)}) ==
        Rational(0));

  const cascade::cpwl::MeshEvaluator ev(f);
  Gen gen(0x2d5eed02);
  for (int iter = 0; iter < 1000; ++iter) {
    const Rational x = gen.rat_in(-1, 3, 33);
    const Rational y = gen.rat_in(-1, 3, 33);
    const cpp_rational want_val = oracle_mesh(f, x, y);
    CHECK(same(ev.eval({x, y}), want_val));
    if (iter % 50 == 0) {
      CHECK(same(cascade::cpwl::eval_mesh(f, {x, y}), want_val));
    }
  }
}

TEST_CASE("eval_mesh: continuity across interior edges") {
  const CpwlMesh m = pyramid().mesh.subdivide_once();
  // Map undirected edges to incident triangles.
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::size_t>>
      inc;
  for (std::size_t ti = 0; ti < m.triangles().size(); ++ti) {
    const Tri& t = m.triangles()[ti];
    for (auto [u, v] : {std::pair{t.a, t.b}, {t.b, t.c}, {t.c, t.a}}) {
      inc[{std::min(u, v), std::max(u, v)}].push_back(ti);
    }
  }
  int interior = 0;
  for (const auto& [e, tris] : inc) {
    if (tris.size() != 2) continue;
    ++interior;
    const OPoint mid{
        (br(m.vertices()[e.first].x) + br(m.vertices()[e.second].x)) / 2,
        (br(m.vertices()[e.first].y) + br(m.vertices()[e.second].y)) / 2};
    const auto v0 = oracle_tri_value(m, tris[0], mid);
    const auto v1 = oracle_tri_value(m, tris[1], mid);
    REQUIRE(v0.has_value());
    REQUIRE(v1.has_value());
    CHECK(*v0 == *v1);
  }
  CHECK(interior > 0);
}

TEST_CASE("mesh validation accepts good meshes and rejects bad ones") {
  CHECK_NOTHROW(pyramid().mesh.validate_conforming());
  CHECK_NOTHROW(pyramid().mesh.subdivide_once().validate_conforming());
  CHECK_NOTHROW(l_shape().mesh.validate_conforming());

  // Degenerate (collinear) triangle is rejected at construction.
  CHECK_THROWS_AS(
      CpwlMesh({{Rational(0), Rational(0)},
                {Rational(1), Rational(1)},
                {Rational(2), Rational(2)}},
               {{0, 1, 2}}, {Rational(0), Rational(0), Rational(0)}),
      DomainError);

  // Vertex index out of range.
  CHECK_THROWS_AS(CpwlMesh({{Rational(0), Rational(0)},
                            {Rational(1), Rational(0)},
                            {Rational(0), Rational(1)}},
                           {{0, 1, 7}},
                           {Rational(0), Rational(0), Rational(0)}),
                  DomainError);

  // Hanging vertex in the interior of an edge.
  const CpwlMesh hanging({{Rational(0), Rational(0)},
                          {Rational(2), Rational(0)},
                          {Rational(0), Rational(2)},
                          {Rational(1), Rational(0)}},
                         {{0, 1, 2}},
                         {Rational(0), Rational(0), Rational(0), Rational(0)});
  CHECK_THROWS_AS(hanging.validate_conforming(), DomainError);

  // Duplicate vertex coordinates.
  const CpwlMesh dup({{Rational(0), Rational(0)},
                      {Rational(1), Rational(0)},
                      {Rational(0), Rational(1)},
                      {Rational(0), Rational(0)}},
                     {{0, 1, 2}, {1, 3, 2}},
                     {Rational(0), Rational(0), Rational(0), Rational(0)});
  CHECK_THROWS_AS(dup.validate_conforming(), DomainError);

  // Overlapping triangles repeat a directed edge.
  const CpwlMesh overlap({{Rational(0), Rational(0)},
                          {Rational(1), Rational(0)},
                          {Rational(0), Rational(1)},
                          {Rational(1), Rational(1)}},
                         {{0, 1, 2}, {0, 1, 3}},
                         {Rational(0), Rational(0), Rational(0), Rational(0)});
  CHECK_THROWS_AS(overlap.validate_conforming(), DomainError);
}

TEST_CASE("boundary cycle and convexity classification") {
  const CpwlFunction2D f = pyramid();
  const auto cycle = f.mesh.boundary_cycle();
  CHECK(cycle.size() == 4);
  CHECK(f.mesh.boundary_is_convex());
  CHECK(f.mesh.fills_bbox());

  const CpwlFunction2D l = l_shape();
  CHECK(l.mesh.boundary_cycle().size() == 6);
  CHECK_FALSE(l.mesh.boundary_is_convex());
  CHECK_FALSE(l.mesh.fills_bbox());
  CHECK_FALSE(cascade::cpwl::is_compactly_supported(l));
}

TEST_CASE("compile_2d: single affine triangle") {
  // f(x, y) = 2x - 3y + 1/2 on one triangle.
  auto lin = [](const Rational& x, const Rational& y) {
    return Rational(2) * x - Rational(3) * y + Rational(1, 2);
  };
  std::vector<Vec2> verts = {{Rational(0), Rational(0)},
                             {Rational(3), Rational(0)},
                             {Rational(0), Rational(3)}};
  std::vector<Rational> vals;
  for (const auto& v : verts) vals.push_back(lin(v.x, v.y));
  const CpwlFunction2D f{CpwlMesh(verts, {{0, 1, 2}}, vals), Rational(0)};
  const auto net = cascade::cpwl::compile_2d(f);
  CHECK(net.depth() == 1);  // a single affine piece needs no ReLU at all
  Gen gen(0x2d5eed03);
  for (int iter = 0; iter < 100; ++iter) {
    // Interior points via random convex combinations.
    const Rational a = gen.rat_in(1, 20, 1), b = gen.rat_in(1, 20, 1),
                   c = gen.rat_in(1, 20, 1);
    const Rational s = a + b + c;
    const Rational x = (b * Rational(3)) / s;
    const Rational y = (c * Rational(3)) / s;
    CHECK(net_at(net, x, y) == lin(x, y));
  }
  for (const auto& v : verts) {
    CHECK(net_at(net, v.x, v.y) == lin(v.x, v.y));
  }
}

TEST_CASE("compile_2d: pyramid with zero collar is exact everywhere") {
  const CpwlFunction2D f = pyramid();
  REQUIRE(cascade::cpwl::is_compactly_supported(f));
  const auto net = cascade::cpwl::compile_2d(f);
  CHECK(net.input_dim() == 2);
  CHECK(net.output_dim() == 1);

  CHECK(net_at(net, Rational(1), Rational(1)) == Rational(1));
  CHECK(net_at(net, Rational(3), Rational(3)) == Rational(0));

  for (const auto& [x, y] : structural_points(f.mesh)) {
    CHECK(same(net_at(net, x, y), oracle_mesh(f, x, y)));
  }

  Gen gen(0x2d5eed04);
  for (int iter = 0; iter < 1000; ++iter) {
    const Rational x = gen.rat_in(-2, 4, 29);
    const Rational y = gen.rat_in(-2, 4, 29);
    CHECK(same(net_at(net, x, y), oracle_mesh(f, x, y)));
  }
  // Far outside the collar the clamp still pins the value to 0.
  CHECK(net_at(net, Rational(-1000), Rational(1, 3)) == Rational(0));
  CHECK(net_at(net, Rational(1000000), Rational(-77)) == Rational(0));
  CHECK(net_at(net, Rational(1), Rational(999, 2)) == Rational(0));
}

TEST_CASE("compile_2d: generic convex-domain function exact on its domain") {
  const CpwlFunction2D f = square_generic();
  REQUIRE_FALSE(cascade::cpwl::is_compactly_supported(f));
  const auto net = cascade::cpwl::compile_2d(f);

  for (const auto& [x, y] : structural_points(f.mesh)) {
    CHECK(same(net_at(net, x, y), oracle_mesh(f, x, y)));
  }
  Gen gen(0x2d5eed05);
  for (int iter = 0; iter < 1000; ++iter) {
    const Rational x = gen.rat_in(0, 1, 37);
    const Rational y = gen.rat_in(0, 1, 37);
    CHECK(same(net_at(net, x, y), oracle_mesh(f, x, y)));
  }
}

TEST_CASE("compile_2d: non-convex domain without zero collar is rejected") {
  CHECK_THROWS_AS(cascade::cpwl::compile_2d(l_shape()), DomainError);
}

TEST_CASE("with_zero_collar: precondition errors") {
  // Margin must be positive.
  CHECK_THROWS_AS(cascade::cpwl::with_zero_collar(pyramid(), Rational(0)),
                  DomainError);
  // Domain must tile its bounding box (a lone triangle does not).
  const CpwlFunction2D tri{CpwlMesh({{Rational(0), Rational(0)},
                                     {Rational(1), Rational(0)},
                                     {Rational(0), Rational(1)}},
                                    {{0, 1, 2}},
                                    {Rational(0), Rational(0), Rational(0)}),
                           Rational(0)};
  CHECK_THROWS_AS(cascade::cpwl::with_zero_collar(tri, Rational(1)),
                  DomainError);
  // Boundary values must vanish.
  CHECK_THROWS_AS(cascade::cpwl::with_zero_collar(square_generic(),
                                                  Rational(1)),
                  DomainError);
  // Nonzero outside_value is incompatible with a zero collar.
  CpwlFunction2D shifted = pyramid();
  shifted.outside_value = Rational(1, 3);
  CHECK_THROWS_AS(cascade::cpwl::with_zero_collar(shifted, Rational(1)),
                  DomainError);
}

TEST_CASE("refine_mesh: strict star-diameter bound, function preserved") {
  const CpwlFunction2D f = pyramid();
  const Rational bound(1, 2);
  const CpwlMesh refined = cascade::cpwl::refine_mesh(f.mesh, bound);
  CHECK_NOTHROW(refined.validate_conforming());
  for (std::uint32_t v = 0; v < refined.vertices().size(); ++v) {
    CHECK(refined.star_linf_diameter(v) < bound);
  }
  const CpwlFunction2D g{refined, Rational(0)};
  const cascade::cpwl::MeshEvaluator ev(g);
  Gen gen(0x2d5eed06);
  for (int iter = 0; iter < 1000; ++iter) {
    const Rational x = gen.rat_in(-1, 3, 23);
    const Rational y = gen.rat_in(-1, 3, 23);
    CHECK(same(ev.eval({x, y}), oracle_mesh(f, x, y)));
  }

  // A loose bound leaves the mesh untouched.
  const CpwlMesh loose = cascade::cpwl::refine_mesh(f.mesh, Rational(10));
  CHECK(loose.vertices().size() == f.mesh.vertices().size());
  CHECK(loose.triangles().size() == f.mesh.triangles().size());

  CHECK_THROWS_AS(cascade::cpwl::refine_mesh(f.mesh, Rational(0)),
                  DomainError);
  CHECK_THROWS_AS(cascade::cpwl::refine_mesh(f.mesh, Rational(-1)),
                  DomainError);
}

TEST_CASE("nodal_hats: partition on a single triangle and whole-mesh sum") {
  // Single triangle: the three hats add up to the affine function.
  std::vector<Vec2> verts = {{Rational(0), Rational(0)},
                             {Rational(2), Rational(0)},
                             {Rational(0), Rational(2)}};
  const CpwlMesh tri(verts, {{0, 1, 2}},
                     {Rational(1), Rational(3), Rational(-2)});
  const auto tri_hats = cascade::cpwl::nodal_hats(tri);
  REQUIRE(tri_hats.size() == 3);
  const CpwlFunction2D tri_f{tri, Rational(0)};
  Gen gen(0x2d5eed07);
  for (int iter = 0; iter < 100; ++iter) {
    const Rational x = gen.rat_in(0, 2, 19);
    const Rational y = gen.rat_in(0, 2, 19);
    cpp_rational sum = 0;
    for (const auto& [coeff, hat] : tri_hats) {
      sum += br(coeff) * oracle_mesh(hat, x, y);
    }
    CHECK(sum == oracle_mesh(tri_f, x, y));
  }

  // Pyramid: apex coefficient 1, corner coefficients 0.
  const CpwlFunction2D f = pyramid();
  const auto hats = cascade::cpwl::nodal_hats(f.mesh);
  REQUIRE(hats.size() == 5);
  CHECK(hats[4].first == Rational(1));
  for (int i = 0; i < 4; ++i) CHECK(hats[i].first == Rational(0));
  for (std::size_t v = 0; v < hats.size(); ++v) {
    const auto& vals = hats[v].second.mesh.values();
    for (std::size_t w = 0; w < vals.size(); ++w) {
      CHECK(vals[w] == (v == w ? Rational(1) : Rational(0)));
    }
  }

  // Refined pyramid: weighted hats reconstruct the function everywhere.
  const CpwlMesh refined = f.mesh.subdivide_once();
  const auto rhats = cascade::cpwl::nodal_hats(refined);
  std::vector<cascade::cpwl::MeshEvaluator> hat_evs;
  hat_evs.reserve(rhats.size());
  for (const auto& [coeff, hat] : rhats) hat_evs.emplace_back(hat);
  for (int iter = 0; iter < 1000; ++iter) {
    const Rational x = gen.rat_in(-1, 3, 17);
    const Rational y = gen.rat_in(-1, 3, 17);
    cpp_rational sum = 0;
    for (std::size_t i = 0; i < rhats.size(); ++i) {
      if (rhats[i].first.is_zero()) continue;
      sum += br(rhats[i].first) * br(hat_evs[i].eval({x, y}));
    }
    CHECK(sum == oracle_mesh(f, x, y));
  }
}

TEST_CASE("compile_2d: interior hat compiles exactly everywhere") {
  const CpwlMesh refined = pyramid().mesh.subdivide_once();
  const auto hats = cascade::cpwl::nodal_hats(refined);
  // Vertex 4 is the original apex (1,1); its hat is interior after one
  // subdivision round.
  const CpwlFunction2D& hat = hats[4].second;
  REQUIRE(cascade::cpwl::is_compactly_supported(hat));
  const auto net = cascade::cpwl::compile_2d(hat);
  CHECK(net_at(net, Rational(1), Rational(1)) == Rational(1));
  Gen gen(0x2d5eed08);
  for (int iter = 0; iter < 300; ++iter) {
    const Rational x = gen.rat_in(-1, 3, 21);
    const Rational y = gen.rat_in(-1, 3, 21);
    CHECK(same(net_at(net, x, y), oracle_mesh(hat, x, y)));
  }
  CHECK(net_at(net, Rational(-50), Rational(50)) == Rational(0));

  // A boundary-vertex hat is not compactly supported; the convex-domain path
  // still realizes it exactly on the mesh domain.
  const CpwlFunction2D& corner = hats[0].second;
  REQUIRE_FALSE(cascade::cpwl::is_compactly_supported(corner));
  const auto cnet = cascade::cpwl::compile_2d(corner);
  for (int iter = 0; iter < 300; ++iter) {
    const Rational x = gen.rat_in(0, 2, 21);
    const Rational y = gen.rat_in(0, 2, 21);
    CHECK(same(net_at(cnet, x, y), oracle_mesh(corner, x, y)));
  }
}

TEST_CASE("mesh json: round-trip, golden bytes, malformed input") {
  const CpwlFunction2D f = pyramid();
  const auto j = cascade::io::mesh_to_json(f);
  const CpwlFunction2D g = cascade::io::mesh_from_json(j);
  CHECK(cascade::io::canonical_dump(cascade::io::mesh_to_json(g)) ==
        cascade::io::canonical_dump(j));
  Gen gen(0x2d5eed09);
  for (int iter = 0; iter < 100; ++iter) {
    const Rational x = gen.rat_in(-1, 3, 13);
    const Rational y = gen.rat_in(-1, 3, 13);
    CHECK(cascade::cpwl::eval_mesh(g, {x, y}) ==
          cascade::cpwl::eval_mesh(f, {x, y}));
  }

  const CpwlFunction2D tiny{CpwlMesh({{Rational(0), Rational(0)},
                                      {Rational(1), Rational(0)},
                                      {Rational(0), Rational(1)}},
                                     {{0, 1, 2}},
                                     {Rational(0), Rational(1, 2),
                                      Rational(-2, 3)}),
                            Rational(0)};
  const std::string golden = R"({
  "vertices": [
    [
      "0/1",
      "0/1"
    ],
    [
      "1/1",
      "0/1"
    ],
    [
      "0/1",
      "1/1"
    ]
  ],
  "triangles": [
    [
      0,
      1,
      2
    ]
  ],
  "values": [
    "0/1",
    "1/2",
    "-2/3"
  ],
  "outside_value": "0/1"
}
)";
  CHECK(cascade::io::canonical_dump(cascade::io::mesh_to_json(tiny)) ==
        golden);

  // outside_value defaults to zero when absent.
  auto jj = cascade::io::mesh_to_json(tiny);
  jj.erase("outside_value");
  CHECK(cascade::io::mesh_from_json(jj).outside_value == Rational(0));

  using cascade::io::json;
  CHECK_THROWS_AS(cascade::io::mesh_from_json(json::parse("{}")), ParseError);
  CHECK_THROWS_AS(cascade::io::mesh_from_json(json::parse(
                      R"({"vertices":[["1/2","0.5"]],"triangles":[[0,0,0]],
                          "values":["0/1"]})")),
                  ParseError);
  auto bad = cascade::io::mesh_to_json(tiny);
  bad["triangles"] = json::parse("[[0,1]]");
  CHECK_THROWS_AS(cascade::io::mesh_from_json(bad), ParseError);
  bad = cascade::io::mesh_to_json(tiny);
  bad["triangles"] = json::parse("[[0,1,9]]");
  CHECK_THROWS_AS(cascade::io::mesh_from_json(bad), ParseError);
}
