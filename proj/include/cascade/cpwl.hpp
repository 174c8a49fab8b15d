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
// Continuous piecewise-linear (CPwL) functions in one and two variables:
// exact representation, evaluation with exact orientation predicates,
// uniform refinement, nodal decomposition, and exact compilation to ReLU
// networks.
//
// 2D compilation uses the max-min lattice representation
//     f = max over cells T of  min over j in S_T of  piece_j,
// with S_T = { j : piece_j >= piece_T on T }, which reproduces f exactly on
// a convex domain. Compactly supported functions (outside_value 0, zero
// boundary) are first surrounded by a zero collar ring and the input is
// clamped onto the enlarged rectangle, which makes the compiled network
// equal to the function on ALL of R^2.

#ifndef CASCADE_CPWL_HPP
#define CASCADE_CPWL_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cascade/network.hpp"
#include "cascade/rational.hpp"

namespace cascade {
namespace cpwl {

struct Vec2 {
  Rational x, y;
  friend bool operator==(const Vec2& a, const Vec2& b) {
    return a.x == b.x && a.y == b.y;
  }
  friend bool operator!=(const Vec2& a, const Vec2& b) { return !(a == b); }
};

struct Vec2Hash {
  std::size_t operator()(const Vec2& v) const {
    return v.x.hash() * 1000003u ^ v.y.hash();
  }
};

// Twice the signed area of triangle (a, b, c); > 0 iff counterclockwise.
inline Rational orient2(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// ---------------------------------------------------------------------------
// One-dimensional CPwL functions

struct PiecewiseLinear1D {
  std::vector<Rational> breakpoints;  // strictly increasing, size >= 2
  std::vector<Rational> values;       // same size
  Rational slope_left;                // extrapolation left of breakpoints[0]
  Rational slope_right;               // extrapolation right of the last one

  void check() const {
    if (breakpoints.size() < 2) {
      throw DomainError("pl1d: need at least 2 breakpoints");
    }
    if (values.size() != breakpoints.size()) {
      throw DomainError("pl1d: values/breakpoints size mismatch");
    }
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
      if (!(breakpoints[i] < breakpoints[i + 1])) {
        throw DomainError("pl1d: breakpoints not strictly increasing");
      }
    }
  }
};

inline Rational eval_pl1d(const PiecewiseLinear1D& f, const Rational& t) {
  f.check();
  const auto& b = f.breakpoints;
  const auto& v = f.values;
  if (t <= b.front()) return v.front() + f.slope_left * (t - b.front());
  if (t >= b.back()) return v.back() + f.slope_right * (t - b.back());
  // Last i with b[i] <= t.
  std::size_t lo = 0, hi = b.size() - 1;
  while (lo + 1 < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (b[mid] <= t) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const Rational slope = (v[lo + 1] - v[lo]) / (b[lo + 1] - b[lo]);
  return v[lo] + slope * (t - b[lo]);
}

// Ramp-sum compilation: f(t) = f(b0) + sL (t - b0) + sum_i ds_i ReLU(t-b_i),
// where ds_i is the slope jump at breakpoint i. Depth 2; exact for every
// rational t, including outside the breakpoint range.
inline ir::ReluNetwork compile_1d(const PiecewiseLinear1D& f) {
  f.check();
  const auto& b = f.breakpoints;
  const auto& v = f.values;
  const std::size_t m = b.size();
  std::vector<Rational> slopes;  // slope on [b_i, b_{i+1}]
  for (std::size_t i = 0; i + 1 < m; ++i) {
    slopes.push_back((v[i + 1] - v[i]) / (b[i + 1] - b[i]));
  }

  ir::LayerSpec hidden;
  ir::RowSpec out;
  out.bias = v.front() - f.slope_left * b.front();
  if (!f.slope_left.is_zero()) {
    // signed carry of t
    hidden.push_back({{{0, Rational(1)}}, Rational(0)});
    hidden.push_back({{{0, Rational(-1)}}, Rational(0)});
    out.terms.push_back({0, f.slope_left});
    out.terms.push_back({1, -f.slope_left});
  }
  for (std::size_t i = 0; i < m; ++i) {
    const Rational prev = i == 0 ? f.slope_left : slopes[i - 1];
    const Rational next = i + 1 == m ? f.slope_right : slopes[i];
    const Rational ds = next - prev;
    if (ds.is_zero()) continue;
    const auto ch = static_cast<std::uint32_t>(hidden.size());
    hidden.push_back({{{0, Rational(1)}}, -b[i]});  // ReLU(t - b_i)
    out.terms.push_back({ch, ds});
  }
  if (hidden.empty()) {
    // Constant or (with slope handled above) affine-degenerate function:
    // keep the depth-2 contract with one unused channel.
    hidden.push_back({{{0, Rational(1)}}, Rational(0)});
  }
  return ir::ReluNetwork::build(1, {hidden, {out}});
}

// ---------------------------------------------------------------------------
// Triangulated meshes

struct Tri {
  std::uint32_t a, b, c;
};

class CpwlMesh {
 public:
  CpwlMesh() = default;
  CpwlMesh(std::vector<Vec2> vertices, std::vector<Tri> triangles,
           std::vector<Rational> values)
      : vertices_(std::move(vertices)),
        triangles_(std::move(triangles)),
        values_(std::move(values)) {
    if (values_.size() != vertices_.size()) {
      throw DomainError("mesh: values/vertices size mismatch");
    }
    if (triangles_.empty()) throw DomainError("mesh: no triangles");
    for (auto& t : triangles_) {
      if (t.a >= vertices_.size() || t.b >= vertices_.size() ||
          t.c >= vertices_.size()) {
        throw DomainError("mesh: triangle index out of range");
      }
      const Rational area2 =
          orient2(vertices_[t.a], vertices_[t.b], vertices_[t.c]);
      if (area2.is_zero()) throw DomainError("mesh: degenerate triangle");
      if (area2.sign() < 0) std::swap(t.b, t.c);  // normalize to CCW
    }
  }

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::vector<Tri>& triangles() const { return triangles_; }
  const std::vector<Rational>& values() const { return values_; }
  std::vector<Rational>& mutable_values() { return values_; }

  std::pair<Vec2, Vec2> bbox() const {
    Vec2 lo = vertices_.front(), hi = vertices_.front();
    for (const auto& v : vertices_) {
      lo.x = min(lo.x, v.x);
      lo.y = min(lo.y, v.y);
      hi.x = max(hi.x, v.x);
      hi.y = max(hi.y, v.y);
    }
    return {lo, hi};
  }

  // Directed boundary edges (edges incident to exactly one triangle), in the
  // triangle's CCW direction.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> boundary_edges() const {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
    for (const auto& t : triangles_) {
      for (auto [u, v] : {std::pair{t.a, t.b}, {t.b, t.c}, {t.c, t.a}}) {
        count[{std::min(u, v), std::max(u, v)}]++;
      }
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    for (const auto& t : triangles_) {
      for (auto [u, v] : {std::pair{t.a, t.b}, {t.b, t.c}, {t.c, t.a}}) {
        if (count[{std::min(u, v), std::max(u, v)}] == 1) {
          out.emplace_back(u, v);
        }
      }
    }
    return out;
  }

  // The boundary as one closed CCW cycle of vertex indices; throws if the
  // boundary is not a single cycle.
  std::vector<std::uint32_t> boundary_cycle() const {
    const auto edges = boundary_edges();
    std::map<std::uint32_t, std::uint32_t> next;
    for (auto& [u, v] : edges) {
      if (!next.emplace(u, v).second) {
        throw DomainError("mesh: boundary is not a simple cycle");
      }
    }
    std::vector<std::uint32_t> cycle;
    std::uint32_t start = edges.front().first, cur = start;
    do {
      cycle.push_back(cur);
      auto it = next.find(cur);
      if (it == next.end()) throw DomainError("mesh: open boundary chain");
      cur = it->second;
      if (cycle.size() > edges.size()) {
        throw DomainError("mesh: boundary cycle does not close");
      }
    } while (cur != start);
    if (cycle.size() != edges.size()) {
      throw DomainError("mesh: boundary has multiple cycles");
    }
    return cycle;
  }

  // True iff the boundary cycle is convex (left turns or collinear only).
  bool boundary_is_convex() const {
    const auto cycle = boundary_cycle();
    const std::size_t k = cycle.size();
    for (std::size_t i = 0; i < k; ++i) {
      const Vec2& a = vertices_[cycle[i]];
      const Vec2& b = vertices_[cycle[(i + 1) % k]];
      const Vec2& c = vertices_[cycle[(i + 2) % k]];
      if (orient2(a, b, c).sign() < 0) return false;
    }
    return true;
  }

  // True iff the triangles exactly tile the bounding box (total area check).
  bool fills_bbox() const {
    Rational total(0);
    for (const auto& t : triangles_) {
      total += orient2(vertices_[t.a], vertices_[t.b], vertices_[t.c]);
    }
    const auto [lo, hi] = bbox();
    return total == Rational(2) * (hi.x - lo.x) * (hi.y - lo.y);
  }

  // Full conforming-triangulation validation: every undirected edge belongs
  // to at most two triangles (opposite orientations), and no vertex lies in
  // the interior of another triangle's edge (no hanging nodes).
  void validate_conforming() const {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
    for (const auto& t : triangles_) {
      for (auto [u, v] : {std::pair{t.a, t.b}, {t.b, t.c}, {t.c, t.a}}) {
        if (u == v) throw DomainError("mesh: repeated vertex in triangle");
        if (++directed[{u, v}] > 1) {
          throw DomainError("mesh: duplicate directed edge (overlap)");
        }
      }
    }
    for (const auto& [e, cnt] : directed) {
      const auto rev = directed.find({e.second, e.first});
      const int total = cnt + (rev == directed.end() ? 0 : rev->second);
      if (total > 2) throw DomainError("mesh: edge shared by >2 triangles");
    }
    // Duplicate vertex coordinates would break conformity silently.
    std::unordered_map<Vec2, std::uint32_t, Vec2Hash> seen;
    for (std::uint32_t i = 0; i < vertices_.size(); ++i) {
      if (!seen.emplace(vertices_[i], i).second) {
        throw DomainError("mesh: duplicate vertex coordinates");
      }
    }
    // Hanging-node scan (exact collinear-and-strictly-between test).
    for (const auto& [e, cnt] : directed) {
      (void)cnt;
      if (e.first > e.second) continue;  // each undirected edge once
      const Vec2& a = vertices_[e.first];
      const Vec2& b = vertices_[e.second];
      for (std::uint32_t w = 0; w < vertices_.size(); ++w) {
        if (w == e.first || w == e.second) continue;
        const Vec2& p = vertices_[w];
        if (!orient2(a, b, p).is_zero()) continue;
        const bool inside_x = (min(a.x, b.x) < p.x && p.x < max(a.x, b.x));
        const bool inside_y = (min(a.y, b.y) < p.y && p.y < max(a.y, b.y));
        if (inside_x || inside_y) {
          throw DomainError("mesh: hanging vertex on an edge");
        }
      }
    }
  }

  // Star of a vertex: bounding box of all triangles incident to it.
  Rational star_linf_diameter(std::uint32_t v) const {
    std::optional<std::pair<Vec2, Vec2>> box;
    for (const auto& t : triangles_) {
      if (t.a != v && t.b != v && t.c != v) continue;
      for (std::uint32_t i : {t.a, t.b, t.c}) {
        const Vec2& p = vertices_[i];
        if (!box) {
          box = {p, p};
        } else {
          box->first.x = min(box->first.x, p.x);
          box->first.y = min(box->first.y, p.y);
          box->second.x = max(box->second.x, p.x);
          box->second.y = max(box->second.y, p.y);
        }
      }
    }
    if (!box) return Rational(0);  // isolated vertex
    return max(box->second.x - box->first.x, box->second.y - box->first.y);
  }

  // Star bounding box of a vertex (used for atom placement).
  std::pair<Vec2, Vec2> star_bbox(std::uint32_t v) const {
    std::pair<Vec2, Vec2> box = {vertices_[v], vertices_[v]};
    for (const auto& t : triangles_) {
      if (t.a != v && t.b != v && t.c != v) continue;
      for (std::uint32_t i : {t.a, t.b, t.c}) {
        const Vec2& p = vertices_[i];
        box.first.x = min(box.first.x, p.x);
        box.first.y = min(box.first.y, p.y);
        box.second.x = max(box.second.x, p.x);
        box.second.y = max(box.second.y, p.y);
      }
    }
    return box;
  }

  // One round of uniform red (edge-midpoint) subdivision: each triangle is
  // split into four; midpoint values are interpolated, so the induced
  // function is unchanged and all edge lengths halve.
  CpwlMesh subdivide_once() const {
    std::vector<Vec2> verts = vertices_;
    std::vector<Rational> vals = values_;
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    auto mid = [&](std::uint32_t u, std::uint32_t v) -> std::uint32_t {
      const auto key = std::pair{std::min(u, v), std::max(u, v)};
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const Rational half(1, 2);
      verts.push_back({(vertices_[u].x + vertices_[v].x) * half,
                       (vertices_[u].y + vertices_[v].y) * half});
      vals.push_back((values_[u] + values_[v]) * half);
      const auto idx = static_cast<std::uint32_t>(verts.size() - 1);
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Tri> tris;
    tris.reserve(triangles_.size() * 4);
    for (const auto& t : triangles_) {
      const std::uint32_t ab = mid(t.a, t.b);
      const std::uint32_t bc = mid(t.b, t.c);
      const std::uint32_t ca = mid(t.c, t.a);
      tris.push_back({t.a, ab, ca});
      tris.push_back({ab, t.b, bc});
      tris.push_back({ca, bc, t.c});
      tris.push_back({ab, bc, ca});
    }
    return CpwlMesh(std::move(verts), std::move(tris), std::move(vals));
  }

 private:
  std::vector<Vec2> vertices_;
  std::vector<Tri> triangles_;
  std::vector<Rational> values_;
};

// A CPwL function of the whole plane: the mesh function on the mesh domain,
// `outside_value` elsewhere (only meaningful when the function is compactly
// supported and outside_value is 0, or when evaluation stays inside).
struct CpwlFunction2D {
  CpwlMesh mesh;
  Rational outside_value;
};

// ---------------------------------------------------------------------------
// Exact evaluation with point location

// Reusable evaluator with a uniform-grid spatial index over triangle boxes.
// Holds a reference: the function must outlive the evaluator (temporaries
// are rejected).
class MeshEvaluator {
 public:
  explicit MeshEvaluator(CpwlFunction2D&&) = delete;
  explicit MeshEvaluator(const CpwlFunction2D& f) : f_(&f) {
    const auto& mesh = f.mesh;
    std::tie(lo_, hi_) = mesh.bbox();
    const std::size_t t = mesh.triangles().size();
    res_ = 1;
    while (res_ * res_ < t && res_ < 64) ++res_;
    cells_.assign(res_ * res_, {});
    for (std::uint32_t ti = 0; ti < t; ++ti) {
      const Tri& tr = mesh.triangles()[ti];
      Vec2 tlo = mesh.vertices()[tr.a], thi = tlo;
      for (std::uint32_t vi : {tr.b, tr.c}) {
        const Vec2& p = mesh.vertices()[vi];
        tlo.x = min(tlo.x, p.x);
        tlo.y = min(tlo.y, p.y);
        thi.x = max(thi.x, p.x);
        thi.y = max(thi.y, p.y);
      }
      const auto [ix0, iy0] = cell_of(tlo);
      const auto [ix1, iy1] = cell_of(thi);
      for (std::size_t ix = ix0; ix <= ix1; ++ix) {
        for (std::size_t iy = iy0; iy <= iy1; ++iy) {
          cells_[ix * res_ + iy].push_back(ti);
        }
      }
    }
  }

  Rational eval(const Vec2& p) const {
    if (p.x < lo_.x || p.x > hi_.x || p.y < lo_.y || p.y > hi_.y) {
      return f_->outside_value;
    }
    const auto [ix, iy] = cell_of(p);
    const auto& mesh = f_->mesh;
    for (std::uint32_t ti : cells_[ix * res_ + iy]) {
      const Tri& t = mesh.triangles()[ti];
      const Vec2& a = mesh.vertices()[t.a];
      const Vec2& b = mesh.vertices()[t.b];
      const Vec2& c = mesh.vertices()[t.c];
      const Rational wa = orient2(b, c, p);
      if (wa.sign() < 0) continue;
      const Rational wb = orient2(c, a, p);
      if (wb.sign() < 0) continue;
      const Rational wc = orient2(a, b, p);
      if (wc.sign() < 0) continue;
      const Rational area2 = wa + wb + wc;  // == orient2(a,b,c) > 0
      return (wa * mesh.values()[t.a] + wb * mesh.values()[t.b] +
              wc * mesh.values()[t.c]) /
             area2;
    }
    return f_->outside_value;  // inside bbox but outside the mesh domain
  }

 private:
  std::pair<std::size_t, std::size_t> cell_of(const Vec2& p) const {
    auto clampi = [&](const Rational& v, const Rational& l,
                      const Rational& h) -> std::size_t {
      if (h == l) return 0;
      const Rational t = (v - l) * Rational(static_cast<std::int64_t>(res_)) /
                         (h - l);
      std::int64_t i = t.floor();
      if (i < 0) i = 0;
      if (i >= static_cast<std::int64_t>(res_)) {
        i = static_cast<std::int64_t>(res_) - 1;
      }
      return static_cast<std::size_t>(i);
    };
    return {clampi(p.x, lo_.x, hi_.x), clampi(p.y, lo_.y, hi_.y)};
  }

  const CpwlFunction2D* f_;
  Vec2 lo_, hi_;
  std::size_t res_ = 1;
  std::vector<std::vector<std::uint32_t>> cells_;
};

// One-off exact evaluation (linear scan inside the located grid cell).
inline Rational eval_mesh(const CpwlFunction2D& f, const Vec2& p) {
  return MeshEvaluator(f).eval(p);
}

// ---------------------------------------------------------------------------
// Zero collar and compilation

// Surrounds a compactly supported function (outside_value 0, zero boundary
// values, rectangle-filling domain) with an 8-triangle zero ring out to the
// bbox enlarged by `margin`. The ring's inner edges deliberately leave the
// original boundary vertices hanging; the induced function is still
// continuous because both sides vanish along those edges.
inline CpwlFunction2D with_zero_collar(const CpwlFunction2D& f,
                                       const Rational& margin) {
  if (margin.sign() <= 0) throw DomainError("collar: margin must be > 0");
  if (!f.outside_value.is_zero()) {
    throw DomainError("collar: outside_value must be 0");
  }
  if (!f.mesh.fills_bbox()) {
    throw DomainError(
        "collar: mesh domain must tile its bounding box exactly");
  }
  // Compact support: the function must vanish on the domain boundary. Since
  // boundary edges are affine between their endpoints, vertex checks
  // suffice.
  for (auto [u, v] : f.mesh.boundary_edges()) {
    (void)v;
    if (!f.mesh.values()[u].is_zero()) {
      throw DomainError("collar: boundary value is not 0");
    }
  }
  const auto [lo, hi] = f.mesh.bbox();
  std::vector<Vec2> verts = f.mesh.vertices();
  std::vector<Rational> vals = f.mesh.values();
  std::vector<Tri> tris = f.mesh.triangles();
  const Vec2 LO{lo.x - margin, lo.y - margin};
  const Vec2 HI{hi.x + margin, hi.y + margin};
  const std::uint32_t i0 = static_cast<std::uint32_t>(verts.size());
  // Inner corners i0..i3 are fresh zero-valued copies of the bbox corners
  // (the ring stays self-contained even if the mesh lacks corner vertices);
  // outer corners are o0..o3.
  const Vec2 inner[4] = {{lo.x, lo.y}, {hi.x, lo.y}, {hi.x, hi.y},
                         {lo.x, hi.y}};
  const Vec2 outer[4] = {{LO.x, LO.y}, {HI.x, LO.y}, {HI.x, HI.y},
                         {LO.x, HI.y}};
  for (const auto& p : inner) {
    verts.push_back(p);
    vals.push_back(Rational(0));
  }
  for (const auto& p : outer) {
    verts.push_back(p);
    vals.push_back(Rational(0));
  }
  const std::uint32_t o0 = i0 + 4;
  for (std::uint32_t k = 0; k < 4; ++k) {
    const std::uint32_t k1 = (k + 1) % 4;
    tris.push_back({o0 + k, o0 + k1, i0 + k1});
    tris.push_back({o0 + k, i0 + k1, i0 + k});
  }
  return {CpwlMesh(std::move(verts), std::move(tris), std::move(vals)),
          Rational(0)};
}

// True iff the function is a compactly supported plane function in the sense
// required for the zero-collar path: outside_value 0, mesh domain tiles its
// bounding box, and the function vanishes on the domain boundary (boundary
// edges are affine between endpoints, so vertex checks suffice).
inline bool is_compactly_supported(const CpwlFunction2D& f) {
  if (!f.outside_value.is_zero() || !f.mesh.fills_bbox()) return false;
  for (auto [u, v] : f.mesh.boundary_edges()) {
    (void)v;
    if (!f.mesh.values()[u].is_zero()) return false;
  }
  return true;
}

namespace detail {

// Affine piece a x + b y + c of a triangle, solved exactly from vertices.
struct Piece {
  Rational a, b, c;
  friend bool operator==(const Piece& p, const Piece& q) {
    return p.a == q.a && p.b == q.b && p.c == q.c;
  }
};

struct PieceHash {
  std::size_t operator()(const Piece& p) const {
    return p.a.hash() * 1000003u ^ p.b.hash() * 8191u ^ p.c.hash();
  }
};

inline Piece piece_of(const CpwlMesh& m, const Tri& t) {
  const Vec2& p0 = m.vertices()[t.a];
  const Vec2& p1 = m.vertices()[t.b];
  const Vec2& p2 = m.vertices()[t.c];
  const Rational v0 = m.values()[t.a], v1 = m.values()[t.b],
                 v2 = m.values()[t.c];
  const Rational det = orient2(p0, p1, p2);
  // Solve [x y 1] . (a b c) = v at the three vertices (Cramer).
  const Rational a = ((v1 - v0) * (p2.y - p0.y) - (v2 - v0) * (p1.y - p0.y)) /
                     det;
  const Rational b = ((v2 - v0) * (p1.x - p0.x) - (v1 - v0) * (p2.x - p0.x)) /
                     det;
  const Rational c = v0 - a * p0.x - b * p0.y;
  return {a, b, c};
}

inline Rational piece_at(const Piece& p, const Vec2& v) {
  return p.a * v.x + p.b * v.y + p.c;
}

// Input clamp onto [lo, hi]^2 (componentwise, exact):
//   t |-> lo + ReLU(t - lo) - ReLU(t - hi).
inline ir::ReluNetwork box_clamp(const Vec2& lo, const Vec2& hi) {
  ir::LayerSpec hidden = {
      {{{0, Rational(1)}}, -lo.x},
      {{{0, Rational(1)}}, -hi.x},
      {{{1, Rational(1)}}, -lo.y},
      {{{1, Rational(1)}}, -hi.y},
  };
  ir::LayerSpec out = {
      {{{0, Rational(1)}, {1, Rational(-1)}}, lo.x},
      {{{2, Rational(1)}, {3, Rational(-1)}}, lo.y},
  };
  return ir::ReluNetwork::build(2, {hidden, out});
}

}  // namespace detail

// Exact ReLU compilation via the max-min lattice. Preconditions: the mesh
// domain is convex, OR the function is compactly supported (outside_value 0
// and zero boundary) on a bbox-tiling mesh, in which case a zero collar plus
// an input clamp make the result exact on the entire plane.
inline ir::ReluNetwork compile_2d(const CpwlFunction2D& f) {
  const bool compact = is_compactly_supported(f);
  CpwlFunction2D work = f;
  std::optional<std::pair<Vec2, Vec2>> clamp_box;
  if (compact) {
    work = with_zero_collar(f, Rational(1));
    clamp_box = work.mesh.bbox();
  } else {
    if (!f.mesh.boundary_is_convex()) {
      throw DomainError(
          "compile_2d: non-convex domain without a zero collar");
    }
  }

  const CpwlMesh& mesh = work.mesh;
  // Distinct affine pieces.
  std::vector<detail::Piece> pieces;
  std::unordered_map<detail::Piece, std::uint32_t, detail::PieceHash> pidx;
  std::vector<std::uint32_t> tri_piece(mesh.triangles().size());
  for (std::size_t ti = 0; ti < mesh.triangles().size(); ++ti) {
    const detail::Piece p = detail::piece_of(mesh, mesh.triangles()[ti]);
    auto it = pidx.find(p);
    if (it == pidx.end()) {
      it = pidx.emplace(p, static_cast<std::uint32_t>(pieces.size())).first;
      pieces.push_back(p);
    }
    tri_piece[ti] = it->second;
  }

  // Cell sets S_T = { j : piece_j >= f on T }, tested at the 3 vertices.
  std::set<std::vector<std::uint32_t>> distinct;
  for (std::size_t ti = 0; ti < mesh.triangles().size(); ++ti) {
    const Tri& t = mesh.triangles()[ti];
    std::vector<std::uint32_t> s;
    for (std::uint32_t j = 0; j < pieces.size(); ++j) {
      bool ge = true;
      for (std::uint32_t vi : {t.a, t.b, t.c}) {
        if (detail::piece_at(pieces[j], mesh.vertices()[vi]) <
            mesh.values()[vi]) {
          ge = false;
          break;
        }
      }
      if (ge) s.push_back(j);
    }
    distinct.insert(std::move(s));  // always contains tri_piece[ti]
  }
  // Drop sets that contain another set (their min is dominated).
  std::vector<std::vector<std::uint32_t>> sets(distinct.begin(),
                                               distinct.end());
  std::vector<bool> dropped(sets.size(), false);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = 0; j < sets.size() && !dropped[i]; ++j) {
      if (i == j || dropped[j]) continue;
      if (sets[j].size() < sets[i].size() &&
          std::includes(sets[i].begin(), sets[i].end(), sets[j].begin(),
                        sets[j].end())) {
        dropped[i] = true;
      }
    }
  }

  // Expressions of the pieces over the raw inputs (x, y).
  auto piece_expr = [&](std::uint32_t j) {
    ir::RowSpec e;
    if (!pieces[j].a.is_zero()) e.terms.push_back({0, pieces[j].a});
    if (!pieces[j].b.is_zero()) e.terms.push_back({1, pieces[j].b});
    e.bias = pieces[j].c;
    return e;
  };
  std::vector<std::vector<ir::RowSpec>> groups;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (dropped[i]) continue;
    std::vector<ir::RowSpec> g;
    for (auto j : sets[i]) g.push_back(piece_expr(j));
    groups.push_back(std::move(g));
  }

  ir::TreeReducer reducer(2);
  const ir::RowSpec out = reducer.reduce(std::move(groups), /*inner_min=*/true,
                                         /*outer_max=*/true);
  ir::ReluNetwork lattice = reducer.finish(out);
  if (clamp_box) {
    return ir::compose(detail::box_clamp(clamp_box->first, clamp_box->second),
                       lattice);
  }
  return lattice;
}

// ---------------------------------------------------------------------------
// Refinement and nodal decomposition

// Uniform red subdivision until every vertex star has l-infinity diameter
// strictly below the bound. The induced function is unchanged.
inline CpwlMesh refine_mesh(const CpwlMesh& m, const Rational& bound) {
  if (bound.sign() <= 0) throw DomainError("refine_mesh: bound must be > 0");
  CpwlMesh cur = m;
  for (;;) {
    bool ok = true;
    for (std::uint32_t v = 0; v < cur.vertices().size() && ok; ++v) {
      if (!(cur.star_linf_diameter(v) < bound)) ok = false;
    }
    if (ok) return cur;
    cur = cur.subdivide_once();
  }
}

// Nodal basis expansion: one hat per vertex (1 there, 0 elsewhere, defined
// over the SAME mesh), with coefficient = the vertex value. The weighted sum
// of hats reproduces the mesh function exactly.
inline std::vector<std::pair<Rational, CpwlFunction2D>> nodal_hats(
    const CpwlMesh& m) {
  std::vector<std::pair<Rational, CpwlFunction2D>> out;
  out.reserve(m.vertices().size());
  for (std::uint32_t v = 0; v < m.vertices().size(); ++v) {
    std::vector<Rational> vals(m.vertices().size(), Rational(0));
    vals[v] = Rational(1);
    CpwlFunction2D hat{CpwlMesh(m.vertices(), m.triangles(), std::move(vals)),
                       Rational(0)};
    out.emplace_back(m.values()[v], std::move(hat));
  }
  return out;
}

}  // namespace cpwl
}  // namespace cascade

#endif  // CASCADE_CPWL_HPP
