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
// Finite decomposition of a compactly supported CPwL seed into translated
// atoms:
//
//     g(z) = sum_nu a_nu * H_nu(z - delta_nu),
//
// where each atom H_nu is a nonnegative CPwL function supported inside the
// inset square [rho, 1-rho]^2. The mesh is red-subdivided until every vertex
// star has l-infinity diameter strictly below 1 - 2*rho; the nodal hats of
// the refined mesh are then translated so that each hat's star bounding box
// is centered in the inset square. Hats are nonnegative by construction;
// the coefficients a_nu (the vertex values of g) may carry either sign.

#ifndef CASCADE_DECOMPOSITION_HPP
#define CASCADE_DECOMPOSITION_HPP

#include <cstddef>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cascade/cpwl.hpp"
#include "cascade/rational.hpp"
#include "cascade/serialize.hpp"

namespace cascade {
namespace decomposition {

// One term of the decomposition: coeff * atom(z - shift).
struct AtomTerm {
  Rational coeff;            // a_nu: the seed's value at the source vertex
  cpwl::Vec2 shift;          // delta_nu: translation back to the seed frame
  cpwl::CpwlFunction2D atom; // H_nu: hat recentered into [rho, 1-rho]^2
  std::size_t star_triangles = 0;  // triangles carrying the hat's support
  // Bounding box of supp(atom) in the atom's own frame (the translated star
  // bbox); evaluation outside this box is identically 0, which lets bulk
  // reconstruction checks skip the atom without touching its mesh.
  cpwl::Vec2 support_lo;
  cpwl::Vec2 support_hi;
};

struct AtomDecomposition {
  std::vector<AtomTerm> terms;
  Rational rho;
  std::uint64_t source_hash = 0;     // fingerprint of the seed it came from
  std::size_t refined_vertices = 0;  // nodal basis size before dropping zeros
  std::size_t refined_triangles = 0;
};

// Exact reconstruction/atom-property report; failures carry witness text.
struct DecompositionReport {
  bool pass = false;
  std::size_t points_checked = 0;
  std::vector<std::string> failures;
};

namespace detail {

inline cpwl::CpwlMesh translate_mesh(const cpwl::CpwlMesh& m,
                                     const cpwl::Vec2& d) {
  std::vector<cpwl::Vec2> verts = m.vertices();
  for (auto& v : verts) {
    v.x += d.x;
    v.y += d.y;
  }
  return cpwl::CpwlMesh(std::move(verts), m.triangles(), m.values());
}

// The nodal hat of vertex v over the same mesh: value 1 at v, 0 elsewhere.
// Keeping the full (bbox-tiling) mesh preserves the compact-support shape
// that the atom consumers rely on; the hat still vanishes off the star of v.
inline cpwl::CpwlFunction2D mesh_hat(const cpwl::CpwlMesh& m,
                                     std::uint32_t v) {
  std::vector<Rational> vals(m.vertices().size(), Rational(0));
  vals[v] = Rational(1);
  return {cpwl::CpwlMesh(m.vertices(), m.triangles(), std::move(vals)),
          Rational(0)};
}

// Support-inset test for one atom: every triangle carrying a nonzero vertex
// value must lie inside [rho, 1-rho]^2 (exact, since such a triangle's
// closure meets the support), and all vertex values must be nonnegative.
inline void check_atom(const cpwl::CpwlFunction2D& atom, const Rational& rho,
                       std::vector<std::string>* failures,
                       const std::string& label) {
  const Rational lo = rho;
  const Rational hi = Rational(1) - rho;
  const auto& verts = atom.mesh.vertices();
  const auto& vals = atom.mesh.values();
  for (const Rational& v : vals) {
    if (v.sign() < 0) {
      failures->push_back(label + ": negative vertex value " + v.str());
      return;
    }
  }
  for (const cpwl::Tri& t : atom.mesh.triangles()) {
    if (vals[t.a].is_zero() && vals[t.b].is_zero() && vals[t.c].is_zero()) {
      continue;
    }
    for (std::uint32_t vi : {t.a, t.b, t.c}) {
      const cpwl::Vec2& p = verts[vi];
      if (p.x < lo || p.x > hi || p.y < lo || p.y > hi) {
        failures->push_back(label + ": support leaves [rho,1-rho]^2 at (" +
                            p.x.str() + ", " + p.y.str() + ")");
        return;
      }
    }
  }
}

}  // namespace detail

// Refine-to-fit nodal decomposition. The refined mesh reproduces g exactly,
// so dropping the zero-coefficient hats leaves an exact finite expansion;
// each surviving hat is translated so its star's bounding box sits centered
// in the inset square, which the refinement bound makes possible with room
// to spare.
inline AtomDecomposition decompose(const cpwl::CpwlFunction2D& g,
                                   const Rational& rho) {
  if (rho.sign() <= 0 || rho >= Rational(1, 2)) {
    throw DomainError("decompose: need 0 < rho < 1/2");
  }
  if (!cpwl::is_compactly_supported(g)) {
    throw DomainError("decompose: seed must be compactly supported");
  }
  const Rational bound = Rational(1) - Rational(2) * rho;
  const cpwl::CpwlMesh refined = cpwl::refine_mesh(g.mesh, bound);

  AtomDecomposition out;
  out.rho = rho;
  out.source_hash = io::json_fingerprint(io::mesh_to_json(g));
  out.refined_vertices = refined.vertices().size();
  out.refined_triangles = refined.triangles().size();

  const Rational half(1, 2);
  const auto& values = refined.values();
  for (std::uint32_t v = 0; v < values.size(); ++v) {
    const Rational& coeff = values[v];
    if (coeff.is_zero()) continue;

    const auto [lo, hi] = refined.star_bbox(v);
    const Rational diam = max(hi.x - lo.x, hi.y - lo.y);
    if (!(diam < bound)) {
      throw DomainError("decompose: refined star still too wide (diameter " +
                        diam.str() + " vs bound " + bound.str() + ")");
    }
    // Center the star's bounding box in the inset square: the atom frame is
    // the seed frame shifted by -delta, so supp H_nu straddles (1/2, 1/2)
    // with l-infinity radius < (1 - 2 rho)/2.
    const cpwl::Vec2 delta{(lo.x + hi.x) * half - half,
                           (lo.y + hi.y) * half - half};

    AtomTerm term;
    term.coeff = coeff;
    term.shift = delta;
    const cpwl::CpwlFunction2D hat = detail::mesh_hat(refined, v);
    term.atom = {detail::translate_mesh(hat.mesh, {-delta.x, -delta.y}),
                 Rational(0)};
    term.support_lo = {lo.x - delta.x, lo.y - delta.y};
    term.support_hi = {hi.x - delta.x, hi.y - delta.y};
    for (const cpwl::Tri& t : refined.triangles()) {
      if (t.a == v || t.b == v || t.c == v) ++term.star_triangles;
    }
    out.terms.push_back(std::move(term));
  }
  return out;
}

// Exact-equality audit of a decomposition against the seed: the atom sum is
// compared with g at every mesh vertex, edge midpoint, and barycenter of the
// seed mesh plus 10^3 deterministic random rationals from the seed's
// bounding box; every atom is re-checked for the support-inset and
// nonnegativity properties.
inline DecompositionReport verify_decomposition(const AtomDecomposition& d,
                                                const cpwl::CpwlFunction2D& g) {
  DecompositionReport rep;
  for (std::size_t i = 0; i < d.terms.size(); ++i) {
    detail::check_atom(d.terms[i].atom, d.rho, &rep.failures,
                       "atom " + std::to_string(i));
  }

  std::vector<cpwl::MeshEvaluator> atom_eval;
  atom_eval.reserve(d.terms.size());
  for (const auto& t : d.terms) atom_eval.emplace_back(t.atom);
  const cpwl::MeshEvaluator seed_eval(g);

  const auto check_point = [&](const cpwl::Vec2& p) {
    Rational sum(0);
    for (std::size_t i = 0; i < d.terms.size(); ++i) {
      const AtomTerm& term = d.terms[i];
      const cpwl::Vec2 q{p.x - term.shift.x, p.y - term.shift.y};
      if (q.x < term.support_lo.x || q.x > term.support_hi.x ||
          q.y < term.support_lo.y || q.y > term.support_hi.y) {
        continue;  // off the atom's support: contributes exactly 0
      }
      sum += term.coeff * atom_eval[i].eval(q);
    }
    const Rational want = seed_eval.eval(p);
    if (sum != want) {
      rep.failures.push_back("reconstruction mismatch at (" + p.x.str() +
                             ", " + p.y.str() + "): sum " + sum.str() +
                             " vs seed " + want.str());
    }
    ++rep.points_checked;
  };

  const auto& verts = g.mesh.vertices();
  for (const auto& p : verts) check_point(p);
  const Rational half(1, 2);
  const Rational third(1, 3);
  for (const cpwl::Tri& t : g.mesh.triangles()) {
    const cpwl::Vec2& a = verts[t.a];
    const cpwl::Vec2& b = verts[t.b];
    const cpwl::Vec2& c = verts[t.c];
    check_point({(a.x + b.x) * half, (a.y + b.y) * half});
    check_point({(b.x + c.x) * half, (b.y + c.y) * half});
    check_point({(c.x + a.x) * half, (c.y + a.y) * half});
    check_point({(a.x + b.x + c.x) * third, (a.y + b.y + c.y) * third});
  }

  const auto [lo, hi] = g.mesh.bbox();
  std::mt19937_64 rng(0x9e3779b97f4a7c15ull);
  const std::int64_t den = 1 << 20;
  const auto coord = [&](const Rational& l, const Rational& h) {
    const Rational t(static_cast<std::int64_t>(rng() % (den + 1)), den);
    return l + (h - l) * t;
  };
  for (int i = 0; i < 1000; ++i) {
    check_point({coord(lo.x, hi.x), coord(lo.y, hi.y)});
  }

  rep.pass = rep.failures.empty();
  return rep;
}

}  // namespace decomposition
}  // namespace cascade

#endif  // CASCADE_DECOMPOSITION_HPP
