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
// Assembly of the depth-O(n) realization of the n-fold refinement of a
// compactly supported CPwL seed:
//
//   * build_unit_square(H, tm, params, n) - the recursive gated cascade on
//     the reference square. A first controller pass produces the scalar
//     factor H(R_n(x,y)); the backward states Phi_0^(l) = H(R_n) e_l (one
//     copy per window patch l) are then advanced through n gating stages.
//     Stage j re-derives the controller state z_{j-1}, reads the four loop
//     selectors, forms the four branch states T_q^T Phi_{j-1} in one affine
//     layer, and gates each branch by the nested product gadget - inner
//     gate chi_{q1} (first coordinate), outer gate chi_{q2} - before
//     summing. The final affine layer extracts the b11 component per copy,
//     so output l equals e_l^T Vec(V^n H)(x,y) exactly on [0,1]^2.
//
//   * build_glue(vectorized, w) - exact clamped gluing of the unit-square
//     patches over the window [0,L1]x[0,L2] with the standard ramps
//     sigma_k(t) = ReLU(t-k+1) - ReLU(t-k), applied once per axis and
//     subtracting the doubly counted edge traces; the result equals the
//     physical function on the whole plane and vanishes outside the window.
//
//   * build_seed_net(g, m, w, params, n) - the full pipeline: decompose g
//     into translated atoms, realize each atom, shift the inputs by
//     2^{-n} delta_nu (translation covariance of the refinement operator),
//     and sum with the atom coefficients.

#ifndef CASCADE_ASSEMBLER_HPP
#define CASCADE_ASSEMBLER_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cascade/controller.hpp"
#include "cascade/cpwl.hpp"
#include "cascade/decomposition.hpp"
#include "cascade/gadgets.hpp"
#include "cascade/network.hpp"
#include "cascade/rational.hpp"
#include "cascade/refinement.hpp"
#include "cascade/serialize.hpp"

namespace cascade {
namespace assembler {

// The full parameter bundle of one compilation: controller geometry (rho,
// eps_bar) plus the selector transition-width factor delta_bar.
struct CascadeParams {
  Rational rho = Rational(1, 4);
  Rational eps_bar = Rational(1, 8);
  Rational delta_bar = Rational(1, 2);

  controller::ControllerParams controller_params() const {
    return {rho, eps_bar};
  }
  gadgets::SelectorParams selector_params(unsigned n) const {
    return {delta_bar, rho, n};
  }
  void check() const {
    controller_params().check();
    selector_params(0).check();
  }
};

// Exact magnitude bookkeeping for the gating stages: the backward states
// satisfy ||Phi_j||_inf <= B^j M_H for j <= n, so the gate scale a_n keeps
// every product-gadget input in its admissible box [-a_n, a_n]^N.
struct CascadeBounds {
  Rational B;    // max_q ||T_q^T||_{inf->inf}
  Rational M_H;  // sup |H| = max vertex magnitude (CPwL, so attained there)
  Rational a_n;  // gate scale: a_n >= 1 and a_n >= B^j M_H for all j <= n
};

inline CascadeBounds cascade_bounds(const refinement::TransitionMatrices& tm,
                                    const cpwl::CpwlFunction2D& H,
                                    unsigned n) {
  CascadeBounds b;
  b.B = refinement::transition_norm_bound(tm);
  b.M_H = Rational(0);
  for (const Rational& v : H.mesh.values()) b.M_H = max(b.M_H, v.abs());
  // max{1, B}^n dominates B^j for every j <= n even when B < 1, where B^n
  // alone would undershoot the early stages.
  const Rational growth = max(Rational(1), b.B);
  Rational power(1);
  for (unsigned j = 0; j < n; ++j) power *= growth;
  b.a_n = max(Rational(1), b.M_H * power);
  return b;
}

// Channel layout at the boundaries between gating stages: the controller
// pair z = (E(r^j x), E(r^j y)) rides channels 0..3, followed by the
// backward states, one block of `patches` components per coordinate copy.
struct UnitSquareLayout {
  std::uint32_t patches = 0;  // L1*L2: number of copies and of components
  std::uint32_t state_offset = 4;

  std::uint32_t state_channel(std::uint32_t copy,
                              std::uint32_t component) const {
    return state_offset + copy * patches + component;
  }
  std::uint32_t boundary_width() const {
    return state_offset + patches * patches;
  }
};

// The three unfused pieces of the unit-square network. Composing
// init . stage^n . readout yields the flat realization; keeping the blocks
// separate lets a harness observe the exact stage values z_j and Phi_j,
// which the seam-fusing composition would otherwise absorb.
struct UnitSquareBlocks {
  ir::ReluNetwork init;     // 2 -> boundary: [z_0, Phi_0 for all copies]
  ir::ReluNetwork stage;    // boundary -> boundary: one gating step
  ir::ReluNetwork readout;  // boundary -> patches: b11 component per copy
  UnitSquareLayout layout;
  CascadeBounds bounds;
  unsigned n = 0;
};

namespace detail {

// All four branch states in one affine layer: for each digit pair q and
// copy l, the block S_q^(l) = T_q^T Phi^(l) read from the shared state.
inline ir::ReluNetwork branch_state_net(
    const refinement::TransitionMatrices& tm, const UnitSquareLayout& lay) {
  const std::uint32_t d = lay.patches;
  ir::LayerSpec spec;
  spec.reserve(static_cast<std::size_t>(4) * d * d);
  for (int q1 = 0; q1 <= 1; ++q1) {
    for (int q2 = 0; q2 <= 1; ++q2) {
      const refinement::Matrix& t = tm.at(q1, q2);
      for (std::uint32_t copy = 0; copy < d; ++copy) {
        for (std::uint32_t i = 0; i < d; ++i) {
          ir::RowSpec row;
          for (std::uint32_t k = 0; k < d; ++k) {
            const Rational& w = t.at(k, i);  // (T^T)[i,k] = T[k,i]
            if (!w.is_zero()) row.terms.push_back({lay.state_channel(copy, k), w});
          }
          spec.push_back(std::move(row));
        }
      }
    }
  }
  return ir::ReluNetwork::build(lay.boundary_width(), {spec});
}

// Nested gate for one digit pair: (lambda1, lambda2, y) maps to
// Pi_a(lambda2, Pi_a(lambda1, y)). The outer selector value crosses the
// inner gadget on a nonnegative pass-through channel.
inline ir::ReluNetwork nested_gate(const Rational& a, std::uint32_t n_state) {
  const ir::ReluNetwork gate = gadgets::product_gadget(a, n_state);
  const std::uint32_t in_dim = 2 + n_state;
  ir::LayerSpec pre(1 + n_state);
  pre[0] = {{{0, Rational(1)}}, Rational(0)};
  for (std::uint32_t i = 0; i < n_state; ++i) {
    pre[1 + i] = {{{2 + i, Rational(1)}}, Rational(0)};
  }
  const ir::ReluNetwork inner =
      ir::affine_wrap(gate, pre, in_dim, ir::identity_rows(n_state));
  const ir::ReluNetwork carrier =
      ir::affine_wrap(ir::pass_through(1, /*nonneg=*/true, gate.depth()),
                      ir::selection_rows({1}), in_dim, ir::identity_rows(1));
  return ir::compose(ir::juxtapose({&carrier, &inner}), gate);
}

// One gating stage (boundary -> boundary). The preparation half advances
// the controller, evaluates the four selector scalars, and emits the four
// branch states from a single affine layer; the gating half applies the
// nested gates per digit pair and sums the branches.
inline ir::ReluNetwork build_stage(const refinement::TransitionMatrices& tm,
                                   const CascadeParams& params,
                                   const CascadeBounds& bounds, unsigned n,
                                   const UnitSquareLayout& lay) {
  const std::uint32_t d2 = lay.patches * lay.patches;
  const std::uint32_t bw = lay.boundary_width();
  const gadgets::SelectorParams sp = params.selector_params(n);
  const ir::LayerSpec id4 = ir::identity_rows(4);

  // Preparation output: [F(z1), F(z2) | chi_0(z1), chi_1(z1), chi_0(z2),
  // chi_1(z2) | S_00, S_01, S_10, S_11].
  const ir::ReluNetwork advance = ir::affine_wrap(
      controller::build_step_net(), ir::selection_rows({0, 1, 2, 3}), bw, id4);
  std::vector<ir::ReluNetwork> selectors;
  selectors.reserve(4);
  for (std::uint32_t coord = 0; coord < 2; ++coord) {
    for (int q = 0; q <= 1; ++q) {
      selectors.push_back(ir::affine_wrap(
          gadgets::build_selector(q, sp),
          ir::selection_rows({2 * coord, 2 * coord + 1}), bw,
          ir::identity_rows(1)));
    }
  }
  const ir::ReluNetwork branches = branch_state_net(tm, lay);
  const ir::ReluNetwork prep =
      ir::juxtapose({&advance, &selectors[0], &selectors[1], &selectors[2],
                     &selectors[3], &branches});

  // Gating over the preparation output: carry z forward, gate each branch
  // state by its digit pair, and sum the four contributions per channel.
  const std::uint32_t pw = 8 + 4 * d2;
  const ir::ReluNetwork gate = nested_gate(bounds.a_n, d2);
  const ir::ReluNetwork z_carry =
      ir::affine_wrap(ir::pass_through(4, /*nonneg=*/true, gate.depth()),
                      ir::selection_rows({0, 1, 2, 3}), pw, id4);
  std::vector<ir::ReluNetwork> gated;
  gated.reserve(4);
  for (int q1 = 0; q1 <= 1; ++q1) {
    for (int q2 = 0; q2 <= 1; ++q2) {
      const std::uint32_t qi =
          static_cast<std::uint32_t>(refinement::TransitionMatrices::qindex(q1, q2));
      ir::LayerSpec pre(2 + d2);
      pre[0] = {{{4 + static_cast<std::uint32_t>(q1), Rational(1)}},
                Rational(0)};
      pre[1] = {{{6 + static_cast<std::uint32_t>(q2), Rational(1)}},
                Rational(0)};
      for (std::uint32_t i = 0; i < d2; ++i) {
        pre[2 + i] = {{{8 + qi * d2 + i, Rational(1)}}, Rational(0)};
      }
      gated.push_back(ir::affine_wrap(gate, pre, pw, ir::identity_rows(d2)));
    }
  }
  const ir::ReluNetwork gating_juxt = ir::juxtapose(
      {&z_carry, &gated[0], &gated[1], &gated[2], &gated[3]});

  ir::LayerSpec post(bw);
  for (std::uint32_t c = 0; c < 4; ++c) {
    post[c] = {{{c, Rational(1)}}, Rational(0)};
  }
  for (std::uint32_t i = 0; i < d2; ++i) {
    ir::RowSpec& row = post[4 + i];
    for (std::uint32_t q = 0; q < 4; ++q) {
      row.terms.push_back({4 + q * d2 + i, Rational(1)});
    }
  }
  const ir::ReluNetwork gating =
      ir::affine_wrap(gating_juxt, ir::identity_rows(pw), pw, post);
  return ir::compose(prep, gating);
}

// Initial block: the scalar factor h = H(R_n(x,y)) from the four-branch
// readout, broadcast onto the diagonal state Phi_0^(l) = h e_l, alongside
// the fresh controller state z_0 = (E(x), E(y)).
inline ir::ReluNetwork build_init(const cpwl::CpwlFunction2D& H,
                                  const CascadeParams& params, unsigned n,
                                  const UnitSquareLayout& lay) {
  const ir::ReluNetwork h =
      controller::build_H_readout(H, params.controller_params(), n);
  const ir::ReluNetwork carry = ir::pass_through(2, /*nonneg=*/true, 2);
  const ir::ReluNetwork head = ir::juxtapose({&carry, &h});  // [x, y, h]

  const ir::ReluNetwork embed_z =
      ir::affine_wrap(controller::build_E_net(), ir::selection_rows({0, 1}), 3,
                      ir::identity_rows(4));
  const std::uint32_t d = lay.patches;
  ir::LayerSpec diag(static_cast<std::size_t>(d) * d);
  for (std::uint32_t copy = 0; copy < d; ++copy) {
    diag[lay.state_channel(copy, copy) - lay.state_offset] = {
        {{2, Rational(1)}}, Rational(0)};
  }
  const ir::ReluNetwork embed_state = ir::ReluNetwork::build(3, {diag});
  return ir::compose(head, ir::juxtapose({&embed_z, &embed_state}));
}

// Final affine block: per copy l, the b11 component of Phi_n^(l).
inline ir::ReluNetwork build_state_readout(const UnitSquareLayout& lay,
                                           std::uint32_t b11) {
  ir::LayerSpec rows(lay.patches);
  for (std::uint32_t copy = 0; copy < lay.patches; ++copy) {
    rows[copy] = {{{lay.state_channel(copy, b11), Rational(1)}}, Rational(0)};
  }
  return ir::ReluNetwork::build(lay.boundary_width(), {rows});
}

}  // namespace detail

// The unfused building blocks of the unit-square realization; see
// UnitSquareBlocks. Preconditions: H a special atom for params.rho, n >= 1.
inline UnitSquareBlocks build_unit_square_blocks(
    const cpwl::CpwlFunction2D& H, const refinement::TransitionMatrices& tm,
    const CascadeParams& params, unsigned n) {
  params.check();
  if (n < 1) throw DomainError("build_unit_square: n must be >= 1");
  controller::check_special_atom(H, params.controller_params());

  UnitSquareBlocks blocks;
  blocks.layout.patches =
      static_cast<std::uint32_t>(refinement::PatchIndexing(tm.window).size());
  blocks.bounds = cascade_bounds(tm, H, n);
  blocks.n = n;
  blocks.init = detail::build_init(H, params, n, blocks.layout);
  blocks.stage = detail::build_stage(tm, params, blocks.bounds, n,
                                     blocks.layout);
  blocks.readout = detail::build_state_readout(
      blocks.layout, refinement::PatchIndexing(tm.window).b11());
  return blocks;
}

// The flat unit-square realization (2 -> L1*L2): output component l equals
// e_l^T Vec(V^n H)(x,y) for every rational (x,y) in [0,1]^2. Depth is
// affine in n and width is independent of n.
inline ir::ReluNetwork build_unit_square(
    const cpwl::CpwlFunction2D& H, const refinement::TransitionMatrices& tm,
    const CascadeParams& params, unsigned n) {
  const UnitSquareBlocks blocks = build_unit_square_blocks(H, tm, params, n);
  ir::ReluNetwork net = blocks.init;
  for (unsigned j = 0; j < n; ++j) net = ir::compose(net, blocks.stage);
  net = ir::compose(net, blocks.readout);
  net.meta()["cascade_n"] = std::to_string(n);
  net.meta()["cascade_patches"] = std::to_string(blocks.layout.patches);
  net.meta()["cascade_gate_scale"] = blocks.bounds.a_n.str();
  return net;
}

namespace detail {

// Shared-edge and outer-boundary audit of the vectorized patches, exact at
// 64 samples per edge. Gluing silently mis-assembles incompatible patches,
// so violations are rejected with the offending edge and sample point.
inline void check_patch_compatibility(const ir::ReluNetwork& vectorized,
                                      const refinement::Window& w) {
  const refinement::PatchIndexing pi(w);
  const auto edge_error = [](const std::string& what, const std::string& at,
                             const Rational& lhs, const Rational& rhs) {
    throw DomainError("glue: " + what + " at " + at + ": " + lhs.str() +
                      " vs " + rhs.str());
  };
  for (int k = 0; k < 64; ++k) {
    const Rational t(k, 63);
    const std::vector<Rational> at0 = ir::eval_exact(vectorized, {Rational(0), t});
    const std::vector<Rational> at1 = ir::eval_exact(vectorized, {Rational(1), t});
    for (std::int64_t b = 1; b <= w.L2; ++b) {
      for (std::int64_t a = 1; a + 1 <= w.L1; ++a) {
        const Rational& lhs = at1[pi.index(a, b)];
        const Rational& rhs = at0[pi.index(a + 1, b)];
        if (lhs != rhs) {
          edge_error("patches (" + std::to_string(a) + "," +
                         std::to_string(b) + ") and (" + std::to_string(a + 1) +
                         "," + std::to_string(b) + ") disagree on their shared edge",
                     "v = " + t.str(), lhs, rhs);
        }
      }
      if (!at0[pi.index(1, b)].is_zero()) {
        edge_error("patch (1," + std::to_string(b) +
                       ") does not vanish on the outer edge x = 0",
                   "v = " + t.str(), at0[pi.index(1, b)], Rational(0));
      }
      if (!at1[pi.index(w.L1, b)].is_zero()) {
        edge_error("patch (" + std::to_string(w.L1) + "," + std::to_string(b) +
                       ") does not vanish on the outer edge x = L1",
                   "v = " + t.str(), at1[pi.index(w.L1, b)], Rational(0));
      }
    }
    const std::vector<Rational> bt0 = ir::eval_exact(vectorized, {t, Rational(0)});
    const std::vector<Rational> bt1 = ir::eval_exact(vectorized, {t, Rational(1)});
    for (std::int64_t a = 1; a <= w.L1; ++a) {
      for (std::int64_t b = 1; b + 1 <= w.L2; ++b) {
        const Rational& lhs = bt1[pi.index(a, b)];
        const Rational& rhs = bt0[pi.index(a, b + 1)];
        if (lhs != rhs) {
          edge_error("patches (" + std::to_string(a) + "," +
                         std::to_string(b) + ") and (" + std::to_string(a) +
                         "," + std::to_string(b + 1) +
                         ") disagree on their shared edge",
                     "u = " + t.str(), lhs, rhs);
        }
      }
      if (!bt0[pi.index(a, 1)].is_zero()) {
        edge_error("patch (" + std::to_string(a) +
                       ",1) does not vanish on the outer edge y = 0",
                   "u = " + t.str(), bt0[pi.index(a, 1)], Rational(0));
      }
      if (!bt1[pi.index(a, w.L2)].is_zero()) {
        edge_error("patch (" + std::to_string(a) + "," + std::to_string(w.L2) +
                       ") does not vanish on the outer edge y = L2",
                   "u = " + t.str(), bt1[pi.index(a, w.L2)], Rational(0));
      }
    }
  }
}

}  // namespace detail

// Exact clamped gluing (2 -> 1): reassembles the vectorized unit-square
// patches into the physical function on the plane. Applying the 1D gluing
// formula in x and then in y and expanding gives the inclusion-exclusion
//
//   f(x,y) = sum_{a,b} f_ab(s_a, t_b) - sum_b sum_{a>=2} f_ab(0, t_b)
//            - sum_{b>=2} sum_a f_ab(s_a, 0)
//            + sum_{a>=2, b>=2} f_ab(0, 0),
//
// with s_a = sigma_a(x), t_b = sigma_b(y); the corner terms are constants
// and fold into the output bias. Depth grows by O(1) and width by a factor
// depending only on the patch count.
inline ir::ReluNetwork build_glue(const ir::ReluNetwork& vectorized,
                                  const refinement::Window& w) {
  w.check();
  const refinement::PatchIndexing pi(w);
  if (vectorized.input_dim() != 2 ||
      vectorized.output_dim() != pi.size()) {
    throw DomainError("glue: vectorized network must map 2 -> L1*L2");
  }
  detail::check_patch_compatibility(vectorized, w);

  const auto l1 = static_cast<std::uint32_t>(w.L1);
  const auto l2 = static_cast<std::uint32_t>(w.L2);

  // Ramp head: hidden ReLU(x-k), ReLU(y-k); outputs sigma_1..sigma_L1 of x
  // followed by sigma_1..sigma_L2 of y, all in [0,1].
  ir::LayerSpec hidden;
  for (std::uint32_t k = 0; k <= l1; ++k) {
    hidden.push_back({{{0, Rational(1)}}, -Rational(k)});
  }
  for (std::uint32_t k = 0; k <= l2; ++k) {
    hidden.push_back({{{1, Rational(1)}}, -Rational(k)});
  }
  ir::LayerSpec sigma(l1 + l2);
  for (std::uint32_t a = 1; a <= l1; ++a) {
    sigma[a - 1] = {{{a - 1, Rational(1)}, {a, Rational(-1)}}, Rational(0)};
  }
  for (std::uint32_t b = 1; b <= l2; ++b) {
    sigma[l1 + b - 1] = {{{l1 + b, Rational(1)}, {l1 + 1 + b, Rational(-1)}},
                         Rational(0)};
  }
  const ir::ReluNetwork ramp = ir::ReluNetwork::build(2, {hidden, sigma});

  // One pruned copy of the vectorized network per required input pair; the
  // post map reduces each copy to the single scalar its term contributes.
  std::vector<ir::ReluNetwork> copies;
  std::vector<Rational> signs;
  const auto add_copy = [&](const ir::RowSpec& in_x, const ir::RowSpec& in_y,
                            const ir::LayerSpec& post, const Rational& sign) {
    const ir::LayerSpec pre{in_x, in_y};
    copies.push_back(ir::prune_dead(
        ir::affine_wrap(vectorized, pre, l1 + l2, post), {0}));
    signs.push_back(sign);
  };
  const auto pick = [](std::uint32_t c) {
    return ir::RowSpec{{{c, Rational(1)}}, Rational(0)};
  };
  const ir::RowSpec zero{{}, Rational(0)};

  for (std::int64_t a = 1; a <= w.L1; ++a) {
    for (std::int64_t b = 1; b <= w.L2; ++b) {
      add_copy(pick(static_cast<std::uint32_t>(a - 1)),
               pick(l1 + static_cast<std::uint32_t>(b - 1)),
               ir::selection_rows({pi.index(a, b)}), Rational(1));
    }
  }
  if (w.L1 >= 2) {
    for (std::int64_t b = 1; b <= w.L2; ++b) {
      ir::RowSpec sum;
      for (std::int64_t a = 2; a <= w.L1; ++a) {
        sum.terms.push_back({pi.index(a, b), Rational(1)});
      }
      add_copy(zero, pick(l1 + static_cast<std::uint32_t>(b - 1)), {sum},
               Rational(-1));
    }
  }
  if (w.L2 >= 2) {
    for (std::int64_t a = 1; a <= w.L1; ++a) {
      ir::RowSpec sum;
      for (std::int64_t b = 2; b <= w.L2; ++b) {
        sum.terms.push_back({pi.index(a, b), Rational(1)});
      }
      add_copy(pick(static_cast<std::uint32_t>(a - 1)), zero, {sum},
               Rational(-1));
    }
  }

  Rational corner(0);
  if (w.L1 >= 2 && w.L2 >= 2) {
    const std::vector<Rational> at_origin =
        ir::eval_exact(vectorized, {Rational(0), Rational(0)});
    for (std::int64_t a = 2; a <= w.L1; ++a) {
      for (std::int64_t b = 2; b <= w.L2; ++b) {
        corner += at_origin[pi.index(a, b)];
      }
    }
  }

  std::vector<const ir::ReluNetwork*> refs;
  refs.reserve(copies.size());
  for (const auto& c : copies) refs.push_back(&c);
  const ir::ReluNetwork juxt = ir::juxtapose(refs);

  ir::RowSpec total;
  total.bias = corner;
  for (std::uint32_t i = 0; i < copies.size(); ++i) {
    total.terms.push_back({i, signs[i]});
  }
  return ir::compose(
      ramp, ir::affine_wrap(juxt, ir::identity_rows(l1 + l2), l1 + l2,
                            {total}));
}

// Compilation record: the scalar network together with what it was built
// from (input fingerprints, depth, parameters) and its measured shape.
struct Provenance {
  std::uint64_t mask_hash = 0;
  std::uint64_t seed_hash = 0;
  unsigned n = 0;
  CascadeParams params;
};

struct CompiledRealization {
  ir::ReluNetwork network;  // 2 -> 1
  Provenance provenance;
  ir::NetworkStats stats;
  std::size_t atoms = 0;  // decomposition terms behind the network
};

namespace detail {

inline void check_seed_support(const cpwl::CpwlFunction2D& g,
                               const refinement::Window& w) {
  if (!g.outside_value.is_zero()) {
    throw DomainError("seed: outside value must be 0");
  }
  const Rational x1 = Rational(w.L1);
  const Rational y1 = Rational(w.L2);
  const auto& verts = g.mesh.vertices();
  const auto& vals = g.mesh.values();
  for (const cpwl::Tri& t : g.mesh.triangles()) {
    if (vals[t.a].is_zero() && vals[t.b].is_zero() && vals[t.c].is_zero()) {
      continue;
    }
    for (std::uint32_t vi : {t.a, t.b, t.c}) {
      const cpwl::Vec2& p = verts[vi];
      if (p.x.sign() < 0 || p.y.sign() < 0 || p.x > x1 || p.y > y1) {
        throw DomainError("seed: support leaves the window at (" + p.x.str() +
                          ", " + p.y.str() + ")");
      }
    }
  }
}

}  // namespace detail

// The end-to-end pipeline: realize V^n g as one scalar network. Each
// decomposition atom is compiled on the unit square, glued over the window,
// input-shifted by 2^{-n} delta_nu (translation covariance), and the terms
// summed with their coefficients. n = 0 degenerates to the compiled seed.
inline CompiledRealization build_seed_net(const cpwl::CpwlFunction2D& g,
                                          const refinement::Mask& m,
                                          const refinement::Window& w,
                                          const CascadeParams& params,
                                          unsigned n) {
  params.check();
  const refinement::TransitionMatrices tm = refinement::transition_matrices(m, w);
  detail::check_seed_support(g, w);

  CompiledRealization out;
  out.provenance.mask_hash = io::json_fingerprint(io::mask_to_json(m));
  out.provenance.seed_hash = io::json_fingerprint(io::mesh_to_json(g));
  out.provenance.n = n;
  out.provenance.params = params;

  if (n == 0) {
    out.network = cpwl::compile_2d(g);
  } else {
    const decomposition::AtomDecomposition dec =
        decomposition::decompose(g, params.rho);
    out.atoms = dec.terms.size();
    if (dec.terms.empty()) {
      out.network = ir::ReluNetwork::build(2, {{ir::RowSpec{}}});
    } else {
      const Rational scale = pow2(-static_cast<int>(n));
      std::vector<ir::ReluNetwork> shifted;
      shifted.reserve(dec.terms.size());
      for (const auto& term : dec.terms) {
        const ir::ReluNetwork glued =
            build_glue(build_unit_square(term.atom, tm, params, n), w);
        const ir::LayerSpec shift{
            {{{0, Rational(1)}}, -scale * term.shift.x},
            {{{1, Rational(1)}}, -scale * term.shift.y}};
        shifted.push_back(
            ir::affine_wrap(glued, shift, 2, ir::identity_rows(1)));
      }
      std::vector<const ir::ReluNetwork*> refs;
      refs.reserve(shifted.size());
      for (const auto& s : shifted) refs.push_back(&s);
      ir::RowSpec total;
      for (std::uint32_t i = 0; i < dec.terms.size(); ++i) {
        total.terms.push_back({i, dec.terms[i].coeff});
      }
      out.network = ir::prune_dead(
          ir::affine_wrap(ir::juxtapose(refs), ir::identity_rows(2), 2,
                          {total}),
          {0});
    }
  }
  out.network.meta()["cascade_n"] = std::to_string(n);
  out.stats = out.network.stats();
  return out;
}

}  // namespace assembler
}  // namespace cascade

#endif  // CASCADE_ASSEMBLER_HPP
