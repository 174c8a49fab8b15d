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
// Exact-arithmetic intermediate representation of ReLU networks.
//
// Conventions (fixed project-wide):
//   * A network is an ordered list of affine layers; ReLU is applied
//     componentwise after every layer except the last, whose output is
//     affine.
//   * depth  = number of affine layers.
//   * width  = max over layers of the layer's output dimension.
//   * Weights are exact rationals, stored sparsely (CSR) with all distinct
//     values interned in a per-network pool so large assemblies stay compact.

#ifndef CASCADE_NETWORK_HPP
#define CASCADE_NETWORK_HPP

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cascade/rational.hpp"

namespace cascade {
namespace ir {

// One sparse term of an affine row: coefficient * channel[col].
struct Term {
  std::uint32_t col;
  Rational coeff;
};

// A row under construction: sum of terms plus a bias. Terms may repeat a
// column (they accumulate); zero coefficients are dropped on assembly.
struct RowSpec {
  std::vector<Term> terms;
  Rational bias;
};

using LayerSpec = std::vector<RowSpec>;

// Interned rational constants shared by all layers of one network.
class ValuePool {
 public:
  std::uint32_t intern(const Rational& v) {
    auto it = index_.find(v);
    if (it != index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(values_.size());
    values_.push_back(v);
    index_.emplace(v, id);
    return id;
  }
  const Rational& operator[](std::uint32_t id) const { return values_[id]; }
  std::size_t size() const { return values_.size(); }
  const std::vector<Rational>& values() const { return values_; }

 private:
  std::vector<Rational> values_;
  std::unordered_map<Rational, std::uint32_t, RationalHash> index_;
};

// Sparse affine layer: out = W * in + b, rows in CSR form. Zero entries are
// never stored, including in the bias (bias entries are sorted by row).
struct AffineLayer {
  std::uint32_t in_dim = 0;
  std::uint32_t out_dim = 0;
  std::vector<std::uint32_t> row_offsets;  // out_dim + 1 entries
  std::vector<std::uint32_t> cols;
  std::vector<std::uint32_t> vals;  // indices into the owning ValuePool
  std::vector<std::pair<std::uint32_t, std::uint32_t>> bias;  // (row, val id)

  std::size_t nnz() const { return cols.size(); }
};

struct NetworkStats {
  std::uint32_t width = 0;
  std::uint32_t depth = 0;
  Rational max_abs_weight;            // over stored weights and biases
  std::uint64_t parameter_count = 0;  // stored weights + stored bias entries
};

class ReluNetwork {
 public:
  ReluNetwork() = default;

  static ReluNetwork build(std::uint32_t input_dim,
                           const std::vector<LayerSpec>& layers) {
    if (layers.empty()) throw DomainError("network needs at least one layer");
    ReluNetwork net;
    net.input_dim_ = input_dim;
    std::uint32_t prev = input_dim;
    for (const auto& spec : layers) {
      net.append_layer(spec, prev);
      prev = static_cast<std::uint32_t>(spec.size());
    }
    return net;
  }

  std::uint32_t input_dim() const { return input_dim_; }
  std::uint32_t output_dim() const { return layers_.back().out_dim; }
  std::uint32_t depth() const {
    return static_cast<std::uint32_t>(layers_.size());
  }
  const std::vector<AffineLayer>& layers() const { return layers_; }
  const ValuePool& pool() const { return pool_; }

  std::map<std::string, std::string>& meta() { return meta_; }
  const std::map<std::string, std::string>& meta() const { return meta_; }

  NetworkStats stats() const {
    NetworkStats s;
    s.depth = depth();
    Rational maxw(0);
    for (const auto& l : layers_) {
      s.width = std::max(s.width, l.out_dim);
      s.parameter_count += l.nnz() + l.bias.size();
      for (auto vid : l.vals) maxw = max(maxw, pool_[vid].abs());
      for (auto& [row, vid] : l.bias) maxw = max(maxw, pool_[vid].abs());
    }
    s.max_abs_weight = maxw;
    return s;
  }

  std::size_t nnz() const {
    std::size_t t = 0;
    for (const auto& l : layers_) t += l.nnz() + l.bias.size();
    return t;
  }

  // --- low-level mutation used by the combinators below ---

  void set_input_dim(std::uint32_t d) { input_dim_ = d; }

  // Assembles a layer from row specs over `expect_in` channels. Terms are
  // accumulated per column, zeros dropped, columns sorted.
  void append_layer(const LayerSpec& spec, std::uint32_t expect_in) {
    if (!layers_.empty() && layers_.back().out_dim != expect_in) {
      throw DomainError("layer input dim mismatch");
    }
    AffineLayer layer;
    layer.in_dim = expect_in;
    layer.out_dim = static_cast<std::uint32_t>(spec.size());
    layer.row_offsets.reserve(spec.size() + 1);
    layer.row_offsets.push_back(0);
    std::unordered_map<std::uint32_t, Rational> acc;
    std::vector<std::pair<std::uint32_t, Rational>> sorted;
    for (std::uint32_t r = 0; r < spec.size(); ++r) {
      acc.clear();
      for (const auto& t : spec[r].terms) {
        if (t.col >= expect_in) {
          throw DomainError("row term column " + std::to_string(t.col) +
                            " out of range (in_dim " +
                            std::to_string(expect_in) + ")");
        }
        acc[t.col] += t.coeff;
      }
      sorted.clear();
      for (auto& [c, v] : acc) {
        if (!v.is_zero()) sorted.emplace_back(c, v);
      }
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      for (auto& [c, v] : sorted) {
        layer.cols.push_back(c);
        layer.vals.push_back(pool_.intern(v));
      }
      layer.row_offsets.push_back(
          static_cast<std::uint32_t>(layer.cols.size()));
      if (!spec[r].bias.is_zero()) {
        layer.bias.emplace_back(r, pool_.intern(spec[r].bias));
      }
    }
    layers_.push_back(std::move(layer));
  }

  // Appends an already-assembled CSR layer whose val ids refer to `from`.
  void append_raw_layer(const AffineLayer& layer, const ValuePool& from) {
    if (!layers_.empty() && layers_.back().out_dim != layer.in_dim) {
      throw DomainError("layer input dim mismatch");
    }
    AffineLayer copy = layer;
    for (auto& v : copy.vals) v = pool_.intern(from[v]);
    for (auto& [r, v] : copy.bias) v = pool_.intern(from[v]);
    layers_.push_back(std::move(copy));
  }

 private:
  std::uint32_t input_dim_ = 0;
  std::vector<AffineLayer> layers_;
  ValuePool pool_;
  std::map<std::string, std::string> meta_;
};

namespace detail {

// Bias of a row (bias entries are sorted by row).
inline Rational bias_of(const AffineLayer& l, const ValuePool& pool,
                        std::uint32_t row) {
  auto it = std::lower_bound(
      l.bias.begin(), l.bias.end(), row,
      [](const auto& e, std::uint32_t r) { return e.first < r; });
  if (it != l.bias.end() && it->first == row) return pool[it->second];
  return Rational(0);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Evaluation

// Evaluates every layer in exact rational arithmetic. Reusable across points
// (holds scratch buffers); any number of evaluators may share one network.
class ExactEvaluator {
 public:
  explicit ExactEvaluator(const ReluNetwork& net) : net_(&net) {}

  std::vector<Rational> eval(const std::vector<Rational>& x) {
    run(x, nullptr);
    return cur_;
  }

  // Post-activation values of every layer (final layer affine), for
  // instrumented structural tests.
  std::vector<std::vector<Rational>> eval_trace(
      const std::vector<Rational>& x) {
    std::vector<std::vector<Rational>> trace;
    run(x, &trace);
    return trace;
  }

 private:
  void run(const std::vector<Rational>& x,
           std::vector<std::vector<Rational>>* trace) {
    if (x.size() != net_->input_dim()) {
      throw DomainError("eval: expected input dim " +
                        std::to_string(net_->input_dim()) + ", got " +
                        std::to_string(x.size()));
    }
    const auto& layers = net_->layers();
    const auto& pool = net_->pool().values();
    cur_ = x;
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const AffineLayer& l = layers[li];
      next_.assign(l.out_dim, Rational(0));
      for (auto& [row, vid] : l.bias) next_[row] = pool[vid];
      for (std::uint32_t r = 0; r < l.out_dim; ++r) {
        Rational acc = next_[r];
        const auto end = l.row_offsets[r + 1];
        for (auto k = l.row_offsets[r]; k < end; ++k) {
          const Rational& xv = cur_[l.cols[k]];
          if (xv.is_zero()) continue;
          acc += pool[l.vals[k]] * xv;
        }
        next_[r] = std::move(acc);
      }
      if (li + 1 != layers.size()) {
        for (auto& v : next_) {
          if (v.sign() < 0) v = Rational(0);
        }
      }
      if (trace) trace->push_back(next_);
      cur_.swap(next_);
    }
  }

  const ReluNetwork* net_;
  std::vector<Rational> cur_, next_;
};

// Float64 evaluation of the same circuit (pool converted once).
class F64Evaluator {
 public:
  explicit F64Evaluator(const ReluNetwork& net) : net_(&net) {
    pool_.reserve(net.pool().size());
    for (const auto& v : net.pool().values()) pool_.push_back(v.to_double());
  }

  std::vector<double> eval(const std::vector<double>& x) {
    if (x.size() != net_->input_dim()) {
      throw DomainError("eval: expected input dim " +
                        std::to_string(net_->input_dim()) + ", got " +
                        std::to_string(x.size()));
    }
    cur_ = x;
    const auto& layers = net_->layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const AffineLayer& l = layers[li];
      next_.assign(l.out_dim, 0.0);
      for (auto& [row, vid] : l.bias) next_[row] = pool_[vid];
      for (std::uint32_t r = 0; r < l.out_dim; ++r) {
        double acc = next_[r];
        const auto end = l.row_offsets[r + 1];
        for (auto k = l.row_offsets[r]; k < end; ++k) {
          acc += pool_[l.vals[k]] * cur_[l.cols[k]];
        }
        next_[r] = acc;
      }
      if (li + 1 != layers.size()) {
        for (auto& v : next_) {
          if (v < 0) v = 0.0;
        }
      }
      cur_.swap(next_);
    }
    return cur_;
  }

 private:
  const ReluNetwork* net_;
  std::vector<double> pool_;
  std::vector<double> cur_, next_;
};

inline std::vector<Rational> eval_exact(const ReluNetwork& net,
                                        const std::vector<Rational>& x) {
  return ExactEvaluator(net).eval(x);
}

inline std::vector<double> eval_f64(const ReluNetwork& net,
                                    const std::vector<Rational>& x) {
  std::vector<double> xd;
  xd.reserve(x.size());
  for (const auto& v : x) xd.push_back(v.to_double());
  return F64Evaluator(net).eval(xd);
}

// ---------------------------------------------------------------------------
// Structural combinators

namespace detail {

// second(first(x)) as one affine layer over first's inputs.
inline LayerSpec fuse_affine(const AffineLayer& first, const ValuePool& fpool,
                             const AffineLayer& second,
                             const ValuePool& spool) {
  LayerSpec out(second.out_dim);
  std::vector<Rational> first_bias(first.out_dim, Rational(0));
  for (auto& [row, vid] : first.bias) first_bias[row] = fpool[vid];
  std::unordered_map<std::uint32_t, Rational> acc;
  for (std::uint32_t r = 0; r < second.out_dim; ++r) {
    acc.clear();
    Rational bias = bias_of(second, spool, r);
    for (auto k = second.row_offsets[r]; k < second.row_offsets[r + 1]; ++k) {
      const std::uint32_t mid = second.cols[k];
      const Rational& w = spool[second.vals[k]];
      bias += w * first_bias[mid];
      for (auto j = first.row_offsets[mid]; j < first.row_offsets[mid + 1];
           ++j) {
        acc[first.cols[j]] += w * fpool[first.vals[j]];
      }
    }
    RowSpec rs;
    rs.bias = bias;
    for (auto& [c, v] : acc) {
      if (!v.is_zero()) rs.terms.push_back({c, v});
    }
    out[r] = std::move(rs);
  }
  return out;
}

// Re-emits carried channels one layer further (identity rows), updating the
// recorded positions in place. Channels in `pos`/`neg` hold post-ReLU values,
// hence nonnegative, so a single identity channel is exact for each.
inline void carry_forward(LayerSpec& spec, std::vector<std::uint32_t>& pos,
                          std::vector<std::uint32_t>& neg) {
  const auto base = static_cast<std::uint32_t>(spec.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    spec.push_back({{{pos[i], Rational(1)}}, Rational(0)});
    pos[i] = base + static_cast<std::uint32_t>(i);
  }
  const auto nbase = static_cast<std::uint32_t>(spec.size());
  for (std::size_t i = 0; i < neg.size(); ++i) {
    spec.push_back({{{neg[i], Rational(1)}}, Rational(0)});
    neg[i] = nbase + static_cast<std::uint32_t>(i);
  }
}

}  // namespace detail

// second(first(x)). The last affine layer of `first` is fused into the first
// layer of `second` (no activation at the seam), so
// depth = depth(first) + depth(second) - 1.
inline ReluNetwork compose(const ReluNetwork& first,
                           const ReluNetwork& second) {
  if (first.output_dim() != second.input_dim()) {
    throw DomainError("compose: output dim " +
                      std::to_string(first.output_dim()) + " != input dim " +
                      std::to_string(second.input_dim()));
  }
  ReluNetwork net;
  net.set_input_dim(first.input_dim());
  const auto& fl = first.layers();
  const auto& sl = second.layers();
  for (std::size_t i = 0; i + 1 < fl.size(); ++i) {
    net.append_raw_layer(fl[i], first.pool());
  }
  const LayerSpec seam =
      detail::fuse_affine(fl.back(), first.pool(), sl.front(), second.pool());
  net.append_layer(seam, fl.back().in_dim);
  for (std::size_t i = 1; i < sl.size(); ++i) {
    net.append_raw_layer(sl[i], second.pool());
  }
  return net;
}

// Broadcast juxtaposition: all blocks read the same input vector; the output
// is the concatenation of block outputs, in order. Shorter blocks are padded
// with exact pass-through channels (post-ReLU values are nonnegative, so one
// channel each suffices; a depth-1 block's raw input is carried as
// ReLU(x)/ReLU(-x) pairs), so depth = max block depth.
inline ReluNetwork juxtapose(const std::vector<const ReluNetwork*>& nets) {
  if (nets.empty()) throw DomainError("juxtapose: empty list");
  const std::uint32_t in_dim = nets[0]->input_dim();
  std::uint32_t depth = 0;
  for (auto* n : nets) {
    if (n->input_dim() != in_dim) {
      throw DomainError("juxtapose: mismatched input dims");
    }
    depth = std::max(depth, n->depth());
  }

  ReluNetwork net;
  net.set_input_dim(in_dim);

  // carried_pos[b][c] = merged column holding channel c of block b's most
  // recent own layer (post-ReLU). For a depth-1 block the raw input is
  // carried instead, as signed pairs in carried_pos/carried_neg.
  std::vector<std::vector<std::uint32_t>> carried_pos(nets.size());
  std::vector<std::vector<std::uint32_t>> carried_neg(nets.size());

  std::uint32_t prev_dim = in_dim;
  for (std::uint32_t t = 0; t + 1 < depth; ++t) {
    LayerSpec spec;
    for (std::size_t b = 0; b < nets.size(); ++b) {
      const ReluNetwork& blk = *nets[b];
      const std::uint32_t d = blk.depth();
      if (t + 1 < d) {
        // The block contributes its own hidden layer t.
        const AffineLayer& l = blk.layers()[t];
        const auto& pool = blk.pool();
        const auto base = static_cast<std::uint32_t>(spec.size());
        for (std::uint32_t r = 0; r < l.out_dim; ++r) {
          RowSpec rs;
          rs.bias = detail::bias_of(l, pool, r);
          for (auto k = l.row_offsets[r]; k < l.row_offsets[r + 1]; ++k) {
            const std::uint32_t src = l.cols[k];
            const std::uint32_t col = t == 0 ? src : carried_pos[b][src];
            rs.terms.push_back({col, pool[l.vals[k]]});
          }
          spec.push_back(std::move(rs));
        }
        carried_pos[b].clear();
        carried_neg[b].clear();
        for (std::uint32_t r = 0; r < l.out_dim; ++r) {
          carried_pos[b].push_back(base + r);
        }
      } else if (d == 1 && t == 0) {
        // Depth-1 block: start carrying the raw input as signed pairs.
        for (std::uint32_t i = 0; i < in_dim; ++i) {
          const auto base = static_cast<std::uint32_t>(spec.size());
          spec.push_back({{{i, Rational(1)}}, Rational(0)});
          spec.push_back({{{i, Rational(-1)}}, Rational(0)});
          carried_pos[b].push_back(base);
          carried_neg[b].push_back(base + 1);
        }
      } else {
        detail::carry_forward(spec, carried_pos[b], carried_neg[b]);
      }
    }
    net.append_layer(spec, prev_dim);
    prev_dim = static_cast<std::uint32_t>(spec.size());
  }

  // Final merged affine layer: each block's own final layer, rewired onto
  // the carried channels.
  LayerSpec final_spec;
  for (std::size_t b = 0; b < nets.size(); ++b) {
    const ReluNetwork& blk = *nets[b];
    const AffineLayer& l = blk.layers().back();
    const auto& pool = blk.pool();
    const bool signed_carry = !carried_neg[b].empty();
    for (std::uint32_t r = 0; r < l.out_dim; ++r) {
      RowSpec rs;
      rs.bias = detail::bias_of(l, pool, r);
      for (auto k = l.row_offsets[r]; k < l.row_offsets[r + 1]; ++k) {
        const std::uint32_t src = l.cols[k];
        const Rational& w = pool[l.vals[k]];
        if (depth == 1) {
          rs.terms.push_back({src, w});
        } else if (signed_carry) {
          rs.terms.push_back({carried_pos[b][src], w});
          rs.terms.push_back({carried_neg[b][src], -w});
        } else {
          rs.terms.push_back({carried_pos[b][src], w});
        }
      }
      final_spec.push_back(std::move(rs));
    }
  }
  net.append_layer(final_spec, prev_dim);
  return net;
}

inline ReluNetwork juxtapose(std::initializer_list<const ReluNetwork*> nets) {
  return juxtapose(std::vector<const ReluNetwork*>(nets));
}

// post(net(pre(x))). Both affine maps fuse into the adjacent layers, so the
// depth is unchanged. `pre` rows are over `pre_in_dim` inputs; `post` rows
// are over net's outputs.
inline ReluNetwork affine_wrap(const ReluNetwork& net, const LayerSpec& pre,
                               std::uint32_t pre_in_dim,
                               const LayerSpec& post) {
  const ReluNetwork pre_net = ReluNetwork::build(pre_in_dim, {pre});
  const ReluNetwork post_net = ReluNetwork::build(net.output_dim(), {post});
  return compose(compose(pre_net, net), post_net);
}

// Identity network of the given depth (>= 1). With nonneg=true each value
// rides a single ReLU channel (exact only on inputs >= 0); otherwise the
// ReLU(x)-ReLU(-x) pair is used (exact everywhere).
inline ReluNetwork pass_through(std::uint32_t dim, bool nonneg,
                                std::uint32_t depth = 2) {
  if (depth < 1) throw DomainError("pass_through: depth must be >= 1");
  std::vector<LayerSpec> layers;
  if (depth == 1) {
    LayerSpec id(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      id[i] = {{{i, Rational(1)}}, Rational(0)};
    }
    layers.push_back(std::move(id));
    return ReluNetwork::build(dim, layers);
  }
  for (std::uint32_t t = 0; t + 1 < depth; ++t) {
    LayerSpec hidden;
    for (std::uint32_t i = 0; i < dim; ++i) {
      if (nonneg) {
        hidden.push_back({{{i, Rational(1)}}, Rational(0)});
      } else if (t == 0) {
        hidden.push_back({{{i, Rational(1)}}, Rational(0)});
        hidden.push_back({{{i, Rational(-1)}}, Rational(0)});
      } else {
        hidden.push_back({{{2 * i, Rational(1)}}, Rational(0)});
        hidden.push_back({{{2 * i + 1, Rational(1)}}, Rational(0)});
      }
    }
    layers.push_back(std::move(hidden));
  }
  LayerSpec out;
  for (std::uint32_t i = 0; i < dim; ++i) {
    if (nonneg) {
      out.push_back({{{i, Rational(1)}}, Rational(0)});
    } else {
      out.push_back(
          {{{2 * i, Rational(1)}, {2 * i + 1, Rational(-1)}}, Rational(0)});
    }
  }
  layers.push_back(std::move(out));
  return ReluNetwork::build(dim, layers);
}

// min(a,b) = a - ReLU(a-b), with `a` carried through the hidden layer as a
// ReLU(a)/ReLU(-a) pair. Exact for all rational inputs; depth 2, width 3.
inline ReluNetwork min2_gadget() {
  const LayerSpec hidden = {
      {{{0, Rational(1)}, {1, Rational(-1)}}, Rational(0)},  // ReLU(a-b)
      {{{0, Rational(1)}}, Rational(0)},                     // ReLU(a)
      {{{0, Rational(-1)}}, Rational(0)},                    // ReLU(-a)
  };
  const LayerSpec out = {
      {{{1, Rational(1)}, {2, Rational(-1)}, {0, Rational(-1)}}, Rational(0)}};
  return ReluNetwork::build(2, {hidden, out});
}

// max(a,b) = a + ReLU(b-a); depth 2, width 3.
inline ReluNetwork max2_gadget() {
  const LayerSpec hidden = {
      {{{1, Rational(1)}, {0, Rational(-1)}}, Rational(0)},  // ReLU(b-a)
      {{{0, Rational(1)}}, Rational(0)},
      {{{0, Rational(-1)}}, Rational(0)},
  };
  const LayerSpec out = {
      {{{1, Rational(1)}, {2, Rational(-1)}, {0, Rational(1)}}, Rational(0)}};
  return ReluNetwork::build(2, {hidden, out});
}

// Affine rows copying channels 0..dim-1 unchanged.
inline LayerSpec identity_rows(std::uint32_t dim) {
  LayerSpec rows(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    rows[i] = {{{i, Rational(1)}}, Rational(0)};
  }
  return rows;
}

// Affine rows picking out the listed channels, in order.
inline LayerSpec selection_rows(const std::vector<std::uint32_t>& channels) {
  LayerSpec rows;
  rows.reserve(channels.size());
  for (const std::uint32_t c : channels) {
    rows.push_back({{{c, Rational(1)}}, Rational(0)});
  }
  return rows;
}

// Parallel tournament reduction of grouped affine expressions. Each group is
// reduced to a single expression with min (or max); all groups advance one
// tree level per layer so the final expressions live on a common layer.
class TreeReducer {
 public:
  explicit TreeReducer(std::uint32_t input_dim) : cur_dim_(input_dim) {
    net_.set_input_dim(input_dim);
  }

  // groups: expressions over the CURRENT layer's channels.
  // Runs min-reduction within each group, then max-reduction across groups;
  // returns the final scalar expression via finish().
  RowSpec reduce(std::vector<std::vector<RowSpec>> groups, bool inner_min,
                 bool outer_max) {
    while (max_size(groups) > 1) {
      level(groups, inner_min);
    }
    std::vector<RowSpec> finals;
    finals.reserve(groups.size());
    for (auto& g : groups) finals.push_back(std::move(g.front()));
    std::vector<std::vector<RowSpec>> outer = {std::move(finals)};
    while (max_size(outer) > 1) {
      level(outer, !outer_max);
    }
    return std::move(outer.front().front());
  }

  ReluNetwork finish(const RowSpec& output) {
    net_.append_layer({output}, cur_dim_);
    return std::move(net_);
  }

  std::uint32_t depth_so_far() const { return net_.depth(); }

 private:
  static std::size_t max_size(const std::vector<std::vector<RowSpec>>& groups) {
    std::size_t m = 0;
    for (const auto& g : groups) m = std::max(m, g.size());
    return m;
  }

  static RowSpec diff(const RowSpec& u, const RowSpec& w) {
    RowSpec d = u;
    for (const auto& t : w.terms) d.terms.push_back({t.col, -t.coeff});
    d.bias = u.bias - w.bias;
    return d;
  }

  static RowSpec negate(const RowSpec& u) {
    RowSpec n;
    n.bias = -u.bias;
    for (const auto& t : u.terms) n.terms.push_back({t.col, -t.coeff});
    return n;
  }

  // One tournament level across all groups: pairs (u,w) are replaced by
  // min(u,w) = u+ - u- - ReLU(u-w)   (is_min)
  // max(u,w) = u+ - u- + ReLU(w-u)   (!is_min)
  // and odd/singleton entries are carried as signed pairs.
  void level(std::vector<std::vector<RowSpec>>& groups, bool is_min) {
    LayerSpec spec;
    std::vector<std::vector<RowSpec>> next(groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      auto& g = groups[gi];
      std::size_t i = 0;
      for (; i + 1 < g.size(); i += 2) {
        const RowSpec& u = g[i];
        const RowSpec& w = g[i + 1];
        const auto ch = static_cast<std::uint32_t>(spec.size());
        spec.push_back(is_min ? diff(u, w) : diff(w, u));  // ReLU(+-(u-w))
        spec.push_back(u);                                 // ReLU(u)
        spec.push_back(negate(u));                         // ReLU(-u)
        RowSpec r;
        r.terms = {{ch + 1, Rational(1)},
                   {ch + 2, Rational(-1)},
                   {ch, is_min ? Rational(-1) : Rational(1)}};
        r.bias = Rational(0);
        next[gi].push_back(std::move(r));
      }
      if (i < g.size()) {  // leftover: carry as signed pair
        const auto ch = static_cast<std::uint32_t>(spec.size());
        spec.push_back(g[i]);
        spec.push_back(negate(g[i]));
        RowSpec r;
        r.terms = {{ch, Rational(1)}, {ch + 1, Rational(-1)}};
        r.bias = Rational(0);
        next[gi].push_back(std::move(r));
      }
    }
    net_.append_layer(spec, cur_dim_);
    cur_dim_ = static_cast<std::uint32_t>(spec.size());
    groups = std::move(next);
  }

  ReluNetwork net_;
  std::uint32_t cur_dim_;
};

// ---------------------------------------------------------------------------
// Exactness-preserving transforms

// Propagates constant channels (rows with no dynamic inputs) into consumer
// biases and removes them. If the whole network collapses, the result is a
// single affine layer emitting the constant outputs.
inline ReluNetwork fold_constants(const ReluNetwork& net) {
  const auto& layers = net.layers();
  const auto& pool = net.pool();

  std::vector<std::optional<Rational>> prev_const(net.input_dim());
  std::vector<std::uint32_t> prev_remap(net.input_dim());
  for (std::uint32_t i = 0; i < net.input_dim(); ++i) prev_remap[i] = i;
  std::uint32_t prev_dyn = net.input_dim();

  ReluNetwork out;
  out.set_input_dim(net.input_dim());
  out.meta() = net.meta();

  for (std::size_t li = 0; li < layers.size(); ++li) {
    const AffineLayer& l = layers[li];
    const bool last = li + 1 == layers.size();
    LayerSpec spec;
    std::vector<std::optional<Rational>> cur_const(l.out_dim);
    std::vector<std::uint32_t> cur_remap(l.out_dim, 0);
    for (std::uint32_t r = 0; r < l.out_dim; ++r) {
      Rational bias = detail::bias_of(l, pool, r);
      RowSpec rs;
      for (auto k = l.row_offsets[r]; k < l.row_offsets[r + 1]; ++k) {
        const std::uint32_t c = l.cols[k];
        const Rational& w = pool[l.vals[k]];
        if (prev_const[c].has_value()) {
          bias += w * *prev_const[c];
        } else {
          rs.terms.push_back({prev_remap[c], w});
        }
      }
      if (rs.terms.empty() && !last) {
        cur_const[r] = bias.sign() > 0 ? bias : Rational(0);  // hidden ReLU
      } else {
        rs.bias = bias;
        cur_remap[r] = static_cast<std::uint32_t>(spec.size());
        spec.push_back(std::move(rs));
      }
    }
    if (!last && spec.empty()) {
      // Everything downstream is constant: evaluate the tail directly.
      std::vector<Rational> vals(l.out_dim);
      for (std::uint32_t r = 0; r < l.out_dim; ++r) vals[r] = *cur_const[r];
      for (std::size_t lj = li + 1; lj < layers.size(); ++lj) {
        const AffineLayer& m = layers[lj];
        std::vector<Rational> nxt(m.out_dim, Rational(0));
        for (std::uint32_t r = 0; r < m.out_dim; ++r) {
          Rational acc = detail::bias_of(m, pool, r);
          for (auto k = m.row_offsets[r]; k < m.row_offsets[r + 1]; ++k) {
            acc += pool[m.vals[k]] * vals[m.cols[k]];
          }
          if (lj + 1 != layers.size() && acc.sign() < 0) acc = Rational(0);
          nxt[r] = std::move(acc);
        }
        vals.swap(nxt);
      }
      LayerSpec konst(vals.size());
      for (std::size_t r = 0; r < vals.size(); ++r) {
        konst[r] = {{}, vals[r]};
      }
      ReluNetwork collapsed;
      collapsed.set_input_dim(net.input_dim());
      collapsed.meta() = net.meta();
      collapsed.append_layer(konst, net.input_dim());
      return collapsed;
    }
    out.append_layer(spec, prev_dyn);
    prev_dyn = static_cast<std::uint32_t>(spec.size());
    prev_const = std::move(cur_const);
    prev_remap = std::move(cur_remap);
  }
  return out;
}

// Fixes input channel `index` to `value`: the column is folded into layer-0
// biases and removed, then constants are propagated forward. Semantically,
// result(x') = net(x' with `value` inserted at `index`).
inline ReluNetwork pin_input(const ReluNetwork& net, std::uint32_t index,
                             const Rational& value) {
  if (index >= net.input_dim()) throw DomainError("pin_input: bad index");
  ReluNetwork out;
  out.set_input_dim(net.input_dim() - 1);
  out.meta() = net.meta();
  const auto& pool = net.pool();
  bool first = true;
  for (const auto& l : net.layers()) {
    if (!first) {
      out.append_raw_layer(l, pool);
      continue;
    }
    first = false;
    LayerSpec spec(l.out_dim);
    for (std::uint32_t r = 0; r < l.out_dim; ++r) {
      RowSpec rs;
      rs.bias = detail::bias_of(l, pool, r);
      for (auto k = l.row_offsets[r]; k < l.row_offsets[r + 1]; ++k) {
        const std::uint32_t c = l.cols[k];
        const Rational& w = pool[l.vals[k]];
        if (c == index) {
          rs.bias += w * value;
        } else {
          rs.terms.push_back({c > index ? c - 1 : c, w});
        }
      }
      spec[r] = std::move(rs);
    }
    out.append_layer(spec, net.input_dim() - 1);
  }
  return fold_constants(out);
}

// Keeps only the listed output rows (in the given order) and removes all
// channels that no longer feed any kept output.
inline ReluNetwork prune_dead(const ReluNetwork& net,
                              const std::vector<std::uint32_t>& outputs) {
  const auto& layers = net.layers();
  const auto& pool = net.pool();
  const std::size_t L = layers.size();
  for (auto o : outputs) {
    if (o >= layers.back().out_dim) {
      throw DomainError("prune_dead: bad output index");
    }
  }
  // live[t] = kept channel indices (sorted) of layer t's output.
  std::vector<std::vector<std::uint32_t>> live(L);
  {
    std::vector<std::uint32_t> s(outputs);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    live[L - 1] = std::move(s);
  }
  for (std::size_t t = L - 1; t > 0; --t) {
    std::vector<bool> used(layers[t].in_dim, false);
    const auto& l = layers[t];
    for (auto r : live[t]) {
      for (auto k = l.row_offsets[r]; k < l.row_offsets[r + 1]; ++k) {
        used[l.cols[k]] = true;
      }
    }
    for (std::uint32_t c = 0; c < used.size(); ++c) {
      if (used[c]) live[t - 1].push_back(c);
    }
  }

  ReluNetwork out;
  out.set_input_dim(net.input_dim());
  out.meta() = net.meta();
  std::vector<std::uint32_t> remap_prev(net.input_dim());
  for (std::uint32_t i = 0; i < net.input_dim(); ++i) remap_prev[i] = i;
  std::uint32_t prev_dim = net.input_dim();
  for (std::size_t t = 0; t < L; ++t) {
    const auto& l = layers[t];
    std::vector<std::uint32_t> remap(l.out_dim, UINT32_MAX);
    LayerSpec spec;
    // Hidden layers keep sorted liveness order; the final layer keeps the
    // caller's order (including duplicates).
    const auto& kept = (t + 1 == L) ? outputs : live[t];
    for (auto r : kept) {
      RowSpec rs;
      rs.bias = detail::bias_of(l, pool, r);
      for (auto k = l.row_offsets[r]; k < l.row_offsets[r + 1]; ++k) {
        rs.terms.push_back({remap_prev[l.cols[k]], pool[l.vals[k]]});
      }
      remap[r] = static_cast<std::uint32_t>(spec.size());
      spec.push_back(std::move(rs));
    }
    out.append_layer(spec, prev_dim);
    prev_dim = static_cast<std::uint32_t>(spec.size());
    remap_prev.assign(remap.begin(), remap.end());
  }
  return out;
}

}  // namespace ir
}  // namespace cascade

#endif  // CASCADE_NETWORK_HPP
