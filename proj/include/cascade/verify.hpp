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
// End-to-end verification harness: compiles the realization for a range of
// depths, compares it against the independent oracles at deterministic
// sample families (grid, random, and adversarial points), runs the module
// property suites, and assembles a reproducible report.
//
// Determinism contract: one plan (including its RNG seed) produces one
// byte-identical report. Sample points are generated in a fixed family
// order (grid, random, dyadic-line, seam-orbit, window-boundary, outside),
// point evaluations may run concurrently, and results are merged in the
// generation order. Wall-clock timings break byte-stability by nature, so
// they are recorded only when the plan asks for them.

#ifndef CASCADE_VERIFY_HPP
#define CASCADE_VERIFY_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cascade/assembler.hpp"
#include "cascade/controller.hpp"
#include "cascade/cpwl.hpp"
#include "cascade/decomposition.hpp"
#include "cascade/dyadic.hpp"
#include "cascade/gadgets.hpp"
#include "cascade/network.hpp"
#include "cascade/refinement.hpp"
#include "cascade/serialize.hpp"

namespace cascade {
namespace verify {

// ---------------------------------------------------------------------------
// Plan

// Per-level sample budget. Counts are per depth n; the grid family walks
// the dyadic lattice of level n + grid_level_offset inside the window
// (optionally strided down to grid_max_per_axis points per axis).
// suite_* fields size the module property suites; their defaults match the
// acceptance workloads.
struct SampleSpec {
  std::int64_t grid_level_offset = 3;
  std::uint32_t grid_max_per_axis = 0;  // 0 = the full grid
  std::uint32_t random_count = 500;
  std::uint32_t dyadic_line_count = 100;
  std::uint32_t seam_orbit_count = 100;
  std::uint32_t boundary_count = 100;
  std::uint32_t outside_count = 50;
  std::uint64_t rng_seed = 0x5eedc0de2026ull;
  std::uint32_t suite_random_count = 1000;
  std::uint32_t controller_iterations = 32;
  unsigned hreadout_max_n = 6;
  unsigned covariance_n = 4;
  std::uint32_t covariance_count = 1000;
};

struct VerificationPlan {
  refinement::Mask mask;
  cpwl::CpwlFunction2D seed;
  refinement::Window window;
  assembler::CascadeParams params;
  std::vector<unsigned> n_values;
  SampleSpec samples;
  bool record_timings = false;
  unsigned direct_oracle_cap = 6;
  // Negative-control hook: when set, the network is compiled from this mask
  // while the oracles keep using `mask` as ground truth, so a deliberate
  // corruption surfaces as an oracle mismatch with a witness point.
  std::optional<refinement::Mask> compile_mask;
};

inline io::json sample_spec_to_json(const SampleSpec& s) {
  io::json j = io::json::object();
  j["grid_level_offset"] = s.grid_level_offset;
  j["grid_max_per_axis"] = s.grid_max_per_axis;
  j["random_count"] = s.random_count;
  j["dyadic_line_count"] = s.dyadic_line_count;
  j["seam_orbit_count"] = s.seam_orbit_count;
  j["boundary_count"] = s.boundary_count;
  j["outside_count"] = s.outside_count;
  j["rng_seed"] = s.rng_seed;
  j["suite_random_count"] = s.suite_random_count;
  j["controller_iterations"] = s.controller_iterations;
  j["hreadout_max_n"] = s.hreadout_max_n;
  j["covariance_n"] = s.covariance_n;
  j["covariance_count"] = s.covariance_count;
  return j;
}

inline SampleSpec sample_spec_from_json(const io::json& j) {
  SampleSpec s;
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("grid_level_offset", s.grid_level_offset);
  get("grid_max_per_axis", s.grid_max_per_axis);
  get("random_count", s.random_count);
  get("dyadic_line_count", s.dyadic_line_count);
  get("seam_orbit_count", s.seam_orbit_count);
  get("boundary_count", s.boundary_count);
  get("outside_count", s.outside_count);
  get("rng_seed", s.rng_seed);
  get("suite_random_count", s.suite_random_count);
  get("controller_iterations", s.controller_iterations);
  get("hreadout_max_n", s.hreadout_max_n);
  get("covariance_n", s.covariance_n);
  get("covariance_count", s.covariance_count);
  return s;
}

inline io::json plan_to_json(const VerificationPlan& p) {
  io::json j = io::json::object();
  j["mask"] = io::mask_to_json(p.mask);
  j["seed"] = io::mesh_to_json(p.seed);
  j["window"] = io::window_to_json(p.window);
  io::json params = io::json::object();
  params["rho"] = p.params.rho.str();
  params["eps_bar"] = p.params.eps_bar.str();
  params["delta_bar"] = p.params.delta_bar.str();
  j["params"] = std::move(params);
  j["n_values"] = p.n_values;
  j["samples"] = sample_spec_to_json(p.samples);
  j["record_timings"] = p.record_timings;
  j["direct_oracle_cap"] = p.direct_oracle_cap;
  if (p.compile_mask.has_value()) {
    j["compile_mask"] = io::mask_to_json(*p.compile_mask);
  }
  return j;
}

inline VerificationPlan plan_from_json(const io::json& j) {
  if (!j.is_object() || !j.contains("mask") || !j.contains("seed") ||
      !j.contains("window") || !j.contains("n_values")) {
    throw ParseError("plan json: need mask, seed, window and n_values");
  }
  assembler::CascadeParams params;
  if (j.contains("params")) {
    const auto& p = j.at("params");
    if (p.contains("rho")) {
      params.rho = Rational::parse(p.at("rho").get<std::string>());
    }
    if (p.contains("eps_bar")) {
      params.eps_bar = Rational::parse(p.at("eps_bar").get<std::string>());
    }
    if (p.contains("delta_bar")) {
      params.delta_bar = Rational::parse(p.at("delta_bar").get<std::string>());
    }
  }
  VerificationPlan plan{io::mask_from_json(j.at("mask")),
                        io::mesh_from_json(j.at("seed")),
                        io::window_from_json(j.at("window")),
                        params,
                        j.at("n_values").get<std::vector<unsigned>>(),
                        j.contains("samples")
                            ? sample_spec_from_json(j.at("samples"))
                            : SampleSpec{},
                        j.value("record_timings", false),
                        j.value("direct_oracle_cap", 6u),
                        std::nullopt};
  if (j.contains("compile_mask")) {
    plan.compile_mask = io::mask_from_json(j.at("compile_mask"));
  }
  return plan;
}

inline std::uint64_t plan_fingerprint(const VerificationPlan& p) {
  return io::json_fingerprint(plan_to_json(p));
}

// The primary acceptance configuration: tensor hat mask c_{j,k} = t_j t_k
// with t = (1/2, 1, 1/2), the pyramid seed on [0,2]^2 (4-triangle fan with
// apex value 1 at the center), window (2,2), default parameters, n = 1..5.
inline VerificationPlan demo_plan() {
  refinement::Mask mask;
  const Rational t[3] = {Rational(1, 2), Rational(1), Rational(1, 2)};
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) mask.set(j, k, t[j] * t[k]);
  }
  const std::vector<cpwl::Vec2> verts = {
      {Rational(1), Rational(1)}, {Rational(0), Rational(0)},
      {Rational(2), Rational(0)}, {Rational(2), Rational(2)},
      {Rational(0), Rational(2)}};
  const std::vector<cpwl::Tri> tris = {
      {0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 1}};
  const std::vector<Rational> vals = {Rational(1), Rational(0), Rational(0),
                                      Rational(0), Rational(0)};
  return VerificationPlan{std::move(mask),
                          {cpwl::CpwlMesh(verts, tris, vals), Rational(0)},
                          refinement::Window{2, 2},
                          assembler::CascadeParams{},
                          {1, 2, 3, 4, 5},
                          SampleSpec{},
                          false,
                          6,
                          std::nullopt};
}

// ---------------------------------------------------------------------------
// Report

struct Witness {
  cpwl::Vec2 point;
  std::string detail;
};

struct LevelReport {
  unsigned n = 0;
  ir::NetworkStats stats{};
  std::uint64_t points_checked = 0;
  std::uint64_t mismatches = 0;
  std::uint64_t oracle_pairs_checked = 0;
  std::uint64_t oracle_mismatches = 0;
  std::vector<Witness> witnesses;
};

struct SuiteResult {
  std::string name;
  std::uint64_t checks = 0;
  std::uint64_t failures = 0;
  std::vector<std::string> witnesses;
};

struct VerificationReport {
  std::uint64_t plan_fp = 0;
  std::vector<LevelReport> levels;
  std::vector<SuiteResult> suites;
  bool width_constant = true;
  bool depth_affine = true;
  std::string depth_fit;
  std::uint64_t total_mismatches = 0;
  bool pass = false;
  std::vector<std::pair<std::string, double>> timings;
};

inline io::json report_to_json(const VerificationReport& r) {
  io::json j = io::json::object();
  j["plan_fingerprint"] = std::to_string(r.plan_fp);
  j["pass"] = r.pass;
  j["total_mismatches"] = r.total_mismatches;
  j["width_constant"] = r.width_constant;
  j["depth_affine"] = r.depth_affine;
  j["depth_fit"] = r.depth_fit;
  io::json levels = io::json::array();
  for (const LevelReport& l : r.levels) {
    io::json jl = io::json::object();
    jl["n"] = l.n;
    jl["points_checked"] = l.points_checked;
    jl["mismatches"] = l.mismatches;
    jl["oracle_pairs_checked"] = l.oracle_pairs_checked;
    jl["oracle_mismatches"] = l.oracle_mismatches;
    io::json stats = io::json::object();
    stats["depth"] = l.stats.depth;
    stats["width"] = l.stats.width;
    stats["parameter_count"] = l.stats.parameter_count;
    stats["max_abs_weight"] = l.stats.max_abs_weight.str();
    jl["stats"] = std::move(stats);
    io::json ws = io::json::array();
    for (const Witness& w : l.witnesses) {
      io::json jw = io::json::object();
      jw["point"] = io::json::array({w.point.x.str(), w.point.y.str()});
      jw["detail"] = w.detail;
      ws.push_back(std::move(jw));
    }
    jl["witnesses"] = std::move(ws);
    levels.push_back(std::move(jl));
  }
  j["levels"] = std::move(levels);
  io::json suites = io::json::array();
  for (const SuiteResult& s : r.suites) {
    io::json js = io::json::object();
    js["name"] = s.name;
    js["checks"] = s.checks;
    js["failures"] = s.failures;
    js["witnesses"] = s.witnesses;
    suites.push_back(std::move(js));
  }
  j["suites"] = std::move(suites);
  if (!r.timings.empty()) {
    io::json t = io::json::object();
    for (const auto& [name, seconds] : r.timings) t[name] = seconds;
    j["timings"] = std::move(t);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Deterministic sampling

namespace detail {

constexpr std::size_t kWitnessCap = 8;

inline Rational rand_unit(std::mt19937_64& rng, unsigned den_pow = 20) {
  const std::uint64_t den = std::uint64_t{1} << den_pow;
  return Rational(static_cast<std::int64_t>(rng() % (den + 1)),
                  static_cast<std::int64_t>(den));
}

inline Rational rand_in(std::mt19937_64& rng, const Rational& lo,
                        const Rational& hi, unsigned den_pow = 20) {
  return lo + (hi - lo) * rand_unit(rng, den_pow);
}

// All sample points of one level, in the canonical family order.
inline std::vector<cpwl::Vec2> sample_points(const VerificationPlan& plan,
                                             unsigned n) {
  const SampleSpec& s = plan.samples;
  const Rational l1(plan.window.L1), l2(plan.window.L2);
  std::vector<cpwl::Vec2> pts;

  // Family 1: the dyadic grid of level n + offset, optionally strided.
  {
    const std::int64_t level =
        std::max<std::int64_t>(0, n + s.grid_level_offset);
    const Rational h = pow2(-static_cast<int>(level));
    const auto axis = [&](std::int64_t len) {
      const std::int64_t total = len * (std::int64_t{1} << level) + 1;
      std::vector<std::int64_t> ks;
      if (s.grid_max_per_axis == 0 ||
          total <= static_cast<std::int64_t>(s.grid_max_per_axis)) {
        for (std::int64_t k = 0; k < total; ++k) ks.push_back(k);
      } else {
        const std::int64_t m = s.grid_max_per_axis;
        std::int64_t prev = -1;
        for (std::int64_t i = 0; i < m; ++i) {
          const std::int64_t k = i * (total - 1) / (m - 1);
          if (k != prev) ks.push_back(k);
          prev = k;
        }
      }
      return ks;
    };
    for (std::int64_t kx : axis(plan.window.L1)) {
      for (std::int64_t ky : axis(plan.window.L2)) {
        pts.push_back({Rational(kx) * h, Rational(ky) * h});
      }
    }
  }

  std::mt19937_64 rng(s.rng_seed ^ (0x9e3779b97f4a7c15ull * (n + 1)));

  // Family 2: uniform random rationals with denominators <= 2^20.
  for (std::uint32_t i = 0; i < s.random_count; ++i) {
    pts.push_back({rand_in(rng, Rational(0), l1), rand_in(rng, Rational(0), l2)});
  }

  // Family 3: points on dyadic grid lines (the singular set of the iterate):
  // one coordinate is k/2^m at a modest level m, the other is random.
  for (std::uint32_t i = 0; i < s.dyadic_line_count; ++i) {
    const unsigned m = 1 + static_cast<unsigned>(rng() % (n + 2));
    const std::int64_t cells = std::int64_t{1} << m;
    const auto dyadic = [&](std::int64_t len) {
      return Rational(static_cast<std::int64_t>(
                          rng() % static_cast<std::uint64_t>(len * cells + 1)),
                      cells);
    };
    if (i % 2 == 0) {
      pts.push_back({dyadic(plan.window.L1), rand_in(rng, Rational(0), l2)});
    } else {
      pts.push_back({rand_in(rng, Rational(0), l1), dyadic(plan.window.L2)});
    }
  }

  // Family 4: seam-orbit points. The local x-coordinate is built so that its
  // stage-(j-1) residual lands inside the transition set J_n.
  {
    const Rational dn = plan.params.selector_params(n).delta_n();
    for (std::uint32_t i = 0; i < s.seam_orbit_count; ++i) {
      const unsigned j = 1 + static_cast<unsigned>(rng() % std::max(n, 1u));
      Rational t = dn * Rational(static_cast<std::int64_t>(rng() % 65), 64);
      if (rng() % 2 == 1) t += Rational(1, 2);
      const std::int64_t scale = std::int64_t{1} << (j - 1);
      const Rational local =
          (t + Rational(static_cast<std::int64_t>(
               rng() % static_cast<std::uint64_t>(scale)))) /
          Rational(scale);
      const Rational base(static_cast<std::int64_t>(
          rng() % static_cast<std::uint64_t>(plan.window.L1)));
      if (i % 2 == 0) {
        pts.push_back({base + local, rand_in(rng, Rational(0), l2)});
      } else {
        pts.push_back({rand_in(rng, Rational(0), l1), base + local});
      }
    }
  }

  // Family 5: window-boundary points.
  for (std::uint32_t i = 0; i < s.boundary_count; ++i) {
    switch (rng() % 4) {
      case 0: pts.push_back({Rational(0), rand_in(rng, Rational(0), l2)}); break;
      case 1: pts.push_back({l1, rand_in(rng, Rational(0), l2)}); break;
      case 2: pts.push_back({rand_in(rng, Rational(0), l1), Rational(0)}); break;
      default: pts.push_back({rand_in(rng, Rational(0), l1), l2}); break;
    }
  }

  // Family 6: points strictly outside the window (realization must be 0).
  for (std::uint32_t i = 0; i < s.outside_count; ++i) {
    const Rational off(1 + static_cast<std::int64_t>(rng() % 1024), 1024);
    switch (rng() % 4) {
      case 0:
        pts.push_back({-off, rand_in(rng, Rational(-1), l2 + Rational(1))});
        break;
      case 1:
        pts.push_back({l1 + off, rand_in(rng, Rational(-1), l2 + Rational(1))});
        break;
      case 2:
        pts.push_back({rand_in(rng, Rational(-1), l1 + Rational(1)), -off});
        break;
      default:
        pts.push_back({rand_in(rng, Rational(-1), l1 + Rational(1)), l2 + off});
        break;
    }
  }
  return pts;
}

// Runs body(i) for i in [0, count), possibly on several threads. Slots are
// disjoint, so the result is independent of the schedule.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& body) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(hw, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count;
           i = next.fetch_add(1)) {
        body(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

struct PointOutcome {
  bool mismatch = false;
  bool oracle_pair = false;
  bool oracle_mismatch = false;
  std::string detail;
};

inline void add_witness(std::vector<Witness>& ws, const cpwl::Vec2& p,
                        const std::string& detail) {
  if (ws.size() < kWitnessCap) ws.push_back({p, detail});
}

inline void add_suite_witness(SuiteResult& s, const std::string& detail) {
  ++s.failures;
  if (s.witnesses.size() < kWitnessCap) s.witnesses.push_back(detail);
}

// A pyramid bump with apex 1 at (cx, cy) and a square rim of half-width r.
inline cpwl::CpwlFunction2D suite_pyramid(const Rational& cx,
                                          const Rational& cy,
                                          const Rational& r) {
  const std::vector<cpwl::Vec2> verts = {{cx, cy},
                                         {cx - r, cy - r},
                                         {cx + r, cy - r},
                                         {cx + r, cy + r},
                                         {cx - r, cy + r}};
  const std::vector<cpwl::Tri> tris = {
      {0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 1}};
  const std::vector<Rational> vals = {Rational(1), Rational(0), Rational(0),
                                      Rational(0), Rational(0)};
  return {cpwl::CpwlMesh(verts, tris, vals), Rational(0)};
}

// A pyramid that is a valid special atom for any 0 < rho < 1/2: apex at the
// center of the unit square, rim halfway between the support bound and the
// center.
inline cpwl::CpwlFunction2D suite_atom(const assembler::CascadeParams& params) {
  const Rational r =
      min(Rational(1, 8), (Rational(1) - Rational(2) * params.rho) / 4);
  return suite_pyramid(Rational(1, 2), Rational(1, 2), r);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Property suites. Each suite re-derives its reference values from the
// mathematical definitions (traces, meshes, orbits), never from the network
// code under test.

namespace detail {

inline SuiteResult controller_suite(const VerificationPlan& plan) {
  SuiteResult out{"controller", 0, 0, {}};
  const controller::ControllerParams cp = plan.params.controller_params();
  cp.check();
  const ir::ReluNetwork f_net = controller::build_F_net();
  const ir::ReluNetwork step_net = controller::build_step_net();
  std::mt19937_64 rng(plan.samples.rng_seed ^ io::fnv1a64("controller"));
  const unsigned kmax = plan.samples.controller_iterations;

  // F-net iterates reproduce the loop conjugation E(r^k t) for k <= kmax.
  const std::uint32_t singles = plan.samples.suite_random_count;
  for (std::uint32_t i = 0; i < singles; ++i) {
    const Rational t = rand_unit(rng);
    const auto orbit = dyadic::orbit_2d({t, t}, kmax);
    const cpwl::Vec2 e0 = controller::loop_E(t);
    std::vector<Rational> state = {e0.x, e0.y};
    for (unsigned k = 1; k <= kmax; ++k) {
      state = ir::eval_exact(f_net, state);
      const Rational rk = k < kmax ? orbit.residuals[k].first
                                   : orbit.terminal.first;
      const cpwl::Vec2 want = controller::loop_E(rk);
      ++out.checks;
      if (state[0] != want.x || state[1] != want.y) {
        add_suite_witness(out, "F iterate k=" + std::to_string(k) +
                                   " diverges at t = " + t.str());
      }
    }
  }

  // Torus version: the 4 -> 4 step net advances both coordinates at once.
  for (std::uint32_t i = 0; i < singles; ++i) {
    const Rational t1 = rand_unit(rng);
    const Rational t2 = rand_unit(rng);
    const auto orbit = dyadic::orbit_2d({t1, t2}, 8);
    const cpwl::Vec2 e1 = controller::loop_E(t1);
    const cpwl::Vec2 e2 = controller::loop_E(t2);
    std::vector<Rational> state = {e1.x, e1.y, e2.x, e2.y};
    for (unsigned k = 1; k <= 8; ++k) {
      state = ir::eval_exact(step_net, state);
      const dyadic::Point rk =
          k < 8 ? orbit.residuals[k] : orbit.terminal;
      const cpwl::Vec2 w1 = controller::loop_E(rk.first);
      const cpwl::Vec2 w2 = controller::loop_E(rk.second);
      ++out.checks;
      if (state[0] != w1.x || state[1] != w1.y || state[2] != w2.x ||
          state[3] != w2.y) {
        add_suite_witness(out, "torus step k=" + std::to_string(k) +
                                   " diverges at (" + t1.str() + ", " +
                                   t2.str() + ")");
      }
    }
  }
  return out;
}

inline SuiteResult readouts_suite(const VerificationPlan& plan) {
  SuiteResult out{"readouts", 0, 0, {}};
  const controller::ControllerParams cp = plan.params.controller_params();
  const auto readouts = controller::build_readouts(cp);
  std::mt19937_64 rng(plan.samples.rng_seed ^ io::fnv1a64("readouts"));
  const Rational eps = cp.eps_bar;

  // rho^- inverts E on [eps_bar, 1], rho^+ on [0, 1 - eps_bar]; both stay
  // inside their stated ranges everywhere on the loop.
  for (std::uint32_t i = 0; i < plan.samples.suite_random_count; ++i) {
    const Rational t = rand_unit(rng);
    const cpwl::Vec2 e = controller::loop_E(t);
    const Rational minus = ir::eval_exact(readouts.first, {e.x, e.y})[0];
    const Rational plus = ir::eval_exact(readouts.second, {e.x, e.y})[0];
    ++out.checks;
    if (minus < eps || minus > Rational(1) || plus < Rational(0) ||
        plus > Rational(1) - eps) {
      add_suite_witness(out, "readout range violated at t = " + t.str());
    }
    if (t >= eps) {
      ++out.checks;
      if (minus != t) {
        add_suite_witness(out, "rho^- fails to invert E at t = " + t.str());
      }
    }
    if (t <= Rational(1) - eps) {
      ++out.checks;
      if (plus != t) {
        add_suite_witness(out, "rho^+ fails to invert E at t = " + t.str());
      }
    }
  }

  // Four-branch scalar readout equals H(R_n) on the level-(n+2) grid and at
  // random points, seam and dyadic points included.
  const cpwl::CpwlFunction2D atom = suite_atom(plan.params);
  for (unsigned n = 1; n <= plan.samples.hreadout_max_n; ++n) {
    const ir::ReluNetwork h_net = controller::build_H_readout(atom, cp, n);
    std::vector<cpwl::Vec2> pts;
    const std::int64_t cells = std::int64_t{1} << (n + 2);
    for (std::int64_t kx = 0; kx <= cells; ++kx) {
      for (std::int64_t ky = 0; ky <= cells; ++ky) {
        pts.push_back({Rational(kx, cells), Rational(ky, cells)});
      }
    }
    for (std::uint32_t i = 0; i < plan.samples.suite_random_count; ++i) {
      pts.push_back({rand_unit(rng), rand_unit(rng)});
    }
    std::vector<std::uint8_t> bad(pts.size(), 0);
    parallel_for(pts.size(), [&](std::size_t i) {
      const cpwl::Vec2& p = pts[i];
      const dyadic::Point rn = dyadic::residual_n({p.x, p.y}, n);
      const Rational want =
          cpwl::eval_mesh(atom, {rn.first, rn.second});
      const Rational got = ir::eval_exact(h_net, {p.x, p.y})[0];
      if (got != want) bad[i] = 1;
    });
    for (std::size_t i = 0; i < pts.size(); ++i) {
      ++out.checks;
      if (bad[i]) {
        add_suite_witness(out, "H readout n=" + std::to_string(n) +
                                   " mismatch at (" + pts[i].x.str() + ", " +
                                   pts[i].y.str() + ")");
      }
    }
  }
  return out;
}

inline SuiteResult selectors_suite(const VerificationPlan& plan) {
  SuiteResult out{"selectors", 0, 0, {}};
  unsigned max_n = 2;
  for (unsigned n : plan.n_values) max_n = std::max(max_n, n);
  max_n = std::max(max_n, plan.samples.hreadout_max_n);

  std::vector<Rational> prev_weight(2);
  for (unsigned n = 0; n <= max_n; ++n) {
    const gadgets::SelectorParams sp = plan.params.selector_params(n);
    const Rational dn = sp.delta_n();
    for (int q = 0; q <= 1; ++q) {
      const ir::ReluNetwork net = gadgets::build_selector(q, sp);
      // Exactness on the loop: dense dyadic grid plus the breakpoints.
      std::vector<Rational> ts;
      const std::int64_t cells = 256;
      for (std::int64_t k = 0; k <= cells; ++k) {
        ts.push_back(Rational(k, cells));
      }
      ts.push_back(dn);
      ts.push_back(Rational(1, 2) + dn);
      ts.push_back(dn / 2);
      ts.push_back(Rational(1, 2) + dn / 2);
      for (const Rational& t : ts) {
        const cpwl::Vec2 e = controller::loop_E(t);
        const Rational got = ir::eval_exact(net, {e.x, e.y})[0];
        const Rational want = gadgets::selector_trace(t, dn, q);
        ++out.checks;
        if (got != want) {
          add_suite_witness(out, "selector chi_" + std::to_string(q) +
                                     " n=" + std::to_string(n) +
                                     " mismatch at t = " + t.str());
        }
      }
      // Weight doubling per unit n once the ramp slope dominates.
      const Rational w = net.stats().max_abs_weight;
      if (n >= 2) {
        ++out.checks;
        if (w != Rational(2) * prev_weight[q]) {
          add_suite_witness(out,
                            "selector chi_" + std::to_string(q) + " weight at n=" +
                                std::to_string(n) + " is not twice n=" +
                                std::to_string(n - 1));
        }
      }
      prev_weight[q] = w;
    }
  }
  return out;
}

inline SuiteResult gadget_suite(const VerificationPlan& plan) {
  SuiteResult out{"gadget", 0, 0, {}};
  (void)plan;
  const std::vector<Rational> scales = {Rational(1), Rational(5, 2),
                                        Rational(3)};
  for (const Rational& a : scales) {
    const ir::ReluNetwork net = gadgets::product_gadget(a, 2);
    // Binary gate: exact annihilation at lambda = 0 and exact passthrough
    // at lambda = 1, over a grid of bounded state vectors.
    for (int i = -8; i <= 8; ++i) {
      for (int j = -8; j <= 8; ++j) {
        const Rational y1 = a * Rational(i, 8);
        const Rational y2 = a * Rational(j, 8);
        const auto at0 = ir::eval_exact(net, {Rational(0), y1, y2});
        const auto at1 = ir::eval_exact(net, {Rational(1), y1, y2});
        ++out.checks;
        if (!at0[0].is_zero() || !at0[1].is_zero()) {
          add_suite_witness(out, "gate fails to annihilate at a = " + a.str());
        }
        ++out.checks;
        if (at1[0] != y1 || at1[1] != y2) {
          add_suite_witness(out, "gate fails to pass through at a = " + a.str());
        }
      }
    }
    // Zero state maps to zero for every intermediate gate value.
    for (int k = 0; k <= 16; ++k) {
      const Rational lam(k, 16);
      const auto v = ir::eval_exact(net, {lam, Rational(0), Rational(0)});
      ++out.checks;
      if (!v[0].is_zero() || !v[1].is_zero()) {
        add_suite_witness(out, "gate breaks zero state at lambda = " + lam.str());
      }
    }
  }
  return out;
}

inline SuiteResult gluing_suite(const VerificationPlan& plan) {
  SuiteResult out{"gluing", 0, 0, {}};
  const refinement::TransitionMatrices tm =
      refinement::transition_matrices(plan.mask, plan.window);
  const cpwl::CpwlFunction2D atom = suite_atom(plan.params);
  unsigned n = 1;
  for (unsigned v : plan.n_values) {
    if (v >= 1) {
      n = std::min<unsigned>(std::max(v, 1u), 2);
      break;
    }
  }
  const ir::ReluNetwork vec =
      assembler::build_unit_square(atom, tm, plan.params, n);
  const ir::ReluNetwork glued = assembler::build_glue(vec, plan.window);
  const refinement::PatchIndexing pi(plan.window);
  std::mt19937_64 rng(plan.samples.rng_seed ^ io::fnv1a64("gluing"));
  const Rational l1(plan.window.L1), l2(plan.window.L2);

  // Inside: the glued scalar equals the patch value at the localization.
  for (std::uint32_t i = 0; i < plan.samples.suite_random_count; ++i) {
    const cpwl::Vec2 p = {rand_in(rng, Rational(0), l1),
                          rand_in(rng, Rational(0), l2)};
    const refinement::Localization loc = refinement::localize(plan.window, p);
    const Rational want =
        ir::eval_exact(vec, {loc.z.x, loc.z.y})[pi.index(loc.a, loc.b)];
    const Rational got = ir::eval_exact(glued, {p.x, p.y})[0];
    ++out.checks;
    if (got != want) {
      add_suite_witness(out, "glue mismatch at (" + p.x.str() + ", " +
                                 p.y.str() + ")");
    }
  }
  // Outside: exactly zero.
  for (std::uint32_t i = 0; i < 50; ++i) {
    const Rational off(1 + static_cast<std::int64_t>(rng() % 512), 512);
    cpwl::Vec2 p;
    switch (rng() % 4) {
      case 0: p = {-off, rand_in(rng, Rational(-1), l2 + Rational(1))}; break;
      case 1: p = {l1 + off, rand_in(rng, Rational(-1), l2 + Rational(1))}; break;
      case 2: p = {rand_in(rng, Rational(-1), l1 + Rational(1)), -off}; break;
      default: p = {rand_in(rng, Rational(-1), l1 + Rational(1)), l2 + off}; break;
    }
    ++out.checks;
    if (!ir::eval_exact(glued, {p.x, p.y})[0].is_zero()) {
      add_suite_witness(out, "glue nonzero outside at (" + p.x.str() + ", " +
                                 p.y.str() + ")");
    }
  }
  return out;
}

inline SuiteResult decomposition_suite(const VerificationPlan& plan) {
  SuiteResult out{"decomposition", 0, 0, {}};

  // Exact reconstruction of the plan seed from its atoms.
  const decomposition::AtomDecomposition dec =
      decomposition::decompose(plan.seed, plan.params.rho);
  const decomposition::DecompositionReport rec =
      decomposition::verify_decomposition(dec, plan.seed);
  out.checks += rec.points_checked;
  if (!rec.pass) {
    for (const std::string& f : rec.failures) {
      add_suite_witness(out, f);
      if (out.witnesses.size() >= kWitnessCap) break;
    }
    out.failures = std::max<std::uint64_t>(out.failures, 1);
  }

  // Translation covariance of the realization: the shifted seed compiles
  // to the 2^{-n}-shifted function.
  unsigned max_n = 1;
  for (unsigned v : plan.n_values) max_n = std::max(max_n, v);
  const unsigned n = std::min(plan.samples.covariance_n, max_n);
  const cpwl::CpwlFunction2D atom = suite_atom(plan.params);
  const Rational dx(1, 4), dy(1, 8);
  const Rational r =
      min(Rational(1, 8), (Rational(1) - Rational(2) * plan.params.rho) / 4);
  const cpwl::CpwlFunction2D shifted =
      suite_pyramid(Rational(1, 2) + dx, Rational(1, 2) + dy, r);
  const assembler::CompiledRealization base = assembler::build_seed_net(
      atom, plan.mask, plan.window, plan.params, n);
  const assembler::CompiledRealization moved = assembler::build_seed_net(
      shifted, plan.mask, plan.window, plan.params, n);
  const Rational sx = dx * pow2(-static_cast<int>(n));
  const Rational sy = dy * pow2(-static_cast<int>(n));
  std::mt19937_64 rng(plan.samples.rng_seed ^ io::fnv1a64("decomposition"));
  const Rational l1(plan.window.L1), l2(plan.window.L2);
  std::vector<cpwl::Vec2> pts;
  for (std::uint32_t i = 0; i < plan.samples.covariance_count; ++i) {
    pts.push_back({rand_in(rng, Rational(0), l1),
                   rand_in(rng, Rational(0), l2)});
  }
  std::vector<std::uint8_t> bad(pts.size(), 0);
  parallel_for(pts.size(), [&](std::size_t i) {
    const cpwl::Vec2& p = pts[i];
    const Rational lhs = ir::eval_exact(moved.network, {p.x, p.y})[0];
    const Rational rhs =
        ir::eval_exact(base.network, {p.x - sx, p.y - sy})[0];
    if (lhs != rhs) bad[i] = 1;
  });
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ++out.checks;
    if (bad[i]) {
      add_suite_witness(out, "covariance mismatch at (" + pts[i].x.str() +
                                 ", " + pts[i].y.str() + ")");
    }
  }
  return out;
}

inline SuiteResult boundary_localization_suite(const VerificationPlan& plan) {
  SuiteResult out{"boundary_localization", 0, 0, {}};
  unsigned n = 4;
  for (unsigned v : plan.n_values) n = std::max(n, std::min(v, 6u));
  const Rational dn = plan.params.selector_params(n).delta_n();
  const cpwl::CpwlFunction2D atom = suite_atom(plan.params);
  std::mt19937_64 rng(plan.samples.rng_seed ^
                      io::fnv1a64("boundary_localization"));

  for (std::uint32_t i = 0; i < plan.samples.suite_random_count; ++i) {
    // Construct a point whose stage-(j-1) residual enters J_n.
    const unsigned j = 1 + static_cast<unsigned>(rng() % n);
    Rational t = dn * Rational(static_cast<std::int64_t>(rng() % 65), 64);
    if (rng() % 2 == 1) t += Rational(1, 2);
    const std::int64_t scale = std::int64_t{1} << (j - 1);
    const Rational x =
        (t + Rational(static_cast<std::int64_t>(
             rng() % static_cast<std::uint64_t>(scale)))) /
        Rational(scale);
    const Rational y = rand_unit(rng);
    const auto stage = dyadic::bad_orbit_stage({x, y}, n, dn);
    ++out.checks;
    if (!stage.has_value()) {
      add_suite_witness(out, "constructed orbit is not bad at x = " + x.str());
      continue;
    }
    // The seed factor vanishes exactly on bad orbits.
    const dyadic::Point rn = dyadic::residual_n({x, y}, n);
    ++out.checks;
    if (!cpwl::eval_mesh(atom, {rn.first, rn.second}).is_zero()) {
      add_suite_witness(out, "H(R_n) != 0 on a bad orbit at x = " + x.str());
    }
    // Quantitative localization: once a coordinate enters J_n at stage j,
    // its terminal residual lies in [0, delta_bar * rho * 2^{1-j}].
    const auto orbit = dyadic::orbit_2d({x, y}, n);
    const unsigned hit = *stage;
    const dyadic::Point& rj = orbit.residuals[hit - 1];
    const Rational bound = plan.params.delta_bar * plan.params.rho *
                           pow2(1 - static_cast<int>(hit));
    for (int coord = 0; coord < 2; ++coord) {
      const Rational& rc = coord == 0 ? rj.first : rj.second;
      if (!dyadic::in_transition_set(rc, dn)) continue;
      const Rational& terminal = coord == 0 ? rn.first : rn.second;
      ++out.checks;
      if (terminal < Rational(0) || terminal > bound) {
        add_suite_witness(out, "residual bound violated at (" + x.str() +
                                   ", " + y.str() + ")");
      }
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// run_verification

inline VerificationReport run_verification(const VerificationPlan& plan) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  const auto seconds_since = [](clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };

  plan.window.check();
  plan.params.check();
  if (plan.n_values.empty()) {
    throw DomainError("verification plan: n_values must be nonempty");
  }
  // Window certificate: throws if the mask does not preserve the window.
  const refinement::TransitionMatrices tm =
      refinement::transition_matrices(plan.mask, plan.window);
  const refinement::PatchIndexing pi(plan.window);
  const refinement::VectorizedSeed vseed(plan.seed, plan.window);

  VerificationReport report;
  report.plan_fp = plan_fingerprint(plan);

  const Rational l1(plan.window.L1), l2(plan.window.L2);
  for (unsigned n : plan.n_values) {
    LevelReport level;
    level.n = n;

    const auto t_compile = clock::now();
    const refinement::Mask& build_mask =
        plan.compile_mask.has_value() ? *plan.compile_mask : plan.mask;
    const assembler::CompiledRealization cr = assembler::build_seed_net(
        plan.seed, build_mask, plan.window, plan.params, n);
    if (plan.record_timings) {
      report.timings.emplace_back("compile n=" + std::to_string(n),
                                  seconds_since(t_compile));
    }
    level.stats = cr.stats;

    const std::vector<cpwl::Vec2> pts = detail::sample_points(plan, n);
    std::vector<detail::PointOutcome> outcomes(pts.size());
    const bool use_direct = n <= plan.direct_oracle_cap;

    const auto t_points = clock::now();
    detail::parallel_for(pts.size(), [&](std::size_t i) {
      detail::PointOutcome& o = outcomes[i];
      try {
        const cpwl::Vec2& p = pts[i];
        const bool inside = p.x.sign() >= 0 && p.y.sign() >= 0 &&
                            p.x <= l1 && p.y <= l2;
        const Rational got = ir::eval_exact(cr.network, {p.x, p.y})[0];
        Rational want;
        std::optional<Rational> cascade_val;
        if (inside) {
          const refinement::Localization loc =
              refinement::localize(plan.window, p);
          const std::vector<Rational> state =
              refinement::oracle_cascade(vseed, tm, n, loc.z);
          cascade_val = state[pi.index(loc.a, loc.b)];
        }
        if (use_direct) {
          want = refinement::oracle_direct(plan.seed, plan.mask, n, p);
          if (cascade_val.has_value()) {
            o.oracle_pair = true;
            if (*cascade_val != want) {
              o.oracle_mismatch = true;
              o.detail = "oracle_direct = " + want.str() +
                         " vs oracle_cascade = " + cascade_val->str();
            }
          }
        } else {
          want = cascade_val.has_value() ? *cascade_val : Rational(0);
        }
        if (got != want) {
          o.mismatch = true;
          if (o.detail.empty()) {
            o.detail = "network = " + got.str() + " vs oracle = " + want.str();
          }
        }
      } catch (const std::exception& e) {
        o.mismatch = true;
        o.detail = std::string("evaluation error: ") + e.what();
      }
    });
    if (plan.record_timings) {
      report.timings.emplace_back("points n=" + std::to_string(n),
                                  seconds_since(t_points));
    }

    // Sequential merge in canonical point order.
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const detail::PointOutcome& o = outcomes[i];
      ++level.points_checked;
      if (o.oracle_pair) ++level.oracle_pairs_checked;
      if (o.oracle_mismatch) ++level.oracle_mismatches;
      if (o.mismatch || o.oracle_mismatch) {
        if (o.mismatch) ++level.mismatches;
        detail::add_witness(level.witnesses, pts[i], o.detail);
      }
    }
    report.levels.push_back(std::move(level));
  }

  // Structural fits across levels.
  {
    std::vector<std::pair<unsigned, std::uint32_t>> widths, depths;
    for (const LevelReport& l : report.levels) {
      if (l.n >= 2) widths.emplace_back(l.n, l.stats.width);
      if (l.n >= 1) depths.emplace_back(l.n, l.stats.depth);
    }
    for (const auto& [n, wdt] : widths) {
      if (wdt != widths.front().second) report.width_constant = false;
    }
    std::sort(depths.begin(), depths.end());
    depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
    if (depths.size() >= 2) {
      const Rational c1(
          static_cast<std::int64_t>(depths.back().second) -
              static_cast<std::int64_t>(depths.front().second),
          static_cast<std::int64_t>(depths.back().first) -
              static_cast<std::int64_t>(depths.front().first));
      const Rational c0 = Rational(depths.front().second) -
                          c1 * Rational(depths.front().first);
      for (const auto& [n, d] : depths) {
        if (Rational(d) != c1 * Rational(n) + c0) report.depth_affine = false;
      }
      report.depth_fit =
          "depth(n) = " + c1.str() + "*n + " + c0.str();
    } else {
      report.depth_fit = "insufficient levels for a fit";
    }
  }

  // Module property suites.
  const auto run_suite = [&](SuiteResult (*suite)(const VerificationPlan&),
                             const char* name) {
    const auto t0 = clock::now();
    report.suites.push_back(suite(plan));
    if (plan.record_timings) {
      report.timings.emplace_back(std::string("suite ") + name,
                                  seconds_since(t0));
    }
  };
  run_suite(&detail::controller_suite, "controller");
  run_suite(&detail::readouts_suite, "readouts");
  run_suite(&detail::selectors_suite, "selectors");
  run_suite(&detail::gadget_suite, "gadget");
  run_suite(&detail::gluing_suite, "gluing");
  run_suite(&detail::decomposition_suite, "decomposition");
  run_suite(&detail::boundary_localization_suite, "boundary_localization");

  for (const LevelReport& l : report.levels) {
    report.total_mismatches += l.mismatches + l.oracle_mismatches;
  }
  bool suites_pass = true;
  for (const SuiteResult& s : report.suites) {
    if (s.failures != 0) suites_pass = false;
  }
  report.pass = report.total_mismatches == 0 && suites_pass &&
                report.width_constant && report.depth_affine;
  if (plan.record_timings) {
    report.timings.emplace_back("total", seconds_since(t_start));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Rendering

struct RenderRegion {
  Rational x0, y0, x1, y1;
};

// Row-major heatmap: row 0 is the TOP of the image (y = y1), column 0 is
// x = x0; sample (i, j) sits at (x0 + i*(x1-x0)/(W-1), y1 - j*(y1-y0)/(H-1)).
struct Heatmap {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<Rational> values;  // width * height, row-major from the top
  Rational min_value, max_value;
};

inline Heatmap sample_heatmap(
    const std::function<Rational(const cpwl::Vec2&)>& fn,
    const RenderRegion& region, std::uint32_t width, std::uint32_t height) {
  if (width < 2 || height < 2) {
    throw DomainError("render: resolution must be at least 2x2");
  }
  if (region.x1 <= region.x0 || region.y1 <= region.y0) {
    throw DomainError("render: degenerate region");
  }
  Heatmap hm;
  hm.width = width;
  hm.height = height;
  hm.values.resize(std::size_t{width} * height);
  const Rational dx = (region.x1 - region.x0) / Rational(width - 1);
  const Rational dy = (region.y1 - region.y0) / Rational(height - 1);
  detail::parallel_for(hm.values.size(), [&](std::size_t idx) {
    const std::uint32_t i = static_cast<std::uint32_t>(idx % width);
    const std::uint32_t j = static_cast<std::uint32_t>(idx / width);
    const cpwl::Vec2 p = {region.x0 + dx * Rational(i),
                          region.y1 - dy * Rational(j)};
    hm.values[idx] = fn(p);
  });
  hm.min_value = hm.values.front();
  hm.max_value = hm.values.front();
  for (const Rational& v : hm.values) {
    hm.min_value = min(hm.min_value, v);
    hm.max_value = max(hm.max_value, v);
  }
  return hm;
}

// Binary PGM (P5, maxval 255). Normalization: byte = round(255 * (v - min)
// / (max - min)) in float64; a constant image renders as all zeros.
inline std::string heatmap_to_pgm(const Heatmap& hm) {
  std::string out = "P5\n" + std::to_string(hm.width) + " " +
                    std::to_string(hm.height) + "\n255\n";
  const Rational span = hm.max_value - hm.min_value;
  const double denom = span.to_double();
  for (const Rational& v : hm.values) {
    long byte = 0;
    if (!span.is_zero()) {
      const double t = (v - hm.min_value).to_double() / denom;
      byte = std::lround(255.0 * t);
      byte = std::max(0l, std::min(255l, byte));
    }
    out.push_back(static_cast<char>(static_cast<unsigned char>(byte)));
  }
  return out;
}

// CSV of the exact rational samples, one row per pixel in image order.
inline std::string heatmap_to_csv(const Heatmap& hm,
                                  const RenderRegion& region) {
  std::string out = "x,y,value\n";
  const Rational dx = (region.x1 - region.x0) / Rational(hm.width - 1);
  const Rational dy = (region.y1 - region.y0) / Rational(hm.height - 1);
  for (std::uint32_t j = 0; j < hm.height; ++j) {
    for (std::uint32_t i = 0; i < hm.width; ++i) {
      const Rational x = region.x0 + dx * Rational(i);
      const Rational y = region.y1 - dy * Rational(j);
      out += x.str();
      out.push_back(',');
      out += y.str();
      out.push_back(',');
      out += hm.values[std::size_t{j} * hm.width + i].str();
      out.push_back('\n');
    }
  }
  return out;
}

// Adapters for the two render sources.
inline std::function<Rational(const cpwl::Vec2&)> net_function(
    ir::ReluNetwork net) {
  if (net.input_dim() != 2 || net.output_dim() != 1) {
    throw DomainError("render: network must map 2 -> 1");
  }
  auto shared = std::make_shared<ir::ReluNetwork>(std::move(net));
  return [shared](const cpwl::Vec2& p) {
    return ir::eval_exact(*shared, {p.x, p.y})[0];
  };
}

inline std::function<Rational(const cpwl::Vec2&)> oracle_function(
    const cpwl::CpwlFunction2D& seed, const refinement::Mask& mask,
    unsigned n) {
  auto oracle = std::make_shared<refinement::DirectOracle>(seed, mask);
  return [oracle, n](const cpwl::Vec2& p) { return oracle->eval(n, p); };
}

}  // namespace verify
}  // namespace cascade

#endif  // CASCADE_VERIFY_HPP
