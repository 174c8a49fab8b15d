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
// cascadec: compiles dyadic refinement specifications into exact ReLU
// networks and verifies them against brute-force oracles.
//
// Subcommands:
//   compile      mask + seed + window + depth  ->  network JSON
//   verify       verification plan             ->  report JSON (exit 0 iff pass)
//   oracle-eval  evaluate a reference oracle at one rational point
//   decompose    seed                          ->  atom-list JSON
//   stats        network JSON                  ->  size statistics
//   render       network or oracle             ->  PGM heatmap + exact CSV
//
// All numeric I/O uses exact "p/q" strings; images are the only binary
// output.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cascade/assembler.hpp"
#include "cascade/decomposition.hpp"
#include "cascade/refinement.hpp"
#include "cascade/serialize.hpp"
#include "cascade/verify.hpp"

namespace {

using cascade::Rational;
using json = cascade::io::json;

cascade::cpwl::Vec2 parse_point(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw cascade::ParseError("point must be \"p/q,p/q\": " + text);
  }
  return {Rational::parse(text.substr(0, comma)),
          Rational::parse(text.substr(comma + 1))};
}

cascade::assembler::CascadeParams parse_params(const std::string& rho,
                                               const std::string& eps_bar,
                                               const std::string& delta_bar) {
  cascade::assembler::CascadeParams params;
  if (!rho.empty()) params.rho = Rational::parse(rho);
  if (!eps_bar.empty()) params.eps_bar = Rational::parse(eps_bar);
  if (!delta_bar.empty()) params.delta_bar = Rational::parse(delta_bar);
  params.check();
  return params;
}

struct CompileArgs {
  std::string mask_path, seed_path, out_path;
  std::vector<std::int64_t> window;
  unsigned n = 0;
  std::string rho, eps_bar, delta_bar;
};

int run_compile(const CompileArgs& a) {
  const cascade::refinement::Mask mask = cascade::io::load_mask(a.mask_path);
  const cascade::cpwl::CpwlFunction2D seed =
      cascade::io::load_mesh(a.seed_path);
  const cascade::refinement::Window window{a.window[0], a.window[1]};
  const cascade::assembler::CascadeParams params =
      parse_params(a.rho, a.eps_bar, a.delta_bar);

  cascade::assembler::CompiledRealization cr =
      cascade::assembler::build_seed_net(seed, mask, window, params, a.n);
  auto& meta = cr.network.meta();
  meta["provenance_mask_hash"] = std::to_string(cr.provenance.mask_hash);
  meta["provenance_seed_hash"] = std::to_string(cr.provenance.seed_hash);
  meta["provenance_rho"] = cr.provenance.params.rho.str();
  meta["provenance_eps_bar"] = cr.provenance.params.eps_bar.str();
  meta["provenance_delta_bar"] = cr.provenance.params.delta_bar.str();
  cascade::io::save_network(cr.network, a.out_path);

  json out = cascade::io::stats_to_json(cr.network);
  out["atoms"] = cr.atoms;
  out["n"] = a.n;
  out["output"] = a.out_path;
  std::cout << cascade::io::canonical_dump(out);
  return 0;
}

struct VerifyArgs {
  std::string plan_path, out_path, emit_demo;
  bool timings = false;
};

int run_verify(const VerifyArgs& a) {
  if (!a.emit_demo.empty()) {
    cascade::io::write_text_file(
        a.emit_demo, cascade::io::canonical_dump(cascade::verify::plan_to_json(
                         cascade::verify::demo_plan())));
    std::cout << "wrote " << a.emit_demo << "\n";
    return 0;
  }
  if (a.plan_path.empty()) {
    throw cascade::DomainError("verify: --plan is required");
  }
  cascade::verify::VerificationPlan plan = cascade::verify::plan_from_json(
      json::parse(cascade::io::read_text_file(a.plan_path)));
  if (a.timings) plan.record_timings = true;
  const cascade::verify::VerificationReport report =
      cascade::verify::run_verification(plan);
  if (!a.out_path.empty()) {
    cascade::io::write_text_file(
        a.out_path,
        cascade::io::canonical_dump(cascade::verify::report_to_json(report)));
  }
  for (const auto& l : report.levels) {
    std::cout << "n=" << l.n << ": " << l.points_checked << " points, "
              << l.mismatches << " mismatches, " << l.oracle_pairs_checked
              << " oracle pairs, " << l.oracle_mismatches
              << " oracle mismatches (depth " << l.stats.depth << ", width "
              << l.stats.width << ")\n";
  }
  for (const auto& s : report.suites) {
    std::cout << "suite " << s.name << ": " << s.checks << " checks, "
              << s.failures << " failures\n";
  }
  std::cout << (report.width_constant ? "width constant across n >= 2\n"
                                      : "WIDTH NOT CONSTANT\n");
  std::cout << report.depth_fit
            << (report.depth_affine ? "" : "  (NOT AFFINE)") << "\n";
  std::cout << (report.pass ? "PASS" : "FAIL") << "\n";
  return report.pass ? 0 : 1;
}

struct OracleArgs {
  std::string mode, mask_path, seed_path, point;
  std::vector<std::int64_t> window;
  unsigned n = 0;
};

int run_oracle_eval(const OracleArgs& a) {
  const cascade::refinement::Mask mask = cascade::io::load_mask(a.mask_path);
  const cascade::cpwl::CpwlFunction2D seed =
      cascade::io::load_mesh(a.seed_path);
  const cascade::cpwl::Vec2 p = parse_point(a.point);

  json out = json::object();
  out["mode"] = a.mode;
  out["n"] = a.n;
  out["point"] = json::array({p.x.str(), p.y.str()});
  if (a.mode == "direct") {
    out["value"] =
        cascade::refinement::oracle_direct(seed, mask, a.n, p).str();
  } else {
    const cascade::refinement::Window window{a.window[0], a.window[1]};
    const cascade::refinement::TransitionMatrices tm =
        cascade::refinement::transition_matrices(mask, window);
    const cascade::refinement::Localization loc =
        cascade::refinement::localize(window, p);
    const std::vector<Rational> state =
        cascade::refinement::oracle_cascade(seed, tm, a.n, loc.z);
    const cascade::refinement::PatchIndexing pi(window);
    out["patch"] = json::array({loc.a, loc.b});
    out["z"] = json::array({loc.z.x.str(), loc.z.y.str()});
    json sj = json::array();
    for (const Rational& v : state) sj.push_back(v.str());
    out["state"] = std::move(sj);
    out["value"] = state[pi.index(loc.a, loc.b)].str();
  }
  std::cout << cascade::io::canonical_dump(out);
  return 0;
}

struct DecomposeArgs {
  std::string seed_path, out_path, rho;
};

int run_decompose(const DecomposeArgs& a) {
  const cascade::cpwl::CpwlFunction2D seed =
      cascade::io::load_mesh(a.seed_path);
  const Rational rho =
      a.rho.empty() ? Rational(1, 4) : Rational::parse(a.rho);
  const cascade::decomposition::AtomDecomposition dec =
      cascade::decomposition::decompose(seed, rho);
  const cascade::decomposition::DecompositionReport rep =
      cascade::decomposition::verify_decomposition(dec, seed);

  json out = json::object();
  out["rho"] = dec.rho.str();
  out["source_hash"] = std::to_string(dec.source_hash);
  out["refined_vertices"] = dec.refined_vertices;
  out["refined_triangles"] = dec.refined_triangles;
  out["reconstruction_pass"] = rep.pass;
  out["points_checked"] = rep.points_checked;
  json terms = json::array();
  for (const auto& t : dec.terms) {
    json jt = json::object();
    jt["coeff"] = t.coeff.str();
    jt["shift"] = json::array({t.shift.x.str(), t.shift.y.str()});
    jt["star_triangles"] = t.star_triangles;
    jt["support_lo"] = json::array({t.support_lo.x.str(), t.support_lo.y.str()});
    jt["support_hi"] = json::array({t.support_hi.x.str(), t.support_hi.y.str()});
    jt["atom"] = cascade::io::mesh_to_json(t.atom);
    terms.push_back(std::move(jt));
  }
  out["terms"] = std::move(terms);
  cascade::io::write_text_file(a.out_path, cascade::io::canonical_dump(out));

  std::cout << "atoms: " << dec.terms.size() << "\n"
            << "reconstruction: " << (rep.pass ? "PASS" : "FAIL") << " ("
            << rep.points_checked << " points)\n";
  return rep.pass ? 0 : 1;
}

int run_stats(const std::string& net_path) {
  const cascade::ir::ReluNetwork net = cascade::io::load_network(net_path);
  std::cout << cascade::io::canonical_dump(cascade::io::stats_to_json(net));
  return 0;
}

struct RenderArgs {
  std::string input, out_path, csv_path;
  std::vector<std::string> region;
  std::vector<std::uint32_t> res;
  std::string mask_path, seed_path;
  unsigned n = 0;
};

int run_render(const RenderArgs& a) {
  const cascade::verify::RenderRegion region{
      Rational::parse(a.region[0]), Rational::parse(a.region[1]),
      Rational::parse(a.region[2]), Rational::parse(a.region[3])};

  std::function<Rational(const cascade::cpwl::Vec2&)> fn;
  if (a.input == "oracle") {
    if (a.mask_path.empty() || a.seed_path.empty()) {
      throw cascade::DomainError(
          "render: --input oracle requires --mask and --seed");
    }
    fn = cascade::verify::oracle_function(
        cascade::io::load_mesh(a.seed_path),
        cascade::io::load_mask(a.mask_path), a.n);
  } else {
    fn = cascade::verify::net_function(cascade::io::load_network(a.input));
  }

  const cascade::verify::Heatmap hm =
      cascade::verify::sample_heatmap(fn, region, a.res[0], a.res[1]);
  cascade::io::write_text_file(a.out_path,
                               cascade::verify::heatmap_to_pgm(hm));
  std::string csv_path = a.csv_path;
  if (csv_path.empty()) {
    csv_path = a.out_path;
    const auto dot = csv_path.rfind('.');
    if (dot != std::string::npos) csv_path.resize(dot);
    csv_path += ".csv";
  }
  cascade::io::write_text_file(csv_path,
                               cascade::verify::heatmap_to_csv(hm, region));

  std::cout << "wrote " << a.out_path << " (" << hm.width << "x" << hm.height
            << ") and " << csv_path << "\n"
            << "min = " << hm.min_value.str()
            << ", max = " << hm.max_value.str() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "cascadec: exact ReLU realizations of dyadic refinement iterates"};
  app.require_subcommand(1);

  CompileArgs ca;
  CLI::App* compile =
      app.add_subcommand("compile", "Compile V^n g into a network");
  compile->add_option("--mask", ca.mask_path, "Mask JSON path")->required();
  compile->add_option("--seed", ca.seed_path, "Seed CPwL JSON path")
      ->required();
  compile->add_option("--window", ca.window, "Window extents L1 L2")
      ->expected(2)
      ->required();
  compile->add_option("--n", ca.n, "Refinement depth")->required();
  compile->add_option("--rho", ca.rho, "Inset parameter (default 1/4)");
  compile->add_option("--eps-bar", ca.eps_bar,
                      "Readout margin (default 1/8)");
  compile->add_option("--delta-bar", ca.delta_bar,
                      "Selector margin scale (default 1/2)");
  compile->add_option("-o,--output", ca.out_path, "Network JSON output")
      ->required();

  VerifyArgs va;
  CLI::App* verify_cmd =
      app.add_subcommand("verify", "Run a verification plan");
  verify_cmd->add_option("--plan", va.plan_path, "Plan JSON path");
  verify_cmd->add_option("-o,--output", va.out_path, "Report JSON output");
  verify_cmd->add_flag("--timings", va.timings,
                       "Record wall-clock timings (breaks byte-stability)");
  verify_cmd->add_option(
      "--emit-demo-plan", va.emit_demo,
      "Write the built-in demo plan (hat mask, pyramid seed, n = 1..5) "
      "to this path and exit");

  OracleArgs oa;
  CLI::App* oracle =
      app.add_subcommand("oracle-eval", "Evaluate a reference oracle");
  oracle->add_option("--mode", oa.mode, "direct or cascade")
      ->required()
      ->check(CLI::IsMember({"direct", "cascade"}));
  oracle->add_option("--mask", oa.mask_path, "Mask JSON path")->required();
  oracle->add_option("--seed", oa.seed_path, "Seed CPwL JSON path")
      ->required();
  oracle->add_option("--window", oa.window,
                     "Window extents L1 L2 (cascade mode)")
      ->expected(2);
  oracle->add_option("--n", oa.n, "Refinement depth")->required();
  oracle->add_option("--point", oa.point, "Evaluation point \"p/q,p/q\"")
      ->required();

  DecomposeArgs da;
  CLI::App* decompose =
      app.add_subcommand("decompose", "Decompose a seed into shifted atoms");
  decompose->add_option("--seed", da.seed_path, "Seed CPwL JSON path")
      ->required();
  decompose->add_option("--rho", da.rho, "Inset parameter (default 1/4)");
  decompose->add_option("-o,--output", da.out_path, "Atom-list JSON output")
      ->required();

  std::string stats_path;
  CLI::App* stats = app.add_subcommand("stats", "Print network statistics");
  stats->add_option("network", stats_path, "Network JSON path")->required();

  RenderArgs ra;
  CLI::App* render =
      app.add_subcommand("render", "Sample a heatmap to PGM + CSV");
  render->add_option("--input", ra.input,
                     "Network JSON path, or \"oracle\"")
      ->required();
  render->add_option("--region", ra.region, "Region x0 y0 x1 y1 (rationals)")
      ->expected(4)
      ->required();
  render->add_option("--res", ra.res, "Resolution W H")
      ->expected(2)
      ->required();
  render->add_option("-o,--output", ra.out_path, "PGM output path")
      ->required();
  render->add_option("--csv", ra.csv_path,
                     "CSV output path (default: PGM path with .csv)");
  render->add_option("--mask", ra.mask_path, "Mask JSON (oracle input)");
  render->add_option("--seed", ra.seed_path, "Seed JSON (oracle input)");
  render->add_option("--n", ra.n, "Refinement depth (oracle input)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*compile) return run_compile(ca);
    if (*verify_cmd) return run_verify(va);
    if (*oracle) {
      if (oa.mode == "cascade" && oa.window.size() != 2) {
        throw cascade::DomainError("oracle-eval: cascade mode needs --window");
      }
      return run_oracle_eval(oa);
    }
    if (*decompose) return run_decompose(da);
    if (*stats) return run_stats(stats_path);
    if (*render) return run_render(ra);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
