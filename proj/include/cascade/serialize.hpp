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
// Bit-exact JSON serialization of networks and related artifacts.
//
// Network file format (field order fixed; no floating-point literals):
//   {
//     "input_dim": <integer>,
//     "layers": [ { "weights": [["p/q", ...], ...],   // dense rows
//                   "bias":    ["p/q", ...] }, ... ],
//     "meta": { "<key>": "<value>", ... }
//   }
// Rationals are always written as "p/q" in lowest terms with positive q.
// Dense rows make the format self-describing but quadratic in width; it is
// intended for gadget- and demo-scale networks, not bulk assemblies.

#ifndef CASCADE_SERIALIZE_HPP
#define CASCADE_SERIALIZE_HPP

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cascade/cpwl.hpp"
#include "cascade/network.hpp"
#include "cascade/refinement.hpp"

namespace cascade {
namespace io {

using json = nlohmann::ordered_json;

// 64-bit FNV-1a over bytes; used to fingerprint canonical JSON dumps.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

inline std::uint64_t json_fingerprint(const json& j) {
  return fnv1a64(canonical_dump(j));
}

inline void write_text_file(const std::string& path,
                            const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot open for writing: " + path);
  out << contents;
  if (!out) throw DomainError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Network <-> JSON

inline json network_to_json(const ir::ReluNetwork& net) {
  json j = json::object();
  j["input_dim"] = net.input_dim();
  json layers = json::array();
  const auto& pool = net.pool();
  for (const auto& l : net.layers()) {
    json weights = json::array();
    for (std::uint32_t r = 0; r < l.out_dim; ++r) {
      json row = json::array();
      std::uint32_t k = l.row_offsets[r];
      for (std::uint32_t c = 0; c < l.in_dim; ++c) {
        if (k < l.row_offsets[r + 1] && l.cols[k] == c) {
          row.push_back(pool[l.vals[k]].str());
          ++k;
        } else {
          row.push_back("0/1");
        }
      }
      weights.push_back(std::move(row));
    }
    json bias = json::array();
    {
      std::size_t bi = 0;
      for (std::uint32_t r = 0; r < l.out_dim; ++r) {
        if (bi < l.bias.size() && l.bias[bi].first == r) {
          bias.push_back(pool[l.bias[bi].second].str());
          ++bi;
        } else {
          bias.push_back("0/1");
        }
      }
    }
    json layer = json::object();
    layer["weights"] = std::move(weights);
    layer["bias"] = std::move(bias);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  json meta = json::object();
  for (const auto& [k, v] : net.meta()) meta[k] = v;
  j["meta"] = std::move(meta);
  return j;
}

inline ir::ReluNetwork network_from_json(const json& j) {
  if (!j.is_object() || !j.contains("input_dim") || !j.contains("layers")) {
    throw ParseError("network json: missing input_dim or layers");
  }
  const auto input_dim = j.at("input_dim").get<std::uint32_t>();
  std::vector<ir::LayerSpec> specs;
  for (const auto& layer : j.at("layers")) {
    const auto& weights = layer.at("weights");
    const auto& bias = layer.at("bias");
    if (weights.size() != bias.size()) {
      throw ParseError("network json: weights/bias row count mismatch");
    }
    ir::LayerSpec spec;
    for (std::size_t r = 0; r < weights.size(); ++r) {
      ir::RowSpec rs;
      const auto& row = weights[r];
      for (std::size_t c = 0; c < row.size(); ++c) {
        Rational v = Rational::parse(row[c].get<std::string>());
        if (!v.is_zero()) {
          rs.terms.push_back({static_cast<std::uint32_t>(c), v});
        }
      }
      rs.bias = Rational::parse(bias[r].get<std::string>());
      spec.push_back(std::move(rs));
    }
    specs.push_back(std::move(spec));
  }
  ir::ReluNetwork net = ir::ReluNetwork::build(input_dim, specs);
  if (j.contains("meta")) {
    for (auto it = j.at("meta").begin(); it != j.at("meta").end(); ++it) {
      net.meta()[it.key()] = it.value().get<std::string>();
    }
  }
  return net;
}

inline void save_network(const ir::ReluNetwork& net, const std::string& path) {
  write_text_file(path, canonical_dump(network_to_json(net)));
}

inline ir::ReluNetwork load_network(const std::string& path) {
  return network_from_json(json::parse(read_text_file(path)));
}

// Mesh-backed CPwL function format:
//   {"vertices": [["p/q","p/q"], ...], "triangles": [[i,j,k], ...],
//    "values": ["p/q", ...], "outside_value": "p/q"}
// `outside_value` is optional and defaults to 0.
inline json mesh_to_json(const cpwl::CpwlFunction2D& f) {
  json j = json::object();
  json verts = json::array();
  for (const auto& v : f.mesh.vertices()) {
    verts.push_back(json::array({v.x.str(), v.y.str()}));
  }
  j["vertices"] = std::move(verts);
  json tris = json::array();
  for (const auto& t : f.mesh.triangles()) {
    tris.push_back(json::array({t.a, t.b, t.c}));
  }
  j["triangles"] = std::move(tris);
  json vals = json::array();
  for (const auto& v : f.mesh.values()) vals.push_back(v.str());
  j["values"] = std::move(vals);
  j["outside_value"] = f.outside_value.str();
  return j;
}

inline cpwl::CpwlFunction2D mesh_from_json(const json& j) {
  if (!j.is_object() || !j.contains("vertices") || !j.contains("triangles") ||
      !j.contains("values")) {
    throw ParseError("mesh json: missing vertices/triangles/values");
  }
  try {
    std::vector<cpwl::Vec2> verts;
    for (const auto& v : j.at("vertices")) {
      if (!v.is_array() || v.size() != 2) {
        throw ParseError("mesh json: vertex must be [\"p/q\",\"p/q\"]");
      }
      verts.push_back({Rational::parse(v[0].get<std::string>()),
                       Rational::parse(v[1].get<std::string>())});
    }
    std::vector<cpwl::Tri> tris;
    for (const auto& t : j.at("triangles")) {
      if (!t.is_array() || t.size() != 3) {
        throw ParseError("mesh json: triangle must be [i,j,k]");
      }
      tris.push_back({t[0].get<std::uint32_t>(), t[1].get<std::uint32_t>(),
                      t[2].get<std::uint32_t>()});
    }
    std::vector<Rational> vals;
    for (const auto& v : j.at("values")) {
      vals.push_back(Rational::parse(v.get<std::string>()));
    }
    Rational outside(0);
    if (j.contains("outside_value")) {
      outside = Rational::parse(j.at("outside_value").get<std::string>());
    }
    return {cpwl::CpwlMesh(std::move(verts), std::move(tris), std::move(vals)),
            std::move(outside)};
  } catch (const DomainError& e) {
    throw ParseError(std::string("mesh json: ") + e.what());
  } catch (const json::exception& e) {
    throw ParseError(std::string("mesh json: ") + e.what());
  }
}

inline void save_mesh(const cpwl::CpwlFunction2D& f, const std::string& path) {
  write_text_file(path, canonical_dump(mesh_to_json(f)));
}

inline cpwl::CpwlFunction2D load_mesh(const std::string& path) {
  return mesh_from_json(json::parse(read_text_file(path)));
}

// Mask format: {"entries": [[j, k, "p/q"], ...]}, entries sorted by (j, k).
inline json mask_to_json(const refinement::Mask& m) {
  json entries = json::array();
  for (const auto& [idx, v] : m.entries) {
    if (v.is_zero()) continue;
    entries.push_back(json::array({idx.first, idx.second, v.str()}));
  }
  json j = json::object();
  j["entries"] = std::move(entries);
  return j;
}

inline refinement::Mask mask_from_json(const json& j) {
  if (!j.is_object() || !j.contains("entries") || !j.at("entries").is_array()) {
    throw ParseError("mask json: missing entries array");
  }
  refinement::Mask m;
  try {
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() ||
          !e[1].is_number_integer()) {
        throw ParseError("mask json: entry must be [j, k, \"p/q\"]");
      }
      m.set(e[0].get<std::int64_t>(), e[1].get<std::int64_t>(),
            Rational::parse(e[2].get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("mask json: ") + e.what());
  }
  return m;
}

// Window format: {"L1": int, "L2": int}.
inline json window_to_json(const refinement::Window& w) {
  json j = json::object();
  j["L1"] = w.L1;
  j["L2"] = w.L2;
  return j;
}

inline refinement::Window window_from_json(const json& j) {
  if (!j.is_object() || !j.contains("L1") || !j.contains("L2") ||
      !j.at("L1").is_number_integer() || !j.at("L2").is_number_integer()) {
    throw ParseError("window json: need integer L1 and L2");
  }
  refinement::Window w{j.at("L1").get<std::int64_t>(),
                       j.at("L2").get<std::int64_t>()};
  try {
    w.check();
  } catch (const DomainError& e) {
    throw ParseError(std::string("window json: ") + e.what());
  }
  return w;
}

inline void save_mask(const refinement::Mask& m, const std::string& path) {
  write_text_file(path, canonical_dump(mask_to_json(m)));
}

inline refinement::Mask load_mask(const std::string& path) {
  return mask_from_json(json::parse(read_text_file(path)));
}

inline json stats_to_json(const ir::ReluNetwork& net) {
  const ir::NetworkStats s = net.stats();
  json j = json::object();
  j["input_dim"] = net.input_dim();
  j["output_dim"] = net.output_dim();
  j["depth"] = s.depth;
  j["width"] = s.width;
  j["parameter_count"] = s.parameter_count;
  j["max_abs_weight"] = s.max_abs_weight.str();
  return j;
}

}  // namespace io
}  // namespace cascade

#endif  // CASCADE_SERIALIZE_HPP
