#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bergmanlab/geometry.hpp"
#include "bergmanlab/sampling.hpp"
#include "bergmanlab/toeplitz.hpp"

namespace bergman {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Experiment configuration. JSON with a strict schema: unknown keys are
// rejected everywhere and parse(emit(config)) == config.
//
// Symbol mini-language: a symbol is a map from diagonal blocks ("" scalar,
// "1", "2", "12") to a list of terms; each term is one of
//   {"kind":"const",  "value": c}
//   {"kind":"height", "value": c, "factor": f}      c * (sphere height of factor f)
//   {"kind":"cap",    "value": c, "factor": f, "t": t0}  c * 1_{|z_f|^2 <= t0}
// ---------------------------------------------------------------------------

struct SymbolTermSpec {
  std::string kind = "const";  // const | height | cap
  double value = 1.0;
  int factor = 1;   // 1-based
  double t = 1.0;   // cap boundary, chart-0 |z|^2
  bool operator==(const SymbolTermSpec&) const = default;
};

struct SymbolSpec {
  std::map<std::string, std::vector<SymbolTermSpec>> blocks;
  bool operator==(const SymbolSpec&) const = default;
};

struct RegionSpec {
  std::array<double, 2> center{0.0, 0.0};  // chart-0 coordinate of the cap center
  double radius = 0.5 * kPi;               // angular radius
  bool operator==(const RegionSpec&) const = default;
};

struct FamilySpec {
  std::string kind = "FIBONACCI_UNIFORM";  // FIBONACCI_UNIFORM | CAP_DEFICIENT | QUADRATURE_NODES
  double c = 1.5;
  double cap_t = 1.0;  // CAP_DEFICIENT: removed cap, chart-0 |z|^2 boundary
  bool operator==(const FamilySpec&) const = default;
};

struct ExperimentOptions {
  std::string symbol;    // named symbol driving spectrum/trace/pushforward/superreduction
  std::string symbol_g;  // second symbol for product-trace experiments
  std::vector<double> gammas{0.25, 0.5, 0.75};
  double delta = 0.5;
  int pair_radial = 2;
  int pair_angular = 6;
  std::vector<FamilySpec> families;
  std::vector<RegionSpec> regions;
  bool operator==(const ExperimentOptions&) const = default;
};

struct ExperimentConfig {
  std::string geometry_name = "FS_CP1";
  std::vector<double> geometry_params{1.0};
  int q = 0;
  std::vector<int> ks{4, 6, 8};
  GridResolution grid;
  std::map<std::string, SymbolSpec> symbols;
  std::vector<std::string> experiments;
  ExperimentOptions options;
  std::string out_dir = "out";
  std::map<std::string, double> tolerances;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = library default

  bool operator==(const ExperimentConfig& o) const {
    return geometry_name == o.geometry_name && geometry_params == o.geometry_params && q == o.q &&
           ks == o.ks && grid.radial == o.grid.radial && grid.angular == o.grid.angular &&
           grid.extra_breaks == o.grid.extra_breaks && symbols_eq(o) && experiments == o.experiments &&
           options == o.options && out_dir == o.out_dir && tolerances == o.tolerances &&
           seed == o.seed && threads == o.threads;
  }
  bool symbols_eq(const ExperimentConfig& o) const { return symbols == o.symbols; }
};

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: expected object at " + where);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
}

inline SymbolTermSpec parse_term(const json& j, const std::string& where) {
  reject_unknown(j, {"kind", "value", "factor", "t"}, where);
  SymbolTermSpec t;
  t.kind = j.value("kind", "const");
  if (t.kind != "const" && t.kind != "height" && t.kind != "cap")
    throw std::invalid_argument("config: unknown symbol term kind '" + t.kind + "'");
  t.value = j.value("value", 1.0);
  t.factor = j.value("factor", 1);
  t.t = j.value("t", 1.0);
  return t;
}

inline std::uint32_t block_mask(const std::string& key, int n) {
  std::uint32_t m = 0;
  for (char c : key) {
    if (c < '1' || c > '0' + n)
      throw std::invalid_argument("config: bad symbol block key '" + key + "' for n = " + std::to_string(n));
    m |= 1u << (c - '1');
  }
  if (popcount32(m) != static_cast<int>(key.size()))
    throw std::invalid_argument("config: repeated factor in symbol block key '" + key + "'");
  return m;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  using detail::reject_unknown;
  reject_unknown(j, {"geometry", "q", "k", "grid", "symbols", "experiments", "options", "out_dir",
                     "tolerances", "seed", "threads"},
                 "top level");
  ExperimentConfig c;
  if (!j.contains("geometry")) throw std::invalid_argument("config: missing 'geometry'");
  reject_unknown(j.at("geometry"), {"name", "params"}, "geometry");
  c.geometry_name = j.at("geometry").value("name", "");
  c.geometry_params = j.at("geometry").value("params", std::vector<double>{});
  c.q = j.value("q", 0);
  c.ks = j.value("k", std::vector<int>{});
  if (c.ks.empty()) throw std::invalid_argument("config: 'k' list must be nonempty");
  if (j.contains("grid")) {
    reject_unknown(j.at("grid"), {"radial", "angular", "extra_breaks"}, "grid");
    c.grid.radial = j.at("grid").value("radial", 0);
    c.grid.angular = j.at("grid").value("angular", 0);
    c.grid.extra_breaks = j.at("grid").value("extra_breaks", std::vector<double>{});
  }
  c.grid.max_k = *std::max_element(c.ks.begin(), c.ks.end());
  if (j.contains("symbols")) {
    for (auto it = j.at("symbols").begin(); it != j.at("symbols").end(); ++it) {
      SymbolSpec spec;
      for (auto bt = it.value().begin(); bt != it.value().end(); ++bt) {
        std::vector<SymbolTermSpec> terms;
        for (const auto& tj : bt.value())
          terms.push_back(detail::parse_term(tj, "symbols." + it.key() + "." + bt.key()));
        spec.blocks[bt.key()] = std::move(terms);
      }
      c.symbols[it.key()] = std::move(spec);
    }
  }
  c.experiments = j.value("experiments", std::vector<std::string>{});
  static const std::set<std::string> kKnown{"bergman", "dimension", "spectrum", "trace",
                                            "kernel", "pushforward", "superreduction", "sampling"};
  for (const auto& e : c.experiments)
    if (!kKnown.count(e)) throw std::invalid_argument("config: unknown experiment '" + e + "'");
  if (j.contains("options")) {
    const json& o = j.at("options");
    reject_unknown(o, {"symbol", "symbol_g", "gammas", "delta", "pair_radial", "pair_angular",
                       "families", "regions"},
                   "options");
    c.options.symbol = o.value("symbol", "");
    c.options.symbol_g = o.value("symbol_g", "");
    c.options.gammas = o.value("gammas", std::vector<double>{0.25, 0.5, 0.75});
    c.options.delta = o.value("delta", 0.5);
    c.options.pair_radial = o.value("pair_radial", 2);
    c.options.pair_angular = o.value("pair_angular", 6);
    if (o.contains("families")) {
      for (const auto& fj : o.at("families")) {
        reject_unknown(fj, {"kind", "c", "cap_t"}, "options.families[]");
        FamilySpec f;
        f.kind = fj.value("kind", "FIBONACCI_UNIFORM");
        if (f.kind != "FIBONACCI_UNIFORM" && f.kind != "CAP_DEFICIENT" && f.kind != "QUADRATURE_NODES")
          throw std::invalid_argument("config: unknown family kind '" + f.kind + "'");
        f.c = fj.value("c", 1.5);
        f.cap_t = fj.value("cap_t", 1.0);
        c.options.families.push_back(f);
      }
    }
    if (o.contains("regions")) {
      for (const auto& rj : o.at("regions")) {
        reject_unknown(rj, {"center", "radius", "t"}, "options.regions[]");
        RegionSpec r;
        r.center = rj.value("center", std::array<double, 2>{0.0, 0.0});
        if (rj.contains("t")) {
          const double t = rj.at("t").get<double>();
          r.radius = std::acos(std::clamp((1.0 - t) / (1.0 + t), -1.0, 1.0));
        } else {
          r.radius = rj.value("radius", 0.5 * kPi);
        }
        c.options.regions.push_back(r);
      }
    }
  }
  c.out_dir = j.value("out_dir", "out");
  if (j.contains("tolerances"))
    for (auto it = j.at("tolerances").begin(); it != j.at("tolerances").end(); ++it)
      c.tolerances[it.key()] = it.value().get<double>();
  c.seed = j.value("seed", std::uint64_t{1});
  c.threads = j.value("threads", 0);

  // Eager validation of the geometry and symbol blocks.
  const ModelGeometry g = build_geometry(c.geometry_name, c.geometry_params);
  for (const auto& [name, spec] : c.symbols)
    for (const auto& [key, terms] : spec.blocks) {
      if (!key.empty()) detail::block_mask(key, g.n());
      for (const auto& t : terms)
        if (t.factor < 1 || t.factor > g.n())
          throw std::invalid_argument("config: symbol '" + name + "' references factor " +
                                      std::to_string(t.factor));
    }
  return c;
}

inline json emit_config(const ExperimentConfig& c) {
  json j;
  j["geometry"] = {{"name", c.geometry_name}, {"params", c.geometry_params}};
  j["q"] = c.q;
  j["k"] = c.ks;
  j["grid"] = {{"radial", c.grid.radial}, {"angular", c.grid.angular}, {"extra_breaks", c.grid.extra_breaks}};
  json syms = json::object();
  for (const auto& [name, spec] : c.symbols) {
    json blocks = json::object();
    for (const auto& [key, terms] : spec.blocks) {
      json arr = json::array();
      for (const auto& t : terms)
        arr.push_back({{"kind", t.kind}, {"value", t.value}, {"factor", t.factor}, {"t", t.t}});
      blocks[key] = arr;
    }
    syms[name] = blocks;
  }
  j["symbols"] = syms;
  j["experiments"] = c.experiments;
  json fams = json::array();
  for (const auto& f : c.options.families)
    fams.push_back({{"kind", f.kind}, {"c", f.c}, {"cap_t", f.cap_t}});
  json regs = json::array();
  for (const auto& r : c.options.regions)
    regs.push_back({{"center", r.center}, {"radius", r.radius}});
  j["options"] = {{"symbol", c.options.symbol},   {"symbol_g", c.options.symbol_g},
                  {"gammas", c.options.gammas},   {"delta", c.options.delta},
                  {"pair_radial", c.options.pair_radial}, {"pair_angular", c.options.pair_angular},
                  {"families", fams},             {"regions", regs}};
  j["out_dir"] = c.out_dir;
  j["tolerances"] = c.tolerances.empty() ? json::object() : json(c.tolerances);
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  return parse_config(json::parse(text));
}

// --- realization of symbol specs as callable fields ------------------------

inline std::function<double(const Point&)> term_field(const SymbolTermSpec& t) {
  const int f = t.factor - 1;
  if (t.kind == "const") {
    const double v = t.value;
    return [v](const Point&) { return v; };
  }
  if (t.kind == "height") {
    const double v = t.value;
    return [v, f](const Point& p) { return v * ModelGeometry::to_sphere(p.chart[f], p.z[f])[2]; };
  }
  const double hcap = (1.0 - t.t) / (1.0 + t.t);
  const double v = t.value;
  return [v, f, hcap](const Point& p) {
    return ModelGeometry::to_sphere(p.chart[f], p.z[f])[2] >= hcap ? v : 0.0;
  };
}

inline std::function<double(const Point&)> terms_field(const std::vector<SymbolTermSpec>& terms) {
  std::vector<std::function<double(const Point&)>> fs;
  for (const auto& t : terms) fs.push_back(term_field(t));
  return [fs](const Point& p) {
    double s = 0.0;
    for (const auto& f : fs) s += f(p);
    return s;
  };
}

inline SuperSymbol make_super_symbol(const std::string& id, const SymbolSpec& spec, int n) {
  SuperSymbol sym;
  sym.id = id;
  sym.n = n;
  for (const auto& [key, terms] : spec.blocks) {
    const std::uint32_t J = key.empty() ? 0u : detail::block_mask(key, n);
    sym.add_block(J, J, terms_field(terms));
  }
  return sym;
}

inline ScalarSymbol make_scalar_symbol(const std::string& id, const SymbolSpec& spec) {
  auto it = spec.blocks.find("");
  if (spec.blocks.size() != 1 || it == spec.blocks.end())
    throw std::invalid_argument("symbol '" + id + "': scalar use requires exactly the \"\" block");
  return ScalarSymbol{id, terms_field(it->second)};
}

/// Radial panel breakpoints implied by a symbol's cap terms (so indicator
/// discontinuities always sit on panel boundaries).
inline std::vector<double> symbol_breaks(const SymbolSpec& spec) {
  std::vector<double> out;
  for (const auto& [key, terms] : spec.blocks)
    for (const auto& t : terms)
      if (t.kind == "cap") {
        out.push_back(t.t);
        if (t.t > 0) out.push_back(1.0 / t.t);
      }
  return out;
}

}  // namespace bergman
