#pragma once

// Scenario files: JSON with schema "causal-ops/1", rationals as "p/q" strings and
// complex entries as [re, im]. Every diagnostic carries the field path.

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "causal_ops/causality.hpp"
#include "causal_ops/fv.hpp"
#include "causal_ops/geometry.hpp"
#include "causal_ops/hybrid.hpp"
#include "causal_ops/quantum.hpp"

namespace causal_ops {

using Json = nlohmann::json;

inline constexpr const char* schema_version = "causal-ops/1";

struct NamedRegion {
  std::string name;
  Diamond diamond;
  bool operator==(const NamedRegion&) const = default;
};

struct NamedInterval {
  std::string name;
  SpacelikeInterval interval;
  bool operator==(const NamedInterval&) const = default;
};

inline bool same_matrix(const CMatrix& a, const CMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

/// A density operator or observable on named factors.
struct NamedMatrix {
  std::string name;
  std::vector<std::string> factors;
  CMatrix matrix;
  bool operator==(const NamedMatrix& o) const {
    return name == o.name && factors == o.factors && same_matrix(matrix, o.matrix);
  }
};

struct NamedKraus {
  std::string name;
  std::vector<std::string> factors;
  std::vector<CMatrix> kraus;
  bool operator==(const NamedKraus& o) const {
    if (name != o.name || factors != o.factors || kraus.size() != o.kraus.size()) return false;
    for (std::size_t i = 0; i < kraus.size(); ++i)
      if (!same_matrix(kraus[i], o.kraus[i])) return false;
    return true;
  }
};

struct LocalUnitary {
  std::vector<std::string> factors;
  CMatrix matrix;
  bool operator==(const LocalUnitary& o) const { return factors == o.factors && same_matrix(matrix, o.matrix); }
};

struct FvSpec {
  std::string name;
  Worldline route;
  std::vector<Factor> probe;
  std::string coupling_zone;
  std::vector<LocalUnitary> crossing_unitaries;
  CMatrix probe_state;
  CMatrix effect;
  bool operator==(const FvSpec& o) const {
    return name == o.name && route == o.route && probe == o.probe && coupling_zone == o.coupling_zone &&
           crossing_unitaries == o.crossing_unitaries && same_matrix(probe_state, o.probe_state) &&
           same_matrix(effect, o.effect);
  }
};

struct Party {
  std::string name;
  std::string region;
  std::vector<std::string> factors;
  std::vector<std::string> alternatives;
  bool operator==(const Party&) const = default;
};

struct SorkinSpec {
  std::string alice, bob, charlie;
  std::string bob_operation;  // a channel or an FV measurement
  std::string state;
  bool operator==(const SorkinSpec&) const = default;
};

struct ClassifySpec {
  std::string channel;
  std::vector<std::string> a, c;
  std::optional<bool> expect_nosig_a_to_c, expect_nosig_c_to_a;
  bool operator==(const ClassifySpec&) const = default;
};

struct CoverSpec {
  std::string gamma, delta, zone;
  bool operator==(const CoverSpec&) const = default;
};

struct RouteSpec {
  std::string o_a, o_c, gamma_a, gamma_c;  // regions, then system labels
  bool operator==(const RouteSpec&) const = default;
};

struct GeometrySpec {
  std::vector<std::vector<std::string>> orders;
  std::vector<std::array<std::string, 2>> cauchy;
  std::vector<CoverSpec> covers;
  std::vector<std::array<std::string, 3>> sorkin;
  std::vector<RouteSpec> routes;
  bool operator==(const GeometrySpec&) const = default;
};

struct SimulateSpec {
  std::vector<std::string> sequence;
  std::string state;
  bool operator==(const SimulateSpec&) const = default;
};

struct VerifySpec {
  Dims dims;
  std::optional<RouteSpec> hybrid_geometry;
  bool operator==(const VerifySpec&) const = default;
};

struct Scenario {
  std::string schema = schema_version;
  std::string description;
  std::vector<WorldlineSystem> systems;
  std::vector<NamedRegion> regions;
  std::vector<NamedInterval> intervals;
  std::vector<NamedMatrix> states;
  std::vector<NamedKraus> channels;
  std::vector<FvSpec> fv_measurements;
  std::vector<Party> parties;
  std::optional<SorkinSpec> sorkin;
  std::vector<ClassifySpec> classify;
  GeometrySpec geometry;
  std::optional<SimulateSpec> simulate;
  VerifySpec verify;
  std::vector<std::string> commands;
  bool operator==(const Scenario&) const = default;

  HybridNet net() const { return HybridNet{systems}; }
  TensorSpace space() const { return net().space(); }

  const NamedRegion* region(const std::string& n) const { return find(regions, n); }
  const NamedMatrix* state(const std::string& n) const { return find(states, n); }
  const NamedKraus* channel(const std::string& n) const { return find(channels, n); }
  const FvSpec* fv(const std::string& n) const { return find(fv_measurements, n); }
  const Party* party(const std::string& n) const { return find(parties, n); }
  const WorldlineSystem* system(const std::string& n) const {
    for (auto& s : systems)
      if (s.label == n) return &s;
    return nullptr;
  }

 private:
  template <typename T>
  static const T* find(const std::vector<T>& v, const std::string& n) {
    for (auto& x : v)
      if (x.name == n) return &x;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Parsing.

namespace detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::Parse, path + ": " + msg);
}

inline const Json& field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path, "missing field '" + key + "'");
  return *it;
}

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
inline std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline std::string get_string(const Json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

inline std::vector<std::string> get_strings(const Json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_string(j[i], at(path, i)));
  return out;
}

inline int get_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

inline Rational get_rational(const Json& j, const std::string& path) {
  if (j.is_number_integer()) return Rational(j.get<long long>());
  if (!j.is_string()) fail(path, "expected a rational string such as \"3/4\"");
  try {
    return parse_rational(j.get<std::string>());
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

inline Point get_point(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) fail(path, "expected a point [t, x]");
  return Point{get_rational(j[0], at(path, 0)), get_rational(j[1], at(path, 1))};
}

inline Worldline get_worldline(const Json& j, const std::string& path) {
  Worldline w;
  const Json& vs = field(j, "vertices", path);
  if (!vs.is_array()) fail(join(path, "vertices"), "expected an array of points");
  for (std::size_t i = 0; i < vs.size(); ++i) w.vertices.push_back(get_point(vs[i], at(join(path, "vertices"), i)));
  w.initial_velocity = j.contains("initial_velocity")
                           ? get_rational(j["initial_velocity"], join(path, "initial_velocity"))
                           : Rational(0);
  w.final_velocity = j.contains("final_velocity") ? get_rational(j["final_velocity"], join(path, "final_velocity"))
                                                  : Rational(0);
  try {
    validate_worldline(w);
  } catch (const Error& e) {
    fail(path, e.what());
  }
  return w;
}

inline Diamond get_diamond(const Json& j, const std::string& path) {
  Point b = get_point(field(j, "bottom", path), join(path, "bottom"));
  Point t = get_point(field(j, "top", path), join(path, "top"));
  bool closed = j.contains("closed") ? j["closed"].get<bool>() : false;
  try {
    return make_diamond(b, t, closed);
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

inline Complex get_complex(const Json& j, const std::string& path) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    fail(path, "expected a complex entry [re, im]");
  return Complex(j[0].get<double>(), j[1].get<double>());
}

inline CMatrix get_matrix(const Json& j, const std::string& path, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    fail(path, "expected a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
  CMatrix m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    const Json& row = j[r];
    std::string rp = at(path, r);
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      fail(rp, "expected a row of " + std::to_string(dim) + " entries");
    for (int c = 0; c < dim; ++c) m(r, c) = get_complex(row[c], at(rp, c));
  }
  return m;
}

/// Dimension of the named factors in the scenario's systems.
inline int factors_dim(const std::vector<WorldlineSystem>& systems, const std::vector<std::string>& labels,
                       const std::string& path) {
  if (labels.empty()) fail(path, "expected at least one factor");
  int d = 1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find_if(systems.begin(), systems.end(), [&](auto& s) { return s.label == labels[i]; });
    if (it == systems.end()) fail(at(path, i), "unknown system '" + labels[i] + "'");
    d *= it->dim;
  }
  std::vector<std::string> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) fail(path, "repeated factor");
  return d;
}

template <typename T>
void require_unique(const std::vector<T>& v, const std::string& path) {
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (v[i].name == v[j].name) fail(at(path, i), "duplicate name '" + v[i].name + "'");
}

template <typename T>
void require_name(const T* p, const std::string& what, const std::string& name, const std::string& path) {
  if (!p) fail(path, "unknown " + what + " '" + name + "'");
}

}  // namespace detail

inline Scenario scenario_from_json(const Json& j) {
  using namespace detail;
  if (!j.is_object()) fail("$", "scenario must be a JSON object");
  Scenario s;
  s.schema = get_string(field(j, "schema", "$"), "schema");
  if (s.schema != schema_version) fail("schema", "unsupported schema '" + s.schema + "'");
  if (j.contains("description")) s.description = get_string(j["description"], "description");

  if (j.contains("systems")) {
    const Json& a = j["systems"];
    if (!a.is_array()) fail("systems", "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::string p = at("systems", i);
      WorldlineSystem w{get_string(field(a[i], "label", p), join(p, "label")),
                        get_worldline(field(a[i], "worldline", p), join(p, "worldline")),
                        get_int(field(a[i], "dim", p), join(p, "dim"))};
      if (w.dim < 1) fail(join(p, "dim"), "dimension must be positive");
      for (auto& o : s.systems)
        if (o.label == w.label) fail(join(p, "label"), "duplicate system '" + w.label + "'");
      s.systems.push_back(w);
    }
  }
  if (j.contains("regions")) {
    const Json& a = j["regions"];
    if (!a.is_array()) fail("regions", "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::string p = at("regions", i);
      s.regions.push_back({get_string(field(a[i], "name", p), join(p, "name")), get_diamond(a[i], p)});
    }
    require_unique(s.regions, "regions");
  }
  if (j.contains("intervals")) {
    const Json& a = j["intervals"];
    if (!a.is_array()) fail("intervals", "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::string p = at("intervals", i);
      NamedInterval n{get_string(field(a[i], "name", p), join(p, "name")), {}};
      Rational t = get_rational(field(a[i], "t", p), join(p, "t"));
      Rational lo = get_rational(field(a[i], "x_lo", p), join(p, "x_lo"));
      Rational hi = get_rational(field(a[i], "x_hi", p), join(p, "x_hi"));
      try {
        n.interval = make_interval(t, lo, hi);
      } catch (const Error& e) {
        fail(p, e.what());
      }
      s.intervals.push_back(n);
    }
    require_unique(s.intervals, "intervals");
  }
  if (j.contains("states")) {
    const Json& a = j["states"];
    if (!a.is_array()) fail("states", "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::string p = at("states", i);
      NamedMatrix m;
      m.name = get_string(field(a[i], "name", p), join(p, "name"));
      m.factors = get_strings(field(a[i], "factors", p), join(p, "factors"));
      int d = factors_dim(s.systems, m.factors, join(p, "factors"));
      m.matrix = get_matrix(field(a[i], "matrix", p), join(p, "matrix"), d);
      if (!is_density(m.matrix)) fail(join(p, "matrix"), "not a density operator");
      s.states.push_back(m);
    }
    require_unique(s.states, "states");
  }
  if (j.contains("channels")) {
    const Json& a = j["channels"];
    if (!a.is_array()) fail("channels", "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::string p = at("channels", i);
      NamedKraus k;
      k.name = get_string(field(a[i], "name", p), join(p, "name"));
      k.factors = get_strings(field(a[i], "factors", p), join(p, "factors"));
      int d = factors_dim(s.systems, k.factors, join(p, "factors"));
      const Json& ks = field(a[i], "kraus", p);
      if (!ks.is_array() || ks.empty()) fail(join(p, "kraus"), "expected a non-empty array of matrices");
      for (std::size_t q = 0; q < ks.size(); ++q) k.kraus.push_back(get_matrix(ks[q], at(join(p, "kraus"), q), d));
      CMatrix sum = CMatrix::Zero(d, d);
      for (auto& m : k.kraus) sum += m.adjoint() * m;
      if (hermitian_eigenvalues(sum).maxCoeff() > 1.0 + tol::equality)
        fail(join(p, "kraus"), "Kraus operators are trace-increasing");
      s.channels.push_back(k);
    }
    require_unique(s.channels, "channels");
  }
  if (j.contains("fv_measurements")) {
    const Json& a = j["fv_measurements"];
    if (!a.is_array()) fail("fv_measurements", "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::string p = at("fv_measurements", i);
      FvSpec f;
      f.name = get_string(field(a[i], "name", p), join(p, "name"));
      f.route = get_worldline(field(a[i], "route", p), join(p, "route"));
      const Json& pr = field(a[i], "probe", p);
      if (!pr.is_array() || pr.empty()) fail(join(p, "probe"), "expected a non-empty array of factors");
      int dp = 1;
      for (std::size_t q = 0; q < pr.size(); ++q) {
        std::string fp = at(join(p, "probe"), q);
        Factor fac{get_string(field(pr[q], "label", fp), join(fp, "label")),
                   get_int(field(pr[q], "dim", fp), join(fp, "dim"))};
        if (fac.dim < 1) fail(join(fp, "dim"), "dimension must be positive");
        if (s.system(fac.label)) fail(join(fp, "label"), "probe label clashes with a system");
        dp *= fac.dim;
        f.probe.push_back(fac);
      }
      f.coupling_zone = get_string(field(a[i], "coupling_zone", p), join(p, "coupling_zone"));
      require_name(s.region(f.coupling_zone), "region", f.coupling_zone, join(p, "coupling_zone"));
      std::vector<WorldlineSystem> all = s.systems;
      for (auto& fac : f.probe) all.push_back({fac.label, f.route, fac.dim});
      const Json& us = field(a[i], "crossing_unitaries", p);
      if (!us.is_array()) fail(join(p, "crossing_unitaries"), "expected an array");
      for (std::size_t q = 0; q < us.size(); ++q) {
        std::string up = at(join(p, "crossing_unitaries"), q);
        LocalUnitary u;
        u.factors = get_strings(field(us[q], "factors", up), join(up, "factors"));
        int d = factors_dim(all, u.factors, join(up, "factors"));
        u.matrix = get_matrix(field(us[q], "matrix", up), join(up, "matrix"), d);
        if (!is_unitary(u.matrix)) fail(join(up, "matrix"), "not unitary");
        f.crossing_unitaries.push_back(u);
      }
      f.probe_state = get_matrix(field(a[i], "probe_state", p), join(p, "probe_state"), dp);
      if (!is_density(f.probe_state)) fail(join(p, "probe_state"), "not a density operator");
      f.effect = a[i].contains("effect") ? get_matrix(a[i]["effect"], join(p, "effect"), dp) : identity(dp);
      if (!is_effect(f.effect)) fail(join(p, "effect"), "not an effect");
      s.fv_measurements.push_back(f);
    }
    require_unique(s.fv_measurements, "fv_measurements");
  }
  if (j.contains("parties")) {
    const Json& a = j["parties"];
    if (!a.is_array()) fail("parties", "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::string p = at("parties", i);
      Party pa;
      pa.name = get_string(field(a[i], "name", p), join(p, "name"));
      pa.region = get_string(field(a[i], "region", p), join(p, "region"));
      require_name(s.region(pa.region), "region", pa.region, join(p, "region"));
      pa.factors = a[i].contains("factors") ? get_strings(a[i]["factors"], join(p, "factors")) : std::vector<std::string>{};
      if (!pa.factors.empty()) factors_dim(s.systems, pa.factors, join(p, "factors"));
      pa.alternatives =
          a[i].contains("alternatives") ? get_strings(a[i]["alternatives"], join(p, "alternatives")) : std::vector<std::string>{};
      for (std::size_t q = 0; q < pa.alternatives.size(); ++q) {
        auto* c = s.channel(pa.alternatives[q]);
        require_name(c, "channel", pa.alternatives[q], at(join(p, "alternatives"), q));
        if (!subset(c->factors, pa.factors))
          fail(at(join(p, "alternatives"), q), "channel '" + c->name + "' acts outside the party's factors");
      }
      s.parties.push_back(pa);
    }
    require_unique(s.parties, "parties");
  }
  if (j.contains("sorkin")) {
    const Json& o = j["sorkin"];
    SorkinSpec sp;
    sp.alice = get_string(field(o, "alice", "sorkin"), "sorkin.alice");
    sp.bob = get_string(field(o, "bob", "sorkin"), "sorkin.bob");
    sp.charlie = get_string(field(o, "charlie", "sorkin"), "sorkin.charlie");
    sp.bob_operation = get_string(field(o, "bob_operation", "sorkin"), "sorkin.bob_operation");
    sp.state = get_string(field(o, "state", "sorkin"), "sorkin.state");
    require_name(s.party(sp.alice), "party", sp.alice, "sorkin.alice");
    require_name(s.party(sp.bob), "party", sp.bob, "sorkin.bob");
    require_name(s.party(sp.charlie), "party", sp.charlie, "sorkin.charlie");
    if (!s.channel(sp.bob_operation) && !s.fv(sp.bob_operation))
      fail("sorkin.bob_operation", "unknown channel or FV measurement '" + sp.bob_operation + "'");
    require_name(s.state(sp.state), "state", sp.state, "sorkin.state");
    s.sorkin = sp;
  }
  if (j.contains("classify")) {
    const Json& a = j["classify"];
    if (!a.is_array()) fail("classify", "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::string p = at("classify", i);
      ClassifySpec c;
      c.channel = get_string(field(a[i], "channel", p), join(p, "channel"));
      require_name(s.channel(c.channel), "channel", c.channel, join(p, "channel"));
      c.a = get_strings(field(a[i], "a", p), join(p, "a"));
      c.c = get_strings(field(a[i], "c", p), join(p, "c"));
      if (a[i].contains("expect_nosig_a_to_c")) c.expect_nosig_a_to_c = a[i]["expect_nosig_a_to_c"].get<bool>();
      if (a[i].contains("expect_nosig_c_to_a")) c.expect_nosig_c_to_a = a[i]["expect_nosig_c_to_a"].get<bool>();
      s.classify.push_back(c);
    }
  }
  auto route_spec = [&](const Json& o, const std::string& p) {
    RouteSpec r{get_string(field(o, "o_a", p), join(p, "o_a")), get_string(field(o, "o_c", p), join(p, "o_c")),
                get_string(field(o, "gamma_a", p), join(p, "gamma_a")),
                get_string(field(o, "gamma_c", p), join(p, "gamma_c"))};
    require_name(s.region(r.o_a), "region", r.o_a, join(p, "o_a"));
    require_name(s.region(r.o_c), "region", r.o_c, join(p, "o_c"));
    if (!s.system(r.gamma_a)) fail(join(p, "gamma_a"), "unknown system '" + r.gamma_a + "'");
    if (!s.system(r.gamma_c)) fail(join(p, "gamma_c"), "unknown system '" + r.gamma_c + "'");
    return r;
  };
  if (j.contains("geometry")) {
    const Json& g = j["geometry"];
    auto regions_list = [&](const Json& a, const std::string& p, std::size_t n) {
      auto names = get_strings(a, p);
      if (n && names.size() != n) fail(p, "expected " + std::to_string(n) + " region names");
      for (std::size_t q = 0; q < names.size(); ++q) require_name(s.region(names[q]), "region", names[q], at(p, q));
      return names;
    };
    if (g.contains("orders"))
      for (std::size_t i = 0; i < g["orders"].size(); ++i)
        s.geometry.orders.push_back(regions_list(g["orders"][i], at("geometry.orders", i), 0));
    if (g.contains("cauchy"))
      for (std::size_t i = 0; i < g["cauchy"].size(); ++i) {
        auto v = regions_list(g["cauchy"][i], at("geometry.cauchy", i), 2);
        s.geometry.cauchy.push_back({v[0], v[1]});
      }
    if (g.contains("sorkin"))
      for (std::size_t i = 0; i < g["sorkin"].size(); ++i) {
        auto v = regions_list(g["sorkin"][i], at("geometry.sorkin", i), 3);
        s.geometry.sorkin.push_back({v[0], v[1], v[2]});
      }
    if (g.contains("covers"))
      for (std::size_t i = 0; i < g["covers"].size(); ++i) {
        std::string p = at("geometry.covers", i);
        const Json& o = g["covers"][i];
        CoverSpec c{get_string(field(o, "gamma", p), join(p, "gamma")), get_string(field(o, "delta", p), join(p, "delta")),
                    get_string(field(o, "zone", p), join(p, "zone"))};
        if (!s.system(c.gamma)) fail(join(p, "gamma"), "unknown system '" + c.gamma + "'");
        if (!s.system(c.delta)) fail(join(p, "delta"), "unknown system '" + c.delta + "'");
        require_name(s.region(c.zone), "region", c.zone, join(p, "zone"));
        s.geometry.covers.push_back(c);
      }
    if (g.contains("routes"))
      for (std::size_t i = 0; i < g["routes"].size(); ++i)
        s.geometry.routes.push_back(route_spec(g["routes"][i], at("geometry.routes", i)));
  }
  if (j.contains("simulate")) {
    const Json& o = j["simulate"];
    SimulateSpec sp;
    sp.sequence = get_strings(field(o, "sequence", "simulate"), "simulate.sequence");
    for (std::size_t q = 0; q < sp.sequence.size(); ++q)
      require_name(s.fv(sp.sequence[q]), "FV measurement", sp.sequence[q], at("simulate.sequence", q));
    sp.state = get_string(field(o, "state", "simulate"), "simulate.state");
    require_name(s.state(sp.state), "state", sp.state, "simulate.state");
    s.simulate = sp;
  }
  if (j.contains("verify")) {
    const Json& o = j["verify"];
    if (o.contains("dims")) {
      const Json& d = o["dims"];
      s.verify.dims = Dims{get_int(field(d, "a", "verify.dims"), "verify.dims.a"),
                           get_int(field(d, "b", "verify.dims"), "verify.dims.b"),
                           get_int(field(d, "c", "verify.dims"), "verify.dims.c")};
      if (s.verify.dims.a < 1 || s.verify.dims.b < 1 || s.verify.dims.c < 1)
        fail("verify.dims", "dimensions must be positive");
    }
    if (o.contains("hybrid_geometry")) s.verify.hybrid_geometry = route_spec(o["hybrid_geometry"], "verify.hybrid_geometry");
  }
  if (j.contains("commands")) s.commands = get_strings(j["commands"], "commands");
  return s;
}

inline Scenario parse_scenario(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    // nlohmann reports "at line L, column C".
    throw Error(ErrorKind::Parse, std::string("malformed JSON: ") + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("unexpected value: ") + e.what());
  }
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parse, "cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

// ---------------------------------------------------------------------------
// Serialization.

inline Json rational_json(const Rational& r) { return to_string(r); }
inline Json point_json(const Point& p) { return Json::array({rational_json(p.t), rational_json(p.x)}); }

inline Json worldline_json(const Worldline& w) {
  Json v = Json::array();
  for (auto& p : w.vertices) v.push_back(point_json(p));
  return {{"vertices", v}, {"initial_velocity", rational_json(w.initial_velocity)},
          {"final_velocity", rational_json(w.final_velocity)}};
}

inline Json diamond_json(const Diamond& d) {
  return {{"bottom", point_json(d.bottom)}, {"top", point_json(d.top)}, {"closed", d.closed}};
}

/// Entries below 1e-14 in magnitude print as 0 so reports do not carry signed zeros.
inline double clean(double v) { return std::abs(v) < 1e-14 ? 0.0 : v; }

inline Json matrix_json(const CMatrix& m, bool tidy = false) {
  Json rows = Json::array();
  for (int r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < m.cols(); ++c) {
      double re = m(r, c).real(), im = m(r, c).imag();
      if (tidy) re = clean(re), im = clean(im);
      row.push_back(Json::array({re, im}));
    }
    rows.push_back(row);
  }
  return rows;
}

inline Json route_spec_json(const RouteSpec& r) {
  return {{"o_a", r.o_a}, {"o_c", r.o_c}, {"gamma_a", r.gamma_a}, {"gamma_c", r.gamma_c}};
}

inline Json scenario_to_json(const Scenario& s) {
  Json j;
  j["schema"] = s.schema;
  if (!s.description.empty()) j["description"] = s.description;
  Json a = Json::array();
  for (auto& w : s.systems) a.push_back({{"label", w.label}, {"dim", w.dim}, {"worldline", worldline_json(w.worldline)}});
  j["systems"] = a;
  a = Json::array();
  for (auto& r : s.regions) {
    Json o = diamond_json(r.diamond);
    o["name"] = r.name;
    a.push_back(o);
  }
  j["regions"] = a;
  a = Json::array();
  for (auto& n : s.intervals)
    a.push_back({{"name", n.name}, {"t", rational_json(n.interval.t)}, {"x_lo", rational_json(n.interval.x_lo)},
                 {"x_hi", rational_json(n.interval.x_hi)}});
  j["intervals"] = a;
  a = Json::array();
  for (auto& m : s.states) a.push_back({{"name", m.name}, {"factors", m.factors}, {"matrix", matrix_json(m.matrix)}});
  j["states"] = a;
  a = Json::array();
  for (auto& k : s.channels) {
    Json ks = Json::array();
    for (auto& m : k.kraus) ks.push_back(matrix_json(m));
    a.push_back({{"name", k.name}, {"factors", k.factors}, {"kraus", ks}});
  }
  j["channels"] = a;
  a = Json::array();
  for (auto& f : s.fv_measurements) {
    Json probe = Json::array(), us = Json::array();
    for (auto& p : f.probe) probe.push_back({{"label", p.label}, {"dim", p.dim}});
    for (auto& u : f.crossing_unitaries) us.push_back({{"factors", u.factors}, {"matrix", matrix_json(u.matrix)}});
    a.push_back({{"name", f.name},
                 {"route", worldline_json(f.route)},
                 {"probe", probe},
                 {"coupling_zone", f.coupling_zone},
                 {"crossing_unitaries", us},
                 {"probe_state", matrix_json(f.probe_state)},
                 {"effect", matrix_json(f.effect)}});
  }
  j["fv_measurements"] = a;
  a = Json::array();
  for (auto& p : s.parties)
    a.push_back({{"name", p.name}, {"region", p.region}, {"factors", p.factors}, {"alternatives", p.alternatives}});
  j["parties"] = a;
  if (s.sorkin)
    j["sorkin"] = {{"alice", s.sorkin->alice},
                   {"bob", s.sorkin->bob},
                   {"charlie", s.sorkin->charlie},
                   {"bob_operation", s.sorkin->bob_operation},
                   {"state", s.sorkin->state}};
  a = Json::array();
  for (auto& c : s.classify) {
    Json o{{"channel", c.channel}, {"a", c.a}, {"c", c.c}};
    if (c.expect_nosig_a_to_c) o["expect_nosig_a_to_c"] = *c.expect_nosig_a_to_c;
    if (c.expect_nosig_c_to_a) o["expect_nosig_c_to_a"] = *c.expect_nosig_c_to_a;
    a.push_back(o);
  }
  j["classify"] = a;
  Json g;
  g["orders"] = s.geometry.orders;
  g["cauchy"] = Json::array();
  for (auto& c : s.geometry.cauchy) g["cauchy"].push_back({c[0], c[1]});
  g["sorkin"] = Json::array();
  for (auto& c : s.geometry.sorkin) g["sorkin"].push_back({c[0], c[1], c[2]});
  g["covers"] = Json::array();
  for (auto& c : s.geometry.covers) g["covers"].push_back({{"gamma", c.gamma}, {"delta", c.delta}, {"zone", c.zone}});
  g["routes"] = Json::array();
  for (auto& r : s.geometry.routes) g["routes"].push_back(route_spec_json(r));
  j["geometry"] = g;
  if (s.simulate) j["simulate"] = {{"sequence", s.simulate->sequence}, {"state", s.simulate->state}};
  Json v{{"dims", {{"a", s.verify.dims.a}, {"b", s.verify.dims.b}, {"c", s.verify.dims.c}}}};
  if (s.verify.hybrid_geometry) v["hybrid_geometry"] = route_spec_json(*s.verify.hybrid_geometry);
  j["verify"] = v;
  j["commands"] = s.commands;
  return j;
}

// ---------------------------------------------------------------------------
// Building library objects from a scenario.

inline DensityOp scenario_state(const Scenario& s, const std::string& name) {
  const NamedMatrix* m = s.state(name);
  if (!m) throw Error(ErrorKind::InvalidValue, "unknown state '" + name + "'");
  TensorSpace space = s.space();
  return DensityOp{space.ordered(m->factors), m->matrix};
}

inline Channel scenario_channel(const Scenario& s, const std::string& name) {
  const NamedKraus* k = s.channel(name);
  if (!k) throw Error(ErrorKind::InvalidValue, "unknown channel '" + name + "'");
  TensorSpace space = s.space().ordered(k->factors);
  return Channel{space, space, k->kraus};
}

inline FvMeasurement scenario_fv(const Scenario& s, const std::string& name) {
  const FvSpec* f = s.fv(name);
  if (!f) throw Error(ErrorKind::InvalidValue, "unknown FV measurement '" + name + "'");
  HybridNet net = s.net();
  TensorSpace probe(f->probe);
  std::vector<UnitaryOp> us;
  TensorSpace all = net.space().concat(probe);
  for (auto& u : f->crossing_unitaries) us.push_back(UnitaryOp{all.ordered(u.factors), u.matrix});
  Diamond k = closure(s.region(f->coupling_zone)->diamond);
  FvMeasurement m;
  for (auto& p : f->probe) m.probe.push_back({p.label, f->route, p.dim});
  m.K = k;
  m.theta = scattering_from_route(f->route, net, f->probe, k, us);
  m.sigma = DensityOp{probe, f->probe_state};
  m.b = Effect{probe, f->effect};
  return m;
}

}  // namespace causal_ops
