#pragma once

// Command dispatch and report assembly for the causal-ops executable.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "causal_ops/causality.hpp"
#include "causal_ops/render.hpp"
#include "causal_ops/scenario.hpp"

namespace causal_ops {

inline constexpr const char* toolkit_version = "0.1.0";

enum ExitCode : int { exit_pass = 0, exit_fail = 1, exit_input = 2 };

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
};

struct CommandResult {
  Json report;
  std::string svg;  // render only
  int exit_code = exit_pass;
};

/// FNV-1a 64 over the canonical scenario dump, as 16 hex digits.
inline std::string scenario_hash(const std::optional<Scenario>& s) {
  std::string text = s ? scenario_to_json(*s).dump() : std::string("null");
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::vector<std::string> command_names() {
  return {"check-geometry", "classify-channel", "sorkin",         "simulate-fv",     "verify bfr",
          "verify hybrid",  "verify axioms",    "verify geometry", "render"};
}

namespace detail {

inline Json tidy(double v) { return clean(v); }

inline Json interval_json(const SpacelikeInterval& iv) {
  return {{"t", rational_json(iv.t)}, {"x_lo", rational_json(iv.x_lo)}, {"x_hi", rational_json(iv.x_hi)}};
}

inline Json witness_json(const Witness& w, double replay) {
  Json ks = Json::array();
  for (auto& k : w.lambda.kraus) ks.push_back(matrix_json(k, true));
  return {{"lambda_factors", w.lambda.space_in.labels()},
          {"lambda_kraus", ks},
          {"rho", matrix_json(w.rho.mat, true)},
          {"effect_factors", w.effect.space.labels()},
          {"effect", matrix_json(w.effect.mat, true)},
          {"deviation", tidy(w.deviation)},
          {"replay", tidy(replay)}};
}

inline const Scenario& need(const std::optional<Scenario>& s, const std::string& command) {
  if (!s) throw Error(ErrorKind::Parse, "command '" + command + "' requires a scenario file");
  return *s;
}

inline Json check_geometry(const Scenario& s, std::uint64_t seed, bool& ok) {
  Json r;
  Json pairs = Json::array();
  for (std::size_t i = 0; i < s.regions.size(); ++i)
    for (std::size_t j = i + 1; j < s.regions.size(); ++j) {
      Diamond a = closure(s.regions[i].diamond), b = closure(s.regions[j].diamond);
      pairs.push_back({{"a", s.regions[i].name},
                       {"b", s.regions[j].name},
                       {"causally_disjoint", causally_disjoint(a, b)},
                       {"a_before_b", check_causal_order({a, b})},
                       {"b_before_a", check_causal_order({b, a})}});
    }
  r["pairs"] = pairs;

  Json orders = Json::array();
  for (auto& names : s.geometry.orders) {
    std::vector<Diamond> ds;
    for (auto& n : names) ds.push_back(closure(s.region(n)->diamond));
    bool ordered = check_causal_order(ds);
    ok = ok && ordered;
    orders.push_back({{"regions", names}, {"ordered", ordered}});
  }
  r["orders"] = orders;

  Json intervals = Json::array();
  for (auto& iv : s.intervals) {
    Diamond d = domain_of_dependence(iv.interval);
    intervals.push_back({{"name", iv.name},
                         {"domain_of_dependence", diamond_json(d)},
                         {"systems", interval_labels(s.net(), iv.interval)}});
  }
  r["intervals"] = intervals;

  Json sorkin = Json::array();
  for (std::size_t i = 0; i < s.geometry.sorkin.size(); ++i) {
    auto& t = s.geometry.sorkin[i];
    auto g = sorkin_geometry_check(s.region(t[0])->diamond, s.region(t[1])->diamond, s.region(t[2])->diamond, 8,
                                   seed + i);
    bool good = g.ordered && g.disjoint_ac && g.lemma_falsifications == 0;
    ok = ok && good;
    sorkin.push_back({{"regions", {t[0], t[1], t[2]}},
                      {"ordered", g.ordered},
                      {"disjoint_ac", g.disjoint_ac},
                      {"b_meets_future_of_a", g.b_meets_future_of_a},
                      {"b_meets_past_of_c", g.b_meets_past_of_c},
                      {"curves_checked", g.curves_checked},
                      {"lemma_falsifications", g.lemma_falsifications},
                      {"passed", good}});
  }
  r["sorkin"] = sorkin;

  Json cauchy = Json::array();
  for (std::size_t i = 0; i < s.geometry.cauchy.size(); ++i) {
    auto& c = s.geometry.cauchy[i];
    Diamond k = closure(s.region(c[0])->diamond), l = closure(s.region(c[1])->diamond);
    Json e{{"k", c[0]}, {"l", c[1]}};
    try {
      CauchyGraph g = separating_cauchy_surface(k, l);
      std::mt19937_64 rng(seed + 1000 + i);
      std::size_t violations = 0;
      std::vector<Rational> xs;
      for (auto& p : g.breakpoints) xs.push_back(p.x);
      for (int q = 0; q < 1000; ++q) xs.push_back(random_rational(rng, -20, 20, 4000));
      for (auto& x : xs) {
        Rational f = g.at(x);
        if (!(past_envelope(k, x) < f && f < future_envelope(l, x))) ++violations;
      }
      Json bps = Json::array();
      for (auto& p : g.breakpoints) bps.push_back(point_json(p));
      bool good = violations == 0 && g.is_lipschitz();
      ok = ok && good;
      e.update({{"breakpoints", bps},
                {"left_slope", rational_json(g.left_slope)},
                {"right_slope", rational_json(g.right_slope)},
                {"lipschitz", g.is_lipschitz()},
                {"samples", xs.size()},
                {"violations", violations},
                {"passed", good}});
    } catch (const Error& err) {
      ok = false;
      e.update({{"error", err.what()}, {"passed", false}});
    }
    cauchy.push_back(e);
  }
  r["cauchy"] = cauchy;

  Json covers = Json::array();
  for (auto& c : s.geometry.covers) {
    const Worldline& gamma = s.system(c.gamma)->worldline;
    const Worldline& delta = s.system(c.delta)->worldline;
    const Diamond& k = s.region(c.zone)->diamond;
    Json e{{"gamma", c.gamma}, {"delta", c.delta}, {"zone", c.zone}};
    try {
      auto cover = cover_segment(gamma, delta, k);
      auto v = validate_cover(gamma, delta, k, cover);
      Json ivs = Json::array();
      for (auto& iv : cover) ivs.push_back(interval_json(iv));
      ok = ok && v.ok();
      e.update({{"intervals", ivs},
                {"coverage", v.coverage},
                {"avoidance", v.avoidance},
                {"chaining", v.chaining},
                {"passed", v.ok()}});
    } catch (const Error& err) {
      ok = false;
      e.update({{"error", err.what()}, {"passed", false}});
    }
    covers.push_back(e);
  }
  r["covers"] = covers;

  Json routes = Json::array();
  for (auto& rt : s.geometry.routes) {
    Json e = route_spec_json(rt);
    try {
      auto route = find_probe_route(s.region(rt.o_a)->diamond, s.region(rt.o_c)->diamond,
                                    s.system(rt.gamma_a)->worldline, s.system(rt.gamma_c)->worldline);
      e["found"] = route.has_value();
      ok = ok && route.has_value();
      if (route) {
        e["route"] = worldline_json(*route);
        Json ev = Json::array();
        for (auto& x : route_events(*route, s.net())) ev.push_back({{"event", point_json(x.event)}, {"systems", x.system_labels}});
        e["events"] = ev;
      }
    } catch (const Error& err) {
      ok = false;
      e["found"] = false;
      e["error"] = err.what();
    }
    routes.push_back(e);
  }
  r["routes"] = routes;
  return r;
}

inline Json classify_channels(const Scenario& s, std::uint64_t seed, bool& ok) {
  if (s.classify.empty()) throw Error(ErrorKind::Parse, "classify: scenario declares no classify entries");
  Json out = Json::array();
  for (std::size_t i = 0; i < s.classify.size(); ++i) {
    const auto& c = s.classify[i];
    Channel l = scenario_channel(s, c.channel);
    Bipartition p{c.a, c.c};
    try {
      validate_bipartition(l.space_in, p);
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, at("classify", i) + ": " + e.what());
    }
    auto rep = classify_nosignalling(l, p, seed);
    Json e{{"channel", c.channel},
           {"a", c.a},
           {"c", c.c},
           {"nosig_a_to_c", rep.nosig_a_to_c},
           {"nosig_c_to_a", rep.nosig_c_to_a},
           {"heisenberg_a_to_c", tidy(rep.heisenberg_a_to_c)},
           {"heisenberg_c_to_a", tidy(rep.heisenberg_c_to_a)}};
    bool good = true;
    auto add_witness = [&](const std::optional<Witness>& w, const char* key) {
      if (!w) return;
      double replay = replay_witness(l, *w);
      good = good && std::abs(replay - w->deviation) <= nosig_tolerance && replay > nosig_tolerance;
      e[key] = witness_json(*w, replay);
    };
    add_witness(rep.witness_a_to_c, "witness_a_to_c");
    add_witness(rep.witness_c_to_a, "witness_c_to_a");
    if (c.expect_nosig_a_to_c) {
      e["expect_nosig_a_to_c"] = *c.expect_nosig_a_to_c;
      good = good && *c.expect_nosig_a_to_c == rep.nosig_a_to_c;
    }
    if (c.expect_nosig_c_to_a) {
      e["expect_nosig_c_to_a"] = *c.expect_nosig_c_to_a;
      good = good && *c.expect_nosig_c_to_a == rep.nosig_c_to_a;
    }
    e["passed"] = good;
    ok = ok && good;
    out.push_back(e);
  }
  return out;
}

/// Bob's operation on the full system space named by `labels`.
inline Channel bob_channel(const Scenario& s, const std::string& name) {
  if (s.channel(name)) return scenario_channel(s, name);
  return nonselective_channel(scenario_fv(s, name));
}

inline Json run_sorkin_command(const Scenario& s, std::uint64_t seed, bool& ok) {
  if (!s.sorkin) throw Error(ErrorKind::Parse, "sorkin: scenario has no sorkin section");
  const SorkinSpec& sp = *s.sorkin;
  const Party& alice = *s.party(sp.alice);
  const Party& bob = *s.party(sp.bob);
  const Party& charlie = *s.party(sp.charlie);
  SorkinScenario sc;
  sc.o_a = s.region(alice.region)->diamond;
  sc.o_b = s.region(bob.region)->diamond;
  sc.o_c = s.region(charlie.region)->diamond;
  sc.cut = Bipartition{alice.factors, charlie.factors};
  sc.omega = scenario_state(s, sp.state);
  for (auto& a : alice.alternatives) sc.alternatives.push_back({a, scenario_channel(s, a)});
  sc.bob = bob_channel(s, sp.bob_operation);
  SorkinReport rep;
  try {
    rep = run_sorkin(sc, 8, seed);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::PreconditionViolated || e.kind() == ErrorKind::DimensionMismatch ||
        e.kind() == ErrorKind::InvalidValue || e.kind() == ErrorKind::NotNonselective)
      throw Error(ErrorKind::Parse, std::string("sorkin: ") + e.what());
    throw;
  }
  auto bob_class = classify_nosignalling(reorder_channel(sc.bob, sc.omega.space), sc.cut, seed);

  Json states = Json::array();
  for (std::size_t i = 0; i < rep.names.size(); ++i)
    states.push_back({{"alternative", rep.names[i]}, {"state", matrix_json(rep.charlie_states[i], true)}});
  Json dist = Json::array();
  for (auto& row : rep.distances) {
    Json jr = Json::array();
    for (double d : row) jr.push_back(tidy(d));
    dist.push_back(jr);
  }
  // Each party's factors must be available in its region.
  HybridNet net = s.net();
  Json localised;
  bool all_local = true;
  for (const Party* p : {&alice, &bob, &charlie}) {
    auto here = local_algebra(net, s.region(p->region)->diamond).factor_labels;
    bool in = subset(p->factors, here);
    all_local = all_local && in;
    localised[p->name] = in;
  }
  bool signal_seen = rep.max_distance > 1e-10;
  bool consistent = bob_class.nosig_a_to_c ? !signal_seen : true;
  bool good = consistent && all_local && rep.geometry.lemma_falsifications == 0;
  ok = ok && good;
  return {{"alice", sp.alice},
          {"bob", sp.bob},
          {"charlie", sp.charlie},
          {"bob_operation", sp.bob_operation},
          {"geometry",
           {{"ordered", rep.geometry.ordered},
            {"disjoint_ac", rep.geometry.disjoint_ac},
            {"b_meets_future_of_a", rep.geometry.b_meets_future_of_a},
            {"b_meets_past_of_c", rep.geometry.b_meets_past_of_c},
            {"curves_checked", rep.geometry.curves_checked},
            {"lemma_falsifications", rep.geometry.lemma_falsifications}}},
          {"charlie_factors", charlie.factors},
          {"parties_localised", localised},
          {"charlie_states", states},
          {"trace_distances", dist},
          {"max_trace_distance", tidy(rep.max_distance)},
          {"best_pair", {rep.names.empty() ? "" : rep.names[rep.best_pair.first],
                         rep.names.empty() ? "" : rep.names[rep.best_pair.second]}},
          {"optimal_effect", matrix_json(rep.optimal_effect, true)},
          {"signal_observed", signal_seen},
          {"bob_nosig_a_to_c", bob_class.nosig_a_to_c},
          {"bob_nosig_c_to_a", bob_class.nosig_c_to_a},
          {"bob_heisenberg_a_to_c", tidy(bob_class.heisenberg_a_to_c)},
          {"passed", good}};
}

inline Json simulate_fv(const Scenario& s, bool& ok) {
  if (!s.simulate) throw Error(ErrorKind::Parse, "simulate: scenario has no simulate section");
  TensorSpace space = s.space();
  DensityOp omega = scenario_state(s, s.simulate->state);
  if (!same_set(omega.space.labels(), space.labels()))
    throw Error(ErrorKind::Parse, "simulate.state: state must cover every system factor");
  omega = DensityOp{space, reorder(omega.mat, omega.space, space)};

  std::vector<FvMeasurement> ms;
  Json steps = Json::array();
  CMatrix rho = omega.mat;
  bool good = true;
  for (std::size_t i = 0; i < s.simulate->sequence.size(); ++i) {
    const std::string& name = s.simulate->sequence[i];
    FvMeasurement m;
    try {
      m = scenario_fv(s, name);
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, "fv_measurements '" + name + "': " + e.what());
    }
    CMatrix eps = induced_observable(m.theta, m.sigma, m.b);
    DensityOp current{space, rho};
    auto sel = update_selective(m.theta, m.sigma, m.b, current);
    DensityOp non = update_nonselective(m.theta, m.sigma, current);
    double expectation = (rho * eps).trace().real();
    double born_gap = std::abs(expectation - sel.probability);
    double trace_gap = std::abs(non.mat.trace().real() - rho.trace().real());
    bool step_ok = born_gap <= tol::equality && trace_gap <= tol::equality && is_psd(non.mat);
    good = good && step_ok;
    Json inter = Json::array();
    for (auto& in : m.theta.interactions) inter.push_back({{"event", point_json(in.event)}, {"factors", in.labels}});
    Json step{{"measurement", name},
              {"interactions", inter},
              {"induced_observable", matrix_json(eps, true)},
              {"probability", tidy(sel.probability)},
              {"expectation", tidy(expectation)},
              {"nonselective_state", matrix_json(non.mat, true)},
              {"passed", step_ok}};
    step["postselected_state"] = sel.postselected ? matrix_json(*sel.postselected, true) : Json(nullptr);
    steps.push_back(step);
    rho = sel.unnormalized;
    ms.push_back(m);
  }
  Json out{{"factors", space.labels()}, {"steps", steps}};
  try {
    auto comp = compose_measurements(ms, omega);
    double gap = frobenius(comp.final_state - rho);
    bool cgood = gap <= tol::equality && comp.max_swap_deviation <= tol::equality;
    good = good && cgood;
    Json ex = Json::array();
    for (double e : comp.expectations) ex.push_back(tidy(e));
    out["composition"] = {{"final_state", matrix_json(comp.final_state, true)},
                          {"joint_probability", tidy(comp.final_state.trace().real())},
                          {"expectations", ex},
                          {"swap_checks", comp.swap_checks},
                          {"max_swap_deviation", tidy(comp.max_swap_deviation)},
                          {"sequential_gap", tidy(gap)},
                          {"passed", cgood}};
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::PreconditionViolated) throw;
    out["composition"] = {{"error", e.what()}};
  }
  ok = ok && good;
  return out;
}

inline HybridGeometry hybrid_geometry_of(const Scenario& s) {
  const RouteSpec& r = *s.verify.hybrid_geometry;
  return HybridGeometry{s.region(r.o_a)->diamond, s.region(r.o_c)->diamond, s.system(r.gamma_a)->worldline,
                        s.system(r.gamma_c)->worldline};
}

inline HybridNet default_axiom_net() {
  return HybridNet{{{"A", vertical_worldline(0), 2},
                    {"B", Worldline{{Point{-2, 3}, Point{0, 2}, Point{2, 3}}, Rational(-1, 2), Rational(1, 2)}, 2},
                    {"C", straight_worldline(Point{0, -3}, Rational(1, 3)), 3}}};
}

inline Json tally_json(const SuiteTally& t) { return {{"checks", t.checks}, {"violations", t.violations}}; }
inline Json tally_json(const AxiomTally& t) { return {{"checks", t.checks}, {"violations", t.violations}}; }

}  // namespace detail

/// Runs one command. Input problems surface as Error(Parse / InvalidValue ...); the caller maps them to exit 2.
inline CommandResult run_command(const std::string& command, const std::optional<Scenario>& scenario,
                                 const RunOptions& opt) {
  using namespace detail;
  CommandResult res;
  Json& rep = res.report;
  std::uint64_t seed = opt.seed.value_or(1);
  rep["toolkit"] = "causal-ops";
  rep["version"] = toolkit_version;
  rep["schema"] = schema_version;
  rep["command"] = command;
  rep["scenario_hash"] = scenario_hash(scenario);
  rep["seed"] = seed;
  rep["tolerances"] = {{"hermitian", tol::hermitian}, {"trace", tol::trace},       {"psd_relative", tol::psd_relative},
                       {"equality", tol::equality},   {"kraus_drop", tol::kraus_drop}, {"nosig", nosig_tolerance}};
  bool ok = true;

  if (command == "check-geometry") {
    rep["result"] = check_geometry(need(scenario, command), seed, ok);
  } else if (command == "classify-channel") {
    rep["result"] = classify_channels(need(scenario, command), seed, ok);
  } else if (command == "sorkin") {
    rep["result"] = run_sorkin_command(need(scenario, command), seed, ok);
  } else if (command == "simulate-fv") {
    rep["result"] = simulate_fv(need(scenario, command), ok);
  } else if (command == "verify bfr") {
    std::size_t trials = opt.trials.value_or(200);
    Dims dims = scenario ? scenario->verify.dims : Dims{};
    auto r = verify_bfr(trials, seed, dims);
    rep["trials"] = trials;
    rep["result"] = {{"dims", {{"a", dims.a}, {"b", dims.b}, {"c", dims.c}}},
                     {"tolerance", r.tolerance},
                     {"max_deviation", r.max_deviation},
                     {"max_chain_deviation", r.max_chain_deviation},
                     {"chain_checks", r.chain_checks},
                     {"geometry_failures", r.geometry_failures},
                     {"route_failures", r.route_failures},
                     {"negative_control_deviation", r.negative_control_deviation}};
    ok = r.passed();
  } else if (command == "verify hybrid") {
    std::size_t trials = opt.trials.value_or(50);
    Dims dims = scenario ? scenario->verify.dims : Dims{};
    HybridGeometry geo =
        scenario && scenario->verify.hybrid_geometry ? hybrid_geometry_of(*scenario) : default_hybrid_geometry();
    auto r = verify_hybrid_equivalence(trials, seed, dims, geo);
    rep["trials"] = trials;
    rep["result"] = {{"dims", {{"a", dims.a}, {"b", dims.b}, {"c", dims.c}}},
                     {"route_found", r.route_found},
                     {"classified", r.classified},
                     {"decomposed", r.decomposed},
                     {"realised", r.realised},
                     {"max_heisenberg", r.max_heisenberg},
                     {"max_reconstruction", r.max_reconstruction},
                     {"max_fv_distance", r.max_fv_distance},
                     {"negatives", r.negatives},
                     {"negatives_certified", r.negatives_certified},
                     {"negative_attempts", r.negative_attempts},
                     {"trivial_b_dim", r.trivial_b_dim},
                     {"trivial_ok", r.trivial_ok}};
    ok = r.passed();
  } else if (command == "verify axioms") {
    std::size_t trials = opt.trials.value_or(1000);
    HybridNet net = scenario && !scenario->systems.empty() ? scenario->net() : default_axiom_net();
    auto r = net_axiom_check(net, trials, seed);
    rep["trials"] = trials;
    rep["result"] = {{"systems", net.space().labels()},
                     {"isotony", tally_json(r.isotony)},
                     {"einstein_causality", tally_json(r.einstein_causality)},
                     {"commutators", tally_json(r.commutators)},
                     {"diamond", tally_json(r.diamond)},
                     {"haag_duality", tally_json(r.haag_duality)},
                     {"max_commutator", r.max_commutator},
                     {"violations", r.violations()}};
    ok = r.violations() == 0;
  } else if (command == "verify geometry") {
    std::size_t trials = opt.trials.value_or(10000);
    auto conv = causal_convexity_suite(trials, seed);
    auto cauchy = cauchy_surface_suite(100, 1000, seed + 1);
    auto covers = cover_suite(100, seed + 2);
    rep["trials"] = trials;
    rep["result"] = {{"causal_convexity", tally_json(conv)},
                     {"cauchy_surfaces", tally_json(cauchy)},
                     {"covers", tally_json(covers)}};
    ok = conv.violations == 0 && cauchy.violations == 0 && covers.violations == 0;
  } else if (command == "render") {
    RenderStats st;
    res.svg = render_svg(need(scenario, command), &st);
    rep["result"] = {{"regions", st.regions},
                     {"worldlines", st.worldlines},
                     {"probe_routes", st.probe_routes},
                     {"light_cones", st.light_cones}};
  } else {
    throw Error(ErrorKind::Parse, "unknown command '" + command + "'");
  }
  rep["passed"] = ok;
  res.exit_code = ok ? exit_pass : exit_fail;
  return res;
}

}  // namespace causal_ops
