// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "causal_ops/commands.hpp"

using namespace causal_ops;
namespace fs = std::filesystem;

namespace {

const std::string scenarios = CAUSAL_OPS_SCENARIOS;
const std::string cli = CAUSAL_OPS_CLI;

// Tolerances and limits, pinned here.
constexpr double state_tol = 1e-12;
constexpr double witness_min = 0.49;
constexpr double bfr_tol = 1e-10;
constexpr double negative_min = 0.49;
constexpr double reconstruction_tol = 1e-8;
constexpr double fv_tol = 1e-9;
constexpr double factor_tol = 1e-9;
constexpr double probe_signal = 1e-6;
constexpr double probe_quiet = 1e-9;

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool in_time = limit_s <= 0 || secs < limit_s;
  bool pass = o.ok && in_time;
  if (!pass) ++failures;
  char head[160];
  if (limit_s > 0)
    std::snprintf(head, sizeof head, "%s %d %s (%.2f s, limit %.0f s)", pass ? "PASS" : "FAIL", id, name.c_str(), secs,
                  limit_s);
  else
    std::snprintf(head, sizeof head, "%s %d %s (%.2f s)", pass ? "PASS" : "FAIL", id, name.c_str(), secs);
  std::cout << head << ": " << o.detail << (in_time ? "" : " [over time limit]") << std::endl;
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main() {
  Scenario bell = load_scenario(scenarios + "/sorkin_bell.json");

  criterion(1, "Sorkin reproduction", 1.0, [&] {
    CommandResult cmd = run_command("sorkin", bell, {});
    const SorkinSpec& sp = *bell.sorkin;
    SorkinScenario sc;
    sc.o_a = bell.region(bell.party(sp.alice)->region)->diamond;
    sc.o_b = bell.region(bell.party(sp.bob)->region)->diamond;
    sc.o_c = bell.region(bell.party(sp.charlie)->region)->diamond;
    sc.cut = Bipartition{bell.party(sp.alice)->factors, bell.party(sp.charlie)->factors};
    sc.omega = scenario_state(bell, sp.state);
    for (auto& a : bell.party(sp.alice)->alternatives) sc.alternatives.push_back({a, scenario_channel(bell, a)});
    sc.bob = scenario_channel(bell, sp.bob_operation);
    SorkinReport rep = run_sorkin(sc);
    double e_abstain = -1, e_flip = -1;
    for (std::size_t i = 0; i < rep.names.size(); ++i) {
      if (rep.names[i] == "abstain") e_abstain = frobenius(rep.charlie_states[i] - identity(2) / 2.0);
      if (rep.names[i] == "flip") e_flip = frobenius(rep.charlie_states[i] - projector(ket(2, 0)));
    }
    bool ok = cmd.exit_code == exit_pass && e_abstain >= 0 && e_abstain <= state_tol && e_flip >= 0 &&
              e_flip <= state_tol && std::abs(rep.max_distance - 0.5) <= state_tol;
    return Outcome{ok, "abstain err " + fmt("%.1e", e_abstain) + ", flip err " + fmt("%.1e", e_flip) +
                           ", trace distance " + fmt("%.15f", rep.max_distance)};
  });

  criterion(2, "Classification", 5.0, [&] {
    Bipartition cut{{"A"}, {"C"}};
    Channel incomplete = scenario_channel(bell, "bell_incomplete");
    Channel complete = scenario_channel(bell, "bell_complete");
    auto ri = classify_nosignalling(incomplete, cut);
    auto rc = classify_nosignalling(complete, cut);
    bool ok = !ri.nosig_a_to_c && !ri.nosig_c_to_a && ri.witness_a_to_c && ri.witness_c_to_a;
    double replay_ac = 0, replay_ca = 0;
    if (ok) {
      replay_ac = replay_witness(incomplete, *ri.witness_a_to_c);
      replay_ca = replay_witness(incomplete, *ri.witness_c_to_a);
      ok = replay_ac >= witness_min && replay_ca >= witness_min;
    }
    ok = ok && rc.nosig_a_to_c && rc.nosig_c_to_a;
    return Outcome{ok, "incomplete witnesses " + fmt("%.6f", replay_ac) + " / " + fmt("%.6f", replay_ca) +
                           ", complete heisenberg " + fmt("%.1e", std::max(rc.heisenberg_a_to_c, rc.heisenberg_c_to_a))};
  });

  criterion(3, "verify bfr (200 trials, seed 1)", 60.0, [&] {
    BfrReport r = verify_bfr(200, 1);
    bool ok = r.chain_checks == 200 && r.max_deviation <= bfr_tol && r.negative_control_deviation >= negative_min &&
              r.passed();
    return Outcome{ok, "max deviation " + fmt("%.2e", r.max_deviation) + ", chain " +
                           fmt("%.2e", r.max_chain_deviation) + ", negative control " +
                           fmt("%.6f", r.negative_control_deviation)};
  });

  criterion(4, "verify hybrid (50 trials)", 120.0, [&] {
    HybridReport r = verify_hybrid_equivalence(50, 1);
    bool ok = r.route_found && r.classified == 50 && r.decomposed == 50 && r.realised == 50 &&
              r.max_reconstruction <= reconstruction_tol && r.max_fv_distance <= fv_tol && r.negatives == 20 &&
              r.negatives_certified == 20;
    return Outcome{ok, std::to_string(r.classified) + "/" + std::to_string(r.decomposed) + "/" +
                           std::to_string(r.realised) + " classified/decomposed/realised, reconstruction " +
                           fmt("%.1e", r.max_reconstruction) + ", FV distance " + fmt("%.1e", r.max_fv_distance) +
                           ", negatives certified " + std::to_string(r.negatives_certified) + "/" +
                           std::to_string(r.negatives)};
  });

  criterion(5, "Scattering factorisation", 30.0, [&] {
    TensorSpace abc{{"A", 2}, {"B", 2}, {"C", 2}};
    std::mt19937_64 rng(5);
    std::size_t recovered = 0, rejected = 0;
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
      CMatrix u = kron(random_unitary_matrix(4, rng), identity(2)) * kron(identity(2), random_unitary_matrix(4, rng));
      auto res = factor_scattering(scattering_from_schrodinger(abc, u), {"A"}, {"B"}, {"C"});
      if (auto* f = std::get_if<ScatteringFactors>(&res)) {
        worst = std::max(worst, f->reconstruction);
        if (f->reconstruction <= factor_tol) ++recovered;
      }
    }
    for (int i = 0; i < 100; ++i) {
      auto res = factor_scattering(scattering_from_schrodinger(abc, random_unitary_matrix(8, rng)), {"A"}, {"B"}, {"C"});
      if (auto* nf = std::get_if<NotFactorable>(&res); nf && nf->witness.size() > 0) ++rejected;
    }
    return Outcome{recovered == 100 && rejected == 100, std::to_string(recovered) + "/100 recovered (worst " +
                                                            fmt("%.1e", worst) + "), " + std::to_string(rejected) +
                                                            "/100 Haar rejected with witness"};
  });

  criterion(6, "Geometry properties", 30.0, [&] {
    auto conv = causal_convexity_suite(10000, 1);
    auto cauchy = cauchy_surface_suite(100, 1000, 2);
    auto covers = cover_suite(100, 3);
    bool ok = conv.checks == 10000 && conv.violations == 0 && cauchy.checks >= 100 * 1000 && cauchy.violations == 0 &&
              covers.checks >= 100 && covers.violations == 0;
    return Outcome{ok, "convexity " + std::to_string(conv.violations) + "/" + std::to_string(conv.checks) +
                           ", cauchy " + std::to_string(cauchy.violations) + "/" + std::to_string(cauchy.checks) +
                           ", covers " + std::to_string(covers.violations) + "/" + std::to_string(covers.checks) +
                           " violations"};
  });

  criterion(7, "FV locality properties (100 trials)", 60.0, [&] {
    auto r = fv_locality_suite(100, 1);
    bool ok = r.passed();
    std::string d;
    for (auto [name, t] : {std::pair{"complement", r.fixes_complement}, {"nonselective", r.nonselective_locality},
                           {"probe-only", r.probe_only_effects}, {"transport", r.localisation_transport}}) {
      ok = ok && t.checks >= 100;
      d += std::string(d.empty() ? "" : ", ") + name + " " + std::to_string(t.violations) + "/" +
           std::to_string(t.checks);
    }
    return Outcome{ok, d + " violations, max residual " + fmt("%.1e", r.max_residual)};
  });

  criterion(8, "Classifier soundness cross-check", 0, [&] {
    std::mt19937_64 rng(8);
    TensorSpace ac{{"A", 2}, {"C", 2}};
    Bipartition cut{{"A"}, {"C"}};
    std::size_t contradictions = 0, nosig = 0, sig = 0;
    for (int i = 0; i < 50; ++i) {
      Channel l;
      switch (i % 3) {
        case 0: l = random_channel(ac, 1 + i % 4, 800 + i); break;
        case 1: {
          TensorSpace bc{{"B", 2}, {"C", 2}}, ab{{"A", 2}, {"B", 2}};
          l = make_semilocalisable(random_channel_between(bc, bc, 2, rng), random_channel_between(ab, ab, 2, rng),
                                   DensityOp{TensorSpace{{"B", 2}}, random_density_matrix(2, rng)});
          break;
        }
        default: {
          TensorSpace ar{{"A", 2}, {"R", 2}}, cs{{"C", 2}, {"S", 2}}, rs{{"R", 2}, {"S", 2}};
          l = make_localisable(random_channel_between(ar, ar, 2, rng), random_channel_between(cs, cs, 2, rng),
                               DensityOp{rs, random_density_matrix(4, rng)});
        }
      }
      auto r = classify_nosignalling(l, cut, i);
      for (auto [verdict, from, to] : {std::tuple{r.nosig_a_to_c, "A", "C"}, {r.nosig_c_to_a, "C", "A"}}) {
        double probed = sampled_signalling(l, {from}, {to}, 200, 1000 + i);
        (verdict ? nosig : sig)++;
        if (verdict && probed > probe_signal) ++contradictions;
        if (!verdict && probed <= probe_quiet) ++contradictions;
      }
    }
    return Outcome{contradictions == 0, std::to_string(contradictions) + " contradictions over " +
                                            std::to_string(nosig) + " no-signalling and " + std::to_string(sig) +
                                            " signalling verdicts"};
  });

  criterion(9, "Determinism", 0, [&] {
    fs::path dir = fs::temp_directory_path() / ("causal_ops_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    std::vector<std::string> runs;
    for (auto& c : command_names()) {
      std::string file;
      if (c == "check-geometry" || c == "render") file = "sorkin_bell.json";
      else if (c == "classify-channel") file = "hybrid_equiv.json";
      else if (c == "sorkin") file = "sorkin_bell.json";
      else if (c == "simulate-fv") file = "bfr_template.json";
      runs.push_back(c + (file.empty() ? "" : " '" + scenarios + "/" + file + "'") + " --seed 7");
    }
    runs.push_back("render '" + scenarios + "/bfr_template.json'");
    std::size_t identical = 0;
    std::string bad;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      std::string out[2];
      for (int rep = 0; rep < 2; ++rep) {
        fs::path p = dir / ("run" + std::to_string(rep));
        std::string cmd = "'" + cli + "' " + runs[k] + " >'" + p.string() + "' 2>&1";
        int rc = std::system(cmd.c_str());
        out[rep] = slurp(p) + "\nexit " + std::to_string(rc);
      }
      if (out[0] == out[1] && !out[0].empty()) ++identical;
      else bad += " [" + runs[k] + "]";
    }
    fs::remove_all(dir);
    return Outcome{identical == runs.size(),
                   std::to_string(identical) + "/" + std::to_string(runs.size()) + " commands byte-identical" + bad};
  });

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
