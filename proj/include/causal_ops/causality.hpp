#pragma once

// No-signalling classification, localisable and semilocalisable channels, the
// Sorkin protocol and the randomized harnesses for the two signalling theorems.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "causal_ops/fv.hpp"
#include "causal_ops/geometry.hpp"
#include "causal_ops/hybrid.hpp"
#include "causal_ops/quantum.hpp"

namespace causal_ops {

struct Bipartition {
  std::vector<std::string> a_labels;
  std::vector<std::string> c_labels;
};

inline void validate_bipartition(const TensorSpace& space, const Bipartition& p) {
  if (p.a_labels.empty() || p.c_labels.empty())
    throw Error(ErrorKind::InvalidValue, "bipartition sides must be non-empty");
  if (!detail::disjoint(p.a_labels, p.c_labels)) throw Error(ErrorKind::InvalidValue, "bipartition sides overlap");
  std::vector<std::string> all = p.a_labels;
  all.insert(all.end(), p.c_labels.begin(), p.c_labels.end());
  if (!detail::same_set(all, space.labels()))
    throw Error(ErrorKind::DimensionMismatch, "bipartition does not cover the system factors");
}

/// A local operation Lambda on the sender, an input state and the receiver effect separating
/// Tr_sender L(rho) (effect's positive side) from Tr_sender L(Lambda(rho)).
struct Witness {
  Channel lambda;
  DensityOp rho;
  Effect effect;
  double deviation = 0.0;
};

struct CausalityReport {
  bool nosig_a_to_c = true;
  bool nosig_c_to_a = true;
  double heisenberg_a_to_c = 0.0;
  double heisenberg_c_to_a = 0.0;
  std::optional<Witness> witness_a_to_c;
  std::optional<Witness> witness_c_to_a;
};

inline constexpr double nosig_tolerance = 1e-9;

namespace detail {

/// Receiver marginals without and with the local operation.
inline std::pair<CMatrix, CMatrix> receiver_marginals(const Channel& l, const std::vector<std::string>& to,
                                                      const Channel& lambda_embedded, const CMatrix& rho) {
  const TensorSpace& space = l.space_in;
  auto keep = space.restricted(to).labels();
  return {partial_trace(l.apply(rho), space, keep), partial_trace(l.apply(lambda_embedded.apply(rho)), space, keep)};
}

inline CMatrix hermitian_expi(const CMatrix& h, double step) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es((h + h.adjoint()) / 2.0);
  CVector ph(es.eigenvalues().size());
  for (int i = 0; i < ph.size(); ++i) ph(i) = std::exp(Complex(0.0, step * es.eigenvalues()(i)));
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

/// max over matrix units c on `to` of ||X - 1_from (x) Tr_from(X)/d_from||, X = L^dagger(1 (x) c).
inline std::pair<double, CMatrix> heisenberg_deviation(const Channel& l, const std::vector<std::string>& from,
                                                       const std::vector<std::string>& to) {
  const TensorSpace& space = l.space_in;
  TensorSpace ts = space.restricted(to);
  double df = space.dim_of(from);
  DualMap dual = hs_adjoint(l);
  double worst = 0.0;
  CMatrix worst_c = CMatrix::Zero(ts.dim(), ts.dim());
  for (int i = 0; i < ts.dim(); ++i)
    for (int j = 0; j < ts.dim(); ++j) {
      CMatrix c = matrix_unit(ts.dim(), i, j);
      CMatrix x = dual.apply(tensor_embed(c, ts.labels(), space));
      CMatrix y = partial_trace(x, space, ts.labels()) / df;
      double dev = frobenius(x - tensor_embed(y, ts.labels(), space));
      if (dev > worst) {
        worst = dev;
        worst_c = c;
      }
    }
  return {worst, worst_c};
}

inline Witness make_witness(const Channel& l, const std::vector<std::string>& from, const std::vector<std::string>& to,
                            const CMatrix& u, const CVector& psi) {
  const TensorSpace& space = l.space_in;
  TensorSpace fs = space.restricted(from);
  Channel lambda = unitary_channel(fs, u);
  CMatrix rho = projector(psi);
  auto [s0, s1] = receiver_marginals(l, to, embed_channel(lambda, space), rho);
  TensorSpace ts = space.restricted(to);
  return Witness{lambda, DensityOp{space, rho}, Effect{ts, positive_part_projector(s0 - s1)}, trace_distance(s0, s1)};
}

/// Random-restart hill climbing over pure rho and unitary Lambda on the sender, seeded with
/// basis states, states built from the violating observable, and Weyl unitaries.
inline Witness search_witness(const Channel& l, const std::vector<std::string>& from,
                              const std::vector<std::string>& to, const CMatrix& violating_c, std::uint64_t seed,
                              int restarts = 64, int iterations = 60) {
  const TensorSpace& space = l.space_in;
  TensorSpace fs = space.restricted(from);
  TensorSpace ts = space.restricted(to);
  int d = space.dim(), df = fs.dim();
  auto score = [&](const CMatrix& u, const CVector& psi) {
    CMatrix rho = projector(psi);
    CMatrix ue = tensor_embed(u, fs.labels(), space);
    CMatrix s0 = partial_trace(l.apply(rho), space, ts.labels());
    CMatrix s1 = partial_trace(l.apply(ue * rho * ue.adjoint()), space, ts.labels());
    return trace_distance(s0, s1);
  };

  std::vector<CMatrix> unitaries;
  for (auto& [name, w] : weyl_basis(df)) unitaries.push_back(w);
  std::vector<CVector> states;
  for (int i = 0; i < d; ++i) states.push_back(ket(d, i));
  CMatrix x = hs_adjoint(l).apply(tensor_embed(violating_c, ts.labels(), space));
  CMatrix diff = x - tensor_embed(partial_trace(x, space, ts.labels()) / double(df), ts.labels(), space);
  for (const CMatrix& h : {CMatrix((diff + diff.adjoint()) / 2.0), CMatrix((diff - diff.adjoint()) / Complex(0, 2))}) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    states.push_back(es.eigenvectors().col(0));
    states.push_back(es.eigenvectors().col(d - 1));
  }

  CMatrix best_u = identity(df);
  CVector best_psi = ket(d, 0);
  double best = -1.0;
  for (auto& psi : states)
    for (auto& u : unitaries) {
      double s = score(u, psi);
      if (s > best + 1e-15) best = s, best_u = u, best_psi = psi;
    }

  std::mt19937_64 rng(seed);
  for (int r = 0; r < restarts; ++r) {
    CMatrix u = random_unitary_matrix(df, rng);
    CVector psi = random_pure_vector(d, rng);
    double cur = score(u, psi);
    for (int it = 0; it < iterations; ++it) {
      double step = 0.5 * std::pow(0.93, it);
      CMatrix u2 = u * hermitian_expi(random_hermitian(df, rng), step);
      CVector psi2 = psi + step * ginibre(d, 1, rng).col(0);
      psi2.normalize();
      double s = score(u2, psi2);
      if (s > cur) cur = s, u = u2, psi = psi2;
    }
    if (cur > best + 1e-15) best = cur, best_u = u, best_psi = psi;
  }
  return make_witness(l, from, to, best_u, best_psi);
}

inline void require_nonselective(const Channel& l) {
  if (!(l.space_in == l.space_out)) throw Error(ErrorKind::DimensionMismatch, "channel must map a space to itself");
  if (!l.nonselective()) throw Error(ErrorKind::NotNonselective, "channel is not trace preserving");
}

}  // namespace detail

/// Recomputes the trace distance of the receiver marginals for a stored witness.
inline double replay_witness(const Channel& l, const Witness& w) {
  auto from = w.lambda.space_in.labels();
  auto to = l.space_in.complement(from).labels();
  auto [s0, s1] = detail::receiver_marginals(l, to, embed_channel(w.lambda, l.space_in), w.rho.mat);
  return trace_distance(s0, s1);
}

inline CausalityReport classify_nosignalling(const Channel& l, const Bipartition& p, std::uint64_t seed = 0x51c) {
  detail::require_nonselective(l);
  validate_bipartition(l.space_in, p);
  CausalityReport r;
  auto [dac, cac] = detail::heisenberg_deviation(l, p.a_labels, p.c_labels);
  auto [dca, cca] = detail::heisenberg_deviation(l, p.c_labels, p.a_labels);
  r.heisenberg_a_to_c = dac;
  r.heisenberg_c_to_a = dca;
  r.nosig_a_to_c = dac <= nosig_tolerance;
  r.nosig_c_to_a = dca <= nosig_tolerance;
  if (!r.nosig_a_to_c) r.witness_a_to_c = detail::search_witness(l, p.a_labels, p.c_labels, cac, seed);
  if (!r.nosig_c_to_a) r.witness_c_to_a = detail::search_witness(l, p.c_labels, p.a_labels, cca, seed + 1);
  return r;
}

/// Largest receiver-marginal deviation over random (Lambda, rho) pairs, Lambda a random channel on `from`.
inline double sampled_signalling(const Channel& l, const std::vector<std::string>& from,
                                 const std::vector<std::string>& to, std::size_t samples, std::uint64_t seed) {
  detail::require_nonselective(l);
  std::mt19937_64 rng(seed);
  TensorSpace fs = l.space_in.restricted(from);
  double worst = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    int k = std::uniform_int_distribution<int>(1, 3)(rng);
    Channel lambda = random_channel_between(fs, fs, k, rng);
    CMatrix rho = random_density_matrix(l.space_in.dim(), rng);
    auto [s0, s1] = detail::receiver_marginals(l, to, embed_channel(lambda, l.space_in), rho);
    worst = std::max(worst, trace_distance(s0, s1));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Localisable channels.

/// rho_AC -> Tr_RS((L_AR (x) L_CS)(rho_AC (x) rho_RS)). R and S are the factors of rho_RS
/// that the respective component touches.
inline Channel make_localisable(const Channel& l_ar, const Channel& l_cs, const DensityOp& rho_rs) {
  for (auto* c : {&l_ar, &l_cs}) detail::require_nonselective(*c);
  std::vector<std::string> r, s;
  for (auto& l : rho_rs.space.labels()) {
    bool in_ar = l_ar.space_in.has(l), in_cs = l_cs.space_in.has(l);
    if (in_ar == in_cs) throw Error(ErrorKind::DimensionMismatch, "auxiliary factor '" + l + "' must belong to one side");
    (in_ar ? r : s).push_back(l);
  }
  TensorSpace a = l_ar.space_in.complement(r);
  TensorSpace c = l_cs.space_in.complement(s);
  if (a.size() == 0 || c.size() == 0) throw Error(ErrorKind::DimensionMismatch, "each side needs a system factor");
  TensorSpace sys = a.concat(c);
  TensorSpace full = sys.concat(rho_rs.space);
  Channel ar = embed_channel(l_ar, full);
  Channel cs = embed_channel(l_cs, full);
  Channel out = channel_from_map(sys, sys, [&](const CMatrix& x) {
    CMatrix y = cs.apply(ar.apply(kron(x, rho_rs.mat)));
    return partial_trace(y, full, sys.labels());
  });
  auto v = validate_channel(out);
  if (!v.cp || !v.tp) throw Error(ErrorKind::InvalidValue, "localisable composition is not a channel");
  return out;
}

/// rho -> P rho P + (1-P) rho (1-P) with P the projector onto (|00> + |11>)/sqrt2.
inline Channel incomplete_bell_measurement(const std::string& a = "A", const std::string& c = "C") {
  TensorSpace s({{a, 2}, {c, 2}});
  CVector phi = (ket(4, 0) + ket(4, 3)) / std::sqrt(2.0);
  CMatrix p = projector(phi);
  return Channel{s, s, {p, identity(4) - p}};
}

/// Dephasing in the Bell basis, assembled from controlled Paulis on each side and a shared
/// maximally entangled pair of ququarts.
inline Channel complete_bell_measurement(const std::string& a = "A", const std::string& c = "C") {
  std::vector<CMatrix> paulis{identity(2), pauli_x(), pauli_z(), pauli_y()};
  auto controlled = [&] {
    CMatrix u = CMatrix::Zero(8, 8);
    for (int g = 0; g < 4; ++g) u += kron(paulis[g], matrix_unit(4, g, g));
    return u;
  };
  std::string r = a + ".aux", s = c + ".aux";
  TensorSpace ar({{a, 2}, {r, 4}}), cs({{c, 2}, {s, 4}}), rs({{r, 4}, {s, 4}});
  CVector phi = CVector::Zero(16);
  for (int g = 0; g < 4; ++g) phi(g * 4 + g) = 0.5;
  return make_localisable(unitary_channel(ar, controlled()), unitary_channel(cs, controlled()),
                          DensityOp{rs, projector(phi)});
}

// ---------------------------------------------------------------------------
// Semilocalisable decomposition.

struct CertifiedFailure {
  std::string reason;
  double residual = 0.0;
  std::optional<Witness> witness;
};

namespace detail {

/// Permutation matrix taking the ordering `from` to `to` (same factors).
inline CMatrix permutation_matrix(const TensorSpace& from, const TensorSpace& to) {
  auto perm = permutation(from, to);
  CMatrix m = CMatrix::Zero(from.dim(), from.dim());
  for (int i = 0; i < from.dim(); ++i) m(perm[i], i) = 1.0;
  return m;
}

inline std::string fresh_label(std::string base, const TensorSpace& space) {
  while (space.has(base)) base += "'";
  return base;
}

}  // namespace detail

/// Builds (rho_B, L_BC, L_AB) for a channel that does not signal from A to C. The Stinespring
/// isometry of L is factored through the dilation of the induced map on C.
inline std::variant<SemilocalisableDecomposition, CertifiedFailure> decompose_semilocalisable(
    const Channel& l, const Bipartition& p, std::uint64_t seed = 0x51c) {
  auto report = classify_nosignalling(l, p, seed);
  if (!report.nosig_a_to_c)
    return CertifiedFailure{"signalling from A to C", report.heisenberg_a_to_c, report.witness_a_to_c};

  TensorSpace sa = l.space_in.ordered(p.a_labels), sc = l.space_in.ordered(p.c_labels);
  TensorSpace sys = sa.concat(sc);
  Channel lr = minimal_kraus(reorder_channel(l, sys));
  int da = sa.dim(), dc = sc.dim(), df = static_cast<int>(lr.kraus.size());

  // Induced map on C: X -> Tr_A L(1_A/d_A (x) X).
  Channel g = channel_from_map(sc, sc, [&](const CMatrix& x) {
    return partial_trace(lr.apply(kron(identity(da) / double(da), x)), sys, sc.labels());
  });
  int r = static_cast<int>(g.kraus.size());

  // M[(c',c), k] = G_k(c', c); for every (a', f, a) solve sum_k M x_k = V|a,c> components.
  CMatrix m(dc * dc, r);
  for (int k = 0; k < r; ++k)
    for (int c2 = 0; c2 < dc; ++c2)
      for (int c = 0; c < dc; ++c) m(c2 * dc + c, k) = g.kraus[k](c2, c);
  CMatrix y(dc * dc, da * df * da);
  for (int a2 = 0; a2 < da; ++a2)
    for (int f = 0; f < df; ++f)
      for (int a = 0; a < da; ++a)
        for (int c2 = 0; c2 < dc; ++c2)
          for (int c = 0; c < dc; ++c)
            y(c2 * dc + c, (a2 * df + f) * da + a) = lr.kraus[f](a2 * dc + c2, a * dc + c);
  CMatrix sol = m.colPivHouseholderQr().solve(y);
  CMatrix rmat(da * df, da * r);
  for (int a2 = 0; a2 < da; ++a2)
    for (int f = 0; f < df; ++f)
      for (int a = 0; a < da; ++a)
        for (int k = 0; k < r; ++k) rmat(a2 * df + f, a * r + k) = sol(k, (a2 * df + f) * da + a);

  // Residual of V = (R (x) 1_C)(1_A (x) W) in the ordering (A, C, F).
  CMatrix w(dc * r, dc);
  for (int k = 0; k < r; ++k)
    for (int c2 = 0; c2 < dc; ++c2)
      for (int c = 0; c < dc; ++c) w(c2 * r + k, c) = g.kraus[k](c2, c);
  TensorSpace ace({{"a", da}, {"c", dc}, {"e", r}}), aec({{"a", da}, {"e", r}, {"c", dc}});
  TensorSpace afc({{"a", da}, {"f", df}, {"c", dc}}), acf({{"a", da}, {"c", dc}, {"f", df}});
  CMatrix q = detail::permutation_matrix(afc, acf) * kron(rmat, identity(dc)) * detail::permutation_matrix(ace, aec) *
              kron(identity(da), w);
  CMatrix v(da * dc * df, da * dc);
  for (int f = 0; f < df; ++f)
    for (int o = 0; o < da * dc; ++o)
      for (int i = 0; i < da * dc; ++i) v(o * df + f, i) = lr.kraus[f](o, i);
  double residual = frobenius(v - q);
  if (residual > 1e-8) return CertifiedFailure{"Stinespring isometry does not factor through C", residual, {}};

  std::string b = detail::fresh_label("B", sys);
  TensorSpace sb({{b, r}});
  SemilocalisableDecomposition d;
  d.b_label = b;
  d.b_dim = r;
  d.rho_B = DensityOp{sb, matrix_unit(r, 0, 0)};

  // L_BC: |0>_B |c> -> sum_k |k>_B G_k |c>, completed to a unitary.
  CMatrix iso(r * dc, dc);
  for (int k = 0; k < r; ++k)
    for (int c2 = 0; c2 < dc; ++c2)
      for (int c = 0; c < dc; ++c) iso(k * dc + c2, c) = g.kraus[k](c2, c);
  CMatrix rest = orthogonal_complement(iso);
  CMatrix u(r * dc, r * dc);
  u.leftCols(dc) = iso;
  u.rightCols(r * dc - dc) = rest;
  d.L_BC = Channel{sb.concat(sc), sb.concat(sc), {u}};

  // L_AB Kraus (1_A (x) |0>_B)(1_A (x) <f|) R.
  d.L_AB = Channel{sa.concat(sb), sa.concat(sb), {}};
  for (int f = 0; f < df; ++f) {
    CMatrix k = CMatrix::Zero(da * r, da * r);
    for (int a2 = 0; a2 < da; ++a2) k.row(a2 * r) = rmat.row(a2 * df + f);
    d.L_AB.kraus.push_back(k);
  }

  Channel rebuilt = make_semilocalisable(d);
  d.reconstruction = choi_distance(rebuilt, lr);
  if (d.reconstruction > 1e-8) return CertifiedFailure{"reconstruction mismatch", d.reconstruction, {}};
  return d;
}

// ---------------------------------------------------------------------------
// Sorkin protocol.

struct NamedChannel {
  std::string name;
  Channel channel;  // on the sender's factors
};

struct SorkinScenario {
  Diamond o_a, o_b, o_c;
  Bipartition cut;
  DensityOp omega;
  std::vector<NamedChannel> alternatives;
  Channel bob;
};

struct SorkinReport {
  SorkinGeometryReport geometry;
  std::vector<std::string> names;
  std::vector<CMatrix> charlie_states;
  std::vector<std::vector<double>> distances;
  double max_distance = 0.0;
  std::pair<std::size_t, std::size_t> best_pair{0, 0};
  CMatrix optimal_effect;  // positive part of states[first] - states[second]
};

inline SorkinReport run_sorkin(const SorkinScenario& s, std::size_t samples = 8, std::uint64_t seed = 1) {
  SorkinReport rep;
  rep.geometry = sorkin_geometry_check(s.o_a, s.o_b, s.o_c, samples, seed);
  if (!rep.geometry.ordered || !rep.geometry.disjoint_ac)
    throw Error(ErrorKind::PreconditionViolated, "regions are not causally ordered with O_A and O_C spacelike");
  const TensorSpace& space = s.omega.space;
  validate_bipartition(space, s.cut);
  detail::require_nonselective(s.bob);
  if (!detail::same_set(s.bob.space_in.labels(), space.labels()))
    throw Error(ErrorKind::DimensionMismatch, "Bob's operation must act on the system factors");
  Channel bob = reorder_channel(s.bob, space);
  auto keep = space.restricted(s.cut.c_labels).labels();
  for (auto& alt : s.alternatives) {
    detail::require_nonselective(alt.channel);
    if (!detail::subset(alt.channel.space_in.labels(), s.cut.a_labels))
      throw Error(ErrorKind::InvalidValue, "alternative '" + alt.name + "' is not local to A");
    CMatrix rho = bob.apply(embed_channel(alt.channel, space).apply(s.omega.mat));
    rep.names.push_back(alt.name);
    rep.charlie_states.push_back(partial_trace(rho, space, keep));
  }
  std::size_t n = rep.charlie_states.size();
  rep.distances.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = trace_distance(rep.charlie_states[i], rep.charlie_states[j]);
      rep.distances[i][j] = rep.distances[j][i] = d;
      if (d > rep.max_distance) rep.max_distance = d, rep.best_pair = {i, j};
    }
  int dc = space.dim_of(keep);
  rep.optimal_effect = n >= 2 ? positive_part_projector(rep.charlie_states[rep.best_pair.first] -
                                                        rep.charlie_states[rep.best_pair.second])
                              : CMatrix(CMatrix::Zero(dc, dc));
  return rep;
}

// ---------------------------------------------------------------------------
// Harness: FV measurements do not enable signalling.

struct Dims {
  int a = 2;
  int b = 2;
  int c = 2;

  bool operator==(const Dims&) const = default;
};

struct BfrReport {
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  Dims dims;
  double tolerance = 1e-10;
  double max_deviation = 0.0;
  double max_chain_deviation = 0.0;
  std::size_t chain_checks = 0;
  std::size_t geometry_failures = 0;
  std::size_t route_failures = 0;
  double negative_control_deviation = 0.0;

  bool passed() const {
    return max_deviation <= tolerance && max_chain_deviation <= tolerance && geometry_failures == 0 &&
           route_failures == 0 && negative_control_deviation >= 0.49;
  }
};

struct SorkinTemplate {
  Diamond o_a, o_c;
  Worldline gamma_a, gamma_c;
  Rational v_a, v_c;
};

namespace detail {

inline Point center(const Diamond& d) { return Point{(d.bottom.t + d.top.t) / 2, (d.bottom.x + d.top.x) / 2}; }

/// O_A around the origin, O_C far to the right; straight worldlines of opposite drift through the centres.
inline SorkinTemplate random_template(std::mt19937_64& rng) {
  Rational ha = random_rational(rng, Rational(1, 2), Rational(3, 2), 8);
  Rational hc = random_rational(rng, Rational(1, 2), Rational(3, 2), 8);
  Rational tc = random_rational(rng, -1, 2, 8);
  Rational sep = random_rational(rng, 6, 9, 8);
  Rational va = random_rational(rng, Rational(1, 8), Rational(1, 2), 8);
  Rational vc = random_rational(rng, Rational(1, 8), Rational(1, 2), 8);
  if (std::uniform_int_distribution<int>(0, 1)(rng)) va = -va;
  else vc = -vc;
  SorkinTemplate t;
  t.o_a = Diamond{Point{-ha, 0}, Point{ha, 0}, false};
  t.o_c = Diamond{Point{tc - hc, sep}, Point{tc + hc, sep}, false};
  t.v_a = va;
  t.v_c = vc;
  t.gamma_a = straight_worldline(center(t.o_a), va);
  t.gamma_c = straight_worldline(center(t.o_c), vc);
  return t;
}

inline SorkinTemplate mirrored(const SorkinTemplate& t) {
  return SorkinTemplate{mirror(t.o_a), mirror(t.o_c), mirror(t.gamma_a), mirror(t.gamma_c), -t.v_a, -t.v_c};
}

/// A probe that meets only `line` (at the centre of `region`) and runs parallel to `other_velocity`.
inline FvMeasurement local_probe(const HybridNet& net, const Diamond& region, const Rational& other_velocity,
                                 const std::string& system, const std::string& probe, int dim, bool selective,
                                 std::mt19937_64& rng) {
  Point c = center(region);
  Rational h = (region.top.t - region.bottom.t) / 4;
  Worldline route = straight_worldline(c, other_velocity);
  Diamond k{Point{c.t - h, c.x}, Point{c.t + h, c.x}, true};
  int ds = net.system(system).dim;
  TensorSpace us({{system, ds}, {probe, dim}});
  UnitaryOp u{us, random_unitary_matrix(ds * dim, rng)};
  FvMeasurement m;
  m.probe.push_back({probe, route, dim});
  m.K = k;
  m.theta = scattering_from_route(route, net, {{probe, dim}}, k, {u});
  TensorSpace ps({{probe, dim}});
  m.sigma = DensityOp{ps, random_density_matrix(dim, rng)};
  m.b = Effect{ps, selective ? random_effect_matrix(dim, rng) : identity(dim)};
  return m;
}

}  // namespace detail

/// Bob's probe crosses gamma_C in the coupling zone and then gamma_A.
inline std::optional<FvMeasurement> random_bob(const HybridNet& net, const SorkinTemplate& t, int db,
                                               std::mt19937_64& rng) {
  auto route = find_probe_route(t.o_a, t.o_c, t.gamma_a, t.gamma_c);
  if (!route) return std::nullopt;
  Diamond k{route->vertices[0], route->vertices[1], true};
  int da = net.system("A").dim, dc = net.system("C").dim;
  UnitaryOp u_bc{TensorSpace({{"C", dc}, {"B", db}}), random_unitary_matrix(dc * db, rng)};
  UnitaryOp u_ab{TensorSpace({{"A", da}, {"B", db}}), random_unitary_matrix(da * db, rng)};
  FvMeasurement m;
  m.probe.push_back({"B", *route, db});
  m.K = k;
  m.theta = scattering_from_route(*route, net, {{"B", db}}, k, {u_bc, u_ab});
  TensorSpace ps({{"B", db}});
  m.sigma = DensityOp{ps, random_density_matrix(db, rng)};
  m.b = Effect{ps, identity(db)};
  return m;
}

/// Replacing Bob's scattering by Ad_CNOT from A to C lets Alice's flip reach Charlie.
inline double bfr_negative_control() {
  TensorSpace space({{"A", 2}, {"C", 2}, {"B", 1}});
  CMatrix cnot = kron(projector(ket(2, 0)), identity(2)) + kron(projector(ket(2, 1)), pauli_x());
  ScatteringMorphism theta = scattering_from_schrodinger(space, kron(cnot, identity(1)));
  TensorSpace ps({{"B", 1}});
  Channel bob = instrument_channel(theta, DensityOp{ps, identity(1)}, identity(1));
  TensorSpace sys({{"A", 2}, {"C", 2}});
  CMatrix omega = projector(ket(4, 0));
  CMatrix flip = tensor_embed(pauli_x(), {"A"}, sys);
  CMatrix c = tensor_embed(projector(ket(2, 1)), {"C"}, sys);
  double with = (bob.apply(flip * omega * flip) * c).trace().real();
  double without = (bob.apply(omega) * c).trace().real();
  return std::abs(with - without);
}

inline BfrReport verify_bfr(std::size_t trials, std::uint64_t seed, Dims dims = {}) {
  BfrReport rep;
  rep.seed = seed;
  rep.trials = trials;
  rep.dims = dims;
  rep.negative_control_deviation = bfr_negative_control();
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + trial);
    SorkinTemplate t = detail::random_template(rng);
    if (trial % 2 == 1) t = detail::mirrored(t);
    HybridNet net = make_net({{"A", t.gamma_a, dims.a}, {"C", t.gamma_c, dims.c}});
    TensorSpace sys = net.space();

    auto bob = random_bob(net, t, dims.b, rng);
    if (!bob) {
      ++rep.route_failures;
      continue;
    }
    auto geo = sorkin_geometry_check(t.o_a, bob->K, t.o_c, 0, seed);
    if (!geo.ordered || !geo.disjoint_ac) {
      ++rep.geometry_failures;
      continue;
    }
    Channel gamma_b = nonselective_channel(*bob);
    int k = std::uniform_int_distribution<int>(1, 3)(rng);
    Channel gamma_a = embed_channel(random_channel(TensorSpace({{"A", dims.a}}), k, rng()), sys);
    CMatrix omega = random_density_matrix(sys.dim(), rng);
    CMatrix h = random_hermitian(dims.c, rng);
    h /= hermitian_eigenvalues(h).cwiseAbs().maxCoeff();
    CMatrix c = tensor_embed(h, {"C"}, sys);
    double with = (gamma_b.apply(gamma_a.apply(omega)) * c).trace().real();
    double without = (gamma_b.apply(omega) * c).trace().real();
    rep.max_deviation = std::max(rep.max_deviation, std::abs(with - without));

    // Three FV parties in causal order; Alice acting nonselectively leaves Charlie's statistics alone.
    FvMeasurement alice = detail::local_probe(net, t.o_a, t.v_c, "A", "PA", 2, false, rng);
    FvMeasurement charlie = detail::local_probe(net, t.o_c, t.v_a, "C", "PC", 2, true, rng);
    DensityOp w{sys, omega};
    auto full = compose_measurements({alice, *bob, charlie}, w);
    auto idle = compose_measurements({*bob, charlie}, w);
    ++rep.chain_checks;
    rep.max_chain_deviation = std::max(rep.max_chain_deviation, std::abs(full.expectations[2] - idle.expectations[1]));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Harness: FV-induced, semilocalisable and no-signalling coincide.

struct HybridGeometry {
  Diamond o_a, o_c;
  Worldline gamma_a, gamma_c;
};

inline HybridGeometry default_hybrid_geometry() {
  return HybridGeometry{Diamond{Point{-1, 0}, Point{1, 0}, false}, Diamond{Point{0, 6}, Point{2, 6}, false},
                        vertical_worldline(0), vertical_worldline(6)};
}

struct HybridReport {
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  Dims dims;
  bool route_found = false;
  std::size_t classified = 0;
  std::size_t decomposed = 0;
  std::size_t realised = 0;
  double max_heisenberg = 0.0;
  double max_reconstruction = 0.0;
  double max_fv_distance = 0.0;
  std::size_t negatives = 0;
  std::size_t negatives_certified = 0;
  std::size_t negative_attempts = 0;
  int trivial_b_dim = 0;
  bool trivial_ok = false;

  bool passed() const {
    return route_found && classified == trials && decomposed == trials && realised == trials && negatives == 20 &&
           negatives_certified == negatives && trivial_ok;
  }
};

inline HybridReport verify_hybrid_equivalence(std::size_t trials, std::uint64_t seed, Dims dims = {},
                                              const HybridGeometry& geo = default_hybrid_geometry()) {
  HybridReport rep;
  rep.seed = seed;
  rep.trials = trials;
  rep.dims = dims;
  rep.route_found = causally_disjoint(closure(geo.o_a), closure(geo.o_c)) &&
                    find_probe_route(geo.o_a, geo.o_c, geo.gamma_a, geo.gamma_c).has_value();
  if (!rep.route_found) return rep;
  TensorSpace sys({{"A", dims.a}, {"C", dims.c}});
  Bipartition cut{{"A"}, {"C"}};

  auto realise = [&](const SemilocalisableDecomposition& d, const Channel& l) {
    auto fv = fv_from_semilocalisable(d, geo.o_a, geo.o_c, geo.gamma_a, geo.gamma_c);
    return choi_distance(reorder_channel(nonselective_channel(fv.measurement), sys), l);
  };

  {
    auto res = decompose_semilocalisable(identity_channel(sys), cut);
    if (auto* d = std::get_if<SemilocalisableDecomposition>(&res)) {
      rep.trivial_b_dim = d->b_dim;
      rep.trivial_ok = realise(*d, identity_channel(sys)) <= 1e-9;
    }
  }

  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + trial);
    TensorSpace bc({{"B", dims.b}, {"C", dims.c}}), ab({{"A", dims.a}, {"B", dims.b}});
    int k1 = std::uniform_int_distribution<int>(1, 2)(rng), k2 = std::uniform_int_distribution<int>(1, 2)(rng);
    Channel l_bc = random_channel_between(bc, bc, k1, rng);
    Channel l_ab = random_channel_between(ab, ab, k2, rng);
    DensityOp rho_b{TensorSpace({{"B", dims.b}}), random_density_matrix(dims.b, rng)};
    Channel l = make_semilocalisable(l_bc, l_ab, rho_b);

    auto cls = classify_nosignalling(l, cut, rng());
    rep.max_heisenberg = std::max(rep.max_heisenberg, cls.heisenberg_a_to_c);
    if (cls.nosig_a_to_c) ++rep.classified;
    auto res = decompose_semilocalisable(l, cut, rng());
    auto* d = std::get_if<SemilocalisableDecomposition>(&res);
    if (!d) continue;
    rep.max_reconstruction = std::max(rep.max_reconstruction, d->reconstruction);
    ++rep.decomposed;
    double dist = realise(*d, l);
    rep.max_fv_distance = std::max(rep.max_fv_distance, dist);
    if (dist <= 1e-9) ++rep.realised;
  }

  std::mt19937_64 rng(seed ^ 0xa5a5a5a5ULL);
  while (rep.negatives < 20 && rep.negative_attempts < 200) {
    ++rep.negative_attempts;
    Channel l = unitary_channel(sys, random_unitary_matrix(sys.dim(), rng));
    auto cls = classify_nosignalling(l, cut, rng());
    if (cls.nosig_a_to_c) continue;
    ++rep.negatives;
    auto res = decompose_semilocalisable(l, cut);
    if (std::holds_alternative<CertifiedFailure>(res)) ++rep.negatives_certified;
  }
  return rep;
}

}  // namespace causal_ops
