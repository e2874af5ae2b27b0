#pragma once

// Measurement schemes on the hybrid model: a probe rides a route worldline,
// couples to system factors where the worldlines cross, and is read out later.
//
// Convention: the scattering morphism is the Heisenberg map Theta(a) = u a u^dagger.
// States therefore evolve as rho -> u^dagger rho u. Unitaries supplied per crossing
// are Schrodinger-picture evolutions U_k, so u = (U_n ... U_1)^dagger.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "causal_ops/geometry.hpp"
#include "causal_ops/hybrid.hpp"
#include "causal_ops/quantum.hpp"

namespace causal_ops {

struct Interaction {
  Point event;
  std::vector<std::string> labels;  // system factors crossed here plus the probe factors
};

struct ScatteringMorphism {
  TensorSpace space;  // system factors then probe factors
  UnitaryOp u;
  std::vector<Interaction> interactions;

  CMatrix apply(const CMatrix& a) const { return u.mat * a * u.mat.adjoint(); }
};

inline ScatteringMorphism identity_scattering(const TensorSpace& space) {
  return ScatteringMorphism{space, UnitaryOp{space, identity(space.dim())}, {}};
}

/// Scattering morphism whose Schrodinger-picture evolution is `schrodinger`.
inline ScatteringMorphism scattering_from_schrodinger(const TensorSpace& space, const CMatrix& schrodinger) {
  if (!is_unitary(schrodinger)) throw Error(ErrorKind::InvalidValue, "scattering evolution is not unitary");
  if (schrodinger.rows() != space.dim()) throw Error(ErrorKind::DimensionMismatch, "evolution does not match space");
  return ScatteringMorphism{space, UnitaryOp{space, schrodinger.adjoint()}, {}};
}

struct FvMeasurement {
  std::vector<WorldlineSystem> probe;  // all probe factors ride the route
  Diamond K;
  ScatteringMorphism theta;
  DensityOp sigma;
  Effect b;

  std::vector<std::string> probe_labels() const {
    std::vector<std::string> out;
    for (auto& p : probe) out.push_back(p.label);
    return out;
  }
  bool nonselective() const { return frobenius(b.mat - identity(b.mat.rows())) <= tol::equality; }
};

namespace detail {

inline std::vector<std::string> system_labels(const TensorSpace& space, const TensorSpace& probe) {
  std::vector<std::string> out;
  for (auto& f : space.factors())
    if (!probe.has(f.label)) out.push_back(f.label);
  return out;
}

/// rho on the system factors, sigma on the probe factors, placed in `space` order.
inline CMatrix product_state(const TensorSpace& space, const TensorSpace& sys, const CMatrix& rho,
                             const TensorSpace& probe, const CMatrix& sigma) {
  return reorder(kron(rho, sigma), sys.concat(probe), space);
}

}  // namespace detail

/// epsilon_sigma(b) = Tr_P[(1 (x) sigma) Theta(1 (x) b)] on the system factors.
inline CMatrix induced_observable(const ScatteringMorphism& theta, const DensityOp& sigma, const Effect& b) {
  if (!(sigma.space == b.space)) throw Error(ErrorKind::DimensionMismatch, "probe state and effect differ in space");
  auto probe_labels = sigma.space.labels();
  auto sys = detail::system_labels(theta.space, sigma.space);
  CMatrix x = theta.apply(tensor_embed(b.mat, probe_labels, theta.space));
  CMatrix s = tensor_embed(sigma.mat, probe_labels, theta.space);
  return partial_trace(s * x, theta.space, sys);
}

struct SelectiveUpdate {
  CMatrix unnormalized;
  double probability = 0.0;
  std::optional<CMatrix> postselected;  // empty: zero probability

  bool zero_probability() const { return !postselected.has_value(); }
};

inline constexpr double zero_probability_threshold = 1e-12;

namespace detail {

/// Tr_P[(1 (x) sqrt(b)) u^dagger (rho (x) sigma) u (1 (x) sqrt(b))]
inline CMatrix instrument(const ScatteringMorphism& theta, const DensityOp& sigma, const CMatrix& b,
                          const CMatrix& rho) {
  auto probe_labels = sigma.space.labels();
  TensorSpace probe = theta.space.restricted(probe_labels);
  if (!(probe == sigma.space)) throw Error(ErrorKind::DimensionMismatch, "probe factors must follow the space order");
  auto sys_labels = system_labels(theta.space, sigma.space);
  TensorSpace sys = theta.space.restricted(sys_labels);
  if (rho.rows() != sys.dim()) throw Error(ErrorKind::DimensionMismatch, "system state does not match system factors");
  CMatrix full = product_state(theta.space, sys, rho, probe, sigma.mat);
  CMatrix evolved = theta.u.mat.adjoint() * full * theta.u.mat;
  Eigen::SelfAdjointEigenSolver<CMatrix> es((b + b.adjoint()) / 2.0);
  CMatrix root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                 es.eigenvectors().adjoint();
  CMatrix r = tensor_embed(root, probe_labels, theta.space);
  CMatrix out = partial_trace(r * evolved * r, theta.space, sys_labels);
  return (out + out.adjoint()) / 2.0;
}

}  // namespace detail

inline SelectiveUpdate update_selective(const ScatteringMorphism& theta, const DensityOp& sigma, const Effect& b,
                                        const DensityOp& omega) {
  SelectiveUpdate r;
  r.unnormalized = detail::instrument(theta, sigma, b.mat, omega.mat);
  r.probability = r.unnormalized.trace().real();
  if (r.probability > zero_probability_threshold) r.postselected = r.unnormalized / r.probability;
  return r;
}

inline DensityOp update_nonselective(const ScatteringMorphism& theta, const DensityOp& sigma, const DensityOp& omega) {
  CMatrix one = identity(sigma.space.dim());
  return DensityOp{omega.space, detail::instrument(theta, sigma, one, omega.mat)};
}

/// The update omega -> I_{sigma,b}(omega) as a Kraus channel on the system factors.
inline Channel instrument_channel(const ScatteringMorphism& theta, const DensityOp& sigma, const CMatrix& b) {
  auto probe_labels = sigma.space.labels();
  TensorSpace probe = theta.space.restricted(probe_labels);
  auto sys_labels = detail::system_labels(theta.space, sigma.space);
  TensorSpace sys = theta.space.restricted(sys_labels);
  int ds = sys.dim(), dp = probe.dim();
  CMatrix ud = reorder(CMatrix(theta.u.mat.adjoint()), theta.space, sys.concat(probe));
  Eigen::SelfAdjointEigenSolver<CMatrix> bs((b + b.adjoint()) / 2.0);
  CMatrix root = bs.eigenvectors() * bs.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                 bs.eigenvectors().adjoint();
  CMatrix lift = kron(identity(ds), root) * ud;
  Eigen::SelfAdjointEigenSolver<CMatrix> ss((sigma.mat + sigma.mat.adjoint()) / 2.0);
  Channel c{sys, sys, {}};
  for (int s = 0; s < dp; ++s) {
    double p = ss.eigenvalues()(s);
    if (p < tol::kraus_drop) continue;
    CMatrix embed = kron(identity(ds), CMatrix(ss.eigenvectors().col(s)));
    CMatrix m = std::sqrt(p) * lift * embed;  // (ds*dp) x ds
    for (int j = 0; j < dp; ++j) {
      CMatrix k(ds, ds);
      for (int i = 0; i < ds; ++i) k.row(i) = m.row(i * dp + j);
      c.kraus.push_back(k);
    }
  }
  return c;
}

inline Channel nonselective_channel(const FvMeasurement& m) {
  return instrument_channel(m.theta, m.sigma, identity(m.sigma.space.dim()));
}

// ---------------------------------------------------------------------------
// Several measurements in causal order.

struct ComposedMeasurements {
  CMatrix final_state;  // unnormalised
  std::vector<double> expectations;
  std::size_t swap_checks = 0;
  double max_swap_deviation = 0.0;
};

inline ComposedMeasurements compose_measurements(const std::vector<FvMeasurement>& ms, const DensityOp& omega) {
  std::vector<Diamond> zones;
  for (auto& m : ms) zones.push_back(closure(m.K));
  if (!check_causal_order(zones))
    throw Error(ErrorKind::PreconditionViolated, "coupling zones are not causally ordered in list order");
  ComposedMeasurements out;
  CMatrix rho = omega.mat;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const auto& m = ms[i];
    CMatrix eps = induced_observable(m.theta, m.sigma, m.b);
    out.expectations.push_back((rho * eps).trace().real());
    if (i + 1 < ms.size() && causally_disjoint(zones[i], zones[i + 1])) {
      const auto& n = ms[i + 1];
      CMatrix ab = detail::instrument(n.theta, n.sigma, n.b.mat, detail::instrument(m.theta, m.sigma, m.b.mat, rho));
      CMatrix ba = detail::instrument(m.theta, m.sigma, m.b.mat, detail::instrument(n.theta, n.sigma, n.b.mat, rho));
      ++out.swap_checks;
      out.max_swap_deviation = std::max(out.max_swap_deviation, frobenius(ab - ba));
    }
    rho = detail::instrument(m.theta, m.sigma, m.b.mat, rho);
  }
  out.final_state = rho;
  return out;
}

// ---------------------------------------------------------------------------
// Building a scattering morphism from a probe route.

struct RouteEvent {
  Point event;
  std::vector<std::string> system_labels;
};

/// Crossings of the route with system worldlines, in time order.
inline std::vector<RouteEvent> route_events(const Worldline& route, const HybridNet& system) {
  std::vector<RouteEvent> ev;
  for (auto& s : system.systems) {
    std::vector<Point> pts;
    try {
      pts = worldline_intersections(route, s.worldline);
    } catch (const Error&) {
      throw Error(ErrorKind::InvalidValue, "route runs along worldline of '" + s.label + "'");
    }
    for (auto& p : pts) {
      auto it = std::find_if(ev.begin(), ev.end(), [&](const RouteEvent& e) { return e.event == p; });
      if (it == ev.end()) ev.push_back({p, {s.label}});
      else it->system_labels.push_back(s.label);
    }
  }
  std::sort(ev.begin(), ev.end(), [](const RouteEvent& a, const RouteEvent& b) { return a.event.t < b.event.t; });
  return ev;
}

/// `crossing_unitaries[k]` is the Schrodinger evolution at the k-th crossing and may touch only the
/// probe and the system factors crossed there. `free_unitaries` act on single probe factors before any crossing.
inline ScatteringMorphism scattering_from_route(const Worldline& route, const HybridNet& system,
                                                const std::vector<Factor>& probe, const Diamond& K,
                                                const std::vector<UnitaryOp>& crossing_unitaries,
                                                const std::vector<UnitaryOp>& free_unitaries = {}) {
  validate_worldline(route);
  TensorSpace sys = system.space();
  TensorSpace pr(probe);
  TensorSpace space = sys.concat(pr);
  auto events = route_events(route, system);
  for (auto& e : events)
    if (!in_diamond(closure(K), e.event))
      throw Error(ErrorKind::CrossingOutsideCouplingZone,
                  "route meets '" + e.system_labels.front() + "' at (" + to_string(e.event.t) + ", " +
                      to_string(e.event.x) + ") outside the coupling zone");
  if (crossing_unitaries.size() != events.size())
    throw Error(ErrorKind::DimensionMismatch, "route has " + std::to_string(events.size()) + " crossings but " +
                                                  std::to_string(crossing_unitaries.size()) + " unitaries were given");
  ScatteringMorphism theta;
  theta.space = space;
  CMatrix total = identity(space.dim());
  for (auto& f : free_unitaries) {
    if (f.space.size() != 1 || !pr.has(f.space.factors()[0].label))
      throw Error(ErrorKind::NonlocalUnitary, "free evolution must act on a single probe factor");
    total = tensor_embed(f.mat, f.space.labels(), space) * total;
  }
  for (std::size_t k = 0; k < events.size(); ++k) {
    const auto& uk = crossing_unitaries[k];
    std::vector<std::string> allowed = pr.labels();
    allowed.insert(allowed.end(), events[k].system_labels.begin(), events[k].system_labels.end());
    for (auto& l : uk.space.labels())
      if (std::find(allowed.begin(), allowed.end(), l) == allowed.end())
        throw Error(ErrorKind::NonlocalUnitary, "unitary at crossing " + std::to_string(k) + " touches '" + l + "'");
    if (!is_unitary(uk.mat)) throw Error(ErrorKind::InvalidValue, "crossing evolution is not unitary");
    total = tensor_embed(uk.mat, uk.space.labels(), space) * total;
    Interaction in{events[k].event, events[k].system_labels};
    for (auto& l : pr.labels()) in.labels.push_back(l);
    theta.interactions.push_back(in);
  }
  theta.u = UnitaryOp{space, total.adjoint()};
  return theta;
}

// ---------------------------------------------------------------------------
// Splitting a scattering morphism as (id_A (x) psi_BC) o (chi_AB (x) id_C).

struct ScatteringFactors {
  TensorSpace space_ab;
  TensorSpace space_bc;
  UnitaryOp psi_bc;  // Heisenberg: psi(y) = v y v^dagger on B (x) C
  UnitaryOp chi_ab;  // Heisenberg: chi(x) = w x w^dagger on A (x) B
  double reconstruction = 0.0;
};

struct NotFactorable {
  CMatrix witness;  // operator on C
  std::string witness_name;
  double deviation = 0.0;
};

/// Frobenius distance of the Choi matrices of Ad_u and Ad_w, computed without forming them.
inline double unitary_choi_distance(const CMatrix& u, const CMatrix& w) {
  Complex ov = (u.adjoint() * w).trace();
  Complex phase = std::abs(ov) > 0 ? ov / std::abs(ov) : Complex(1.0);
  double delta2 = (u * phase - w).squaredNorm();
  double d = static_cast<double>(u.rows());
  return std::sqrt(std::max(0.0, 2.0 * d * delta2 - delta2 * delta2 / 2.0));
}

namespace detail {

/// Weyl operators Z^a X^b in order (0,0), (0,1), ..., which span B(C^d).
inline std::vector<std::pair<std::string, CMatrix>> weyl_basis(int d) {
  std::vector<std::pair<std::string, CMatrix>> out;
  CMatrix x = shift(d), z = clock(d);
  CMatrix za = identity(d);
  for (int a = 0; a < d; ++a) {
    CMatrix op = za;
    for (int b = 0; b < d; ++b) {
      std::string name = d == 2 ? (a == 0 ? (b == 0 ? "I" : "X") : (b == 0 ? "Z" : "ZX"))
                                : "Z^" + std::to_string(a) + " X^" + std::to_string(b);
      out.push_back({name, op});
      op = op * x;
    }
    za = za * z;
  }
  return out;
}

}  // namespace detail

inline std::variant<ScatteringFactors, NotFactorable> factor_scattering(const ScatteringMorphism& theta,
                                                                        const std::vector<std::string>& a_labels,
                                                                        const std::vector<std::string>& b_labels,
                                                                        const std::vector<std::string>& c_labels,
                                                                        double tolerance = 1e-9) {
  std::vector<std::string> all = a_labels;
  all.insert(all.end(), b_labels.begin(), b_labels.end());
  all.insert(all.end(), c_labels.begin(), c_labels.end());
  if (all.size() != theta.space.size()) throw Error(ErrorKind::DimensionMismatch, "partition does not cover the space");
  TensorSpace abc = theta.space.ordered(all);
  TensorSpace sa = theta.space.ordered(a_labels), sb = theta.space.ordered(b_labels),
              sc = theta.space.ordered(c_labels);
  int da = sa.dim(), db = sb.dim(), dc = sc.dim();
  CMatrix u = reorder(theta.u.mat, theta.space, abc);
  auto heis = [&](const CMatrix& a) -> CMatrix { return u * a * u.adjoint(); };

  // Gamma(c) = Tr_A Theta(1 (x) c) / d_A must carry all of Theta(1_AB (x) c).
  TensorSpace bc = sb.concat(sc);
  for (auto& [name, c] : detail::weyl_basis(dc)) {
    CMatrix x = heis(kron(identity(da * db), c));
    CMatrix g = partial_trace(x, abc, bc.labels()) / static_cast<double>(da);
    double dev = frobenius(x - kron(identity(da), g));
    if (dev > tolerance) return NotFactorable{c, name, dev};
  }
  auto gamma = [&](int i, int j) -> CMatrix {
    CMatrix x = heis(kron(identity(da * db), matrix_unit(dc, i, j)));
    return partial_trace(x, abc, bc.labels()) / static_cast<double>(da);
  };

  // Intertwiner v(|k>_B |j>_C) = Gamma(E_j0) f_k with f_k spanning the range of Gamma(E_00).
  Eigen::SelfAdjointEigenSolver<CMatrix> es((gamma(0, 0) + gamma(0, 0).adjoint()) / 2.0);
  CMatrix f = es.eigenvectors().rightCols(db);
  CMatrix v(db * dc, db * dc);
  for (int j = 0; j < dc; ++j) {
    CMatrix gj = gamma(j, 0);
    for (int k = 0; k < db; ++k) v.col(k * dc + j) = gj * f.col(k);
  }
  CMatrix big_v = kron(identity(da), v);
  CMatrix wp = big_v.adjoint() * u;
  TensorSpace ab = sa.concat(sb);
  CMatrix w = partial_trace(wp, abc, ab.labels()) / static_cast<double>(dc);
  double dev = frobenius(wp - kron(w, identity(dc)));
  if (dev > tolerance) return NotFactorable{CMatrix(), "B(AB) (x) 1_C not preserved", dev};
  CMatrix rebuilt = big_v * kron(w, identity(dc));
  ScatteringFactors out{ab, bc, UnitaryOp{bc, v}, UnitaryOp{ab, w}, unitary_choi_distance(u, rebuilt)};
  if (out.reconstruction > tolerance) return NotFactorable{CMatrix(), "reconstruction", out.reconstruction};
  return out;
}

// ---------------------------------------------------------------------------
// Semilocalisable channels and their FV realisation.

/// rho_AC -> Tr_B((L_AB (x) id_C)(id_A (x) L_BC)(rho_AC (x) rho_B)).
struct SemilocalisableDecomposition {
  std::string b_label;
  int b_dim = 1;
  DensityOp rho_B;
  Channel L_BC;  // on the B factor and the C factors
  Channel L_AB;  // on the A factors and the B factor
  double reconstruction = 0.0;
};

/// The same channel with its (common) input/output space written in another factor order.
inline Channel reorder_channel(const Channel& c, const TensorSpace& to) {
  if (!(c.space_in == c.space_out)) throw Error(ErrorKind::DimensionMismatch, "reordering needs equal in/out spaces");
  Channel r{to, to, {}};
  for (auto& k : c.kraus) r.kraus.push_back(reorder(k, c.space_in, to));
  return r;
}

inline Channel make_semilocalisable(const Channel& l_bc, const Channel& l_ab, const DensityOp& rho_b) {
  for (auto* c : {&l_bc, &l_ab})
    if (!c->nonselective() || !(c->space_in == c->space_out))
      throw Error(ErrorKind::DimensionMismatch, "components must be nonselective channels on a fixed space");
  auto b_labels = rho_b.space.labels();
  TensorSpace a = l_ab.space_in.complement(b_labels);
  TensorSpace c = l_bc.space_in.complement(b_labels);
  if (a.size() + rho_b.space.size() != l_ab.space_in.size() || c.size() + rho_b.space.size() != l_bc.space_in.size())
    throw Error(ErrorKind::DimensionMismatch, "both components must contain the B factors");
  TensorSpace sys = a.concat(c);
  TensorSpace full = sys.concat(rho_b.space);
  Channel bc = embed_channel(l_bc, full);
  Channel ab = embed_channel(l_ab, full);
  return channel_from_map(sys, sys, [&](const CMatrix& x) {
    CMatrix y = ab.apply(bc.apply(kron(x, rho_b.mat)));
    return partial_trace(y, full, sys.labels());
  });
}

inline Channel make_semilocalisable(const SemilocalisableDecomposition& d) {
  return make_semilocalisable(d.L_BC, d.L_AB, d.rho_B);
}

struct FvRealisation {
  FvMeasurement measurement;
  Worldline route;
  HybridNet system;
};

/// Dilates both components, lets the probe (B and both environments) meet gamma_C and then gamma_A.
inline FvRealisation fv_from_semilocalisable(const SemilocalisableDecomposition& d, const Diamond& o_a,
                                             const Diamond& o_c, const Worldline& gamma_a, const Worldline& gamma_c) {
  auto route = find_probe_route(o_a, o_c, gamma_a, gamma_c);
  if (!route) throw Error(ErrorKind::RouteNotFound, "no causal route meets gamma_C and then gamma_A");
  TensorSpace a = d.L_AB.space_in.complement({d.b_label});
  TensorSpace c = d.L_BC.space_in.complement({d.b_label});
  std::vector<WorldlineSystem> sys;
  for (auto& f : a.factors()) sys.push_back({f.label, gamma_a, f.dim});
  for (auto& f : c.factors()) sys.push_back({f.label, gamma_c, f.dim});
  HybridNet net = make_net(sys);

  std::string e1 = d.b_label + ".env_bc", e2 = d.b_label + ".env_ab";
  Dilation first = stinespring(d.L_BC, e1);
  Dilation second = stinespring(d.L_AB, e2);
  std::vector<Factor> probe{{d.b_label, d.b_dim}, {e1, first.env.dim()}, {e2, second.env.dim()}};
  Diamond k{route->vertices[0], route->vertices[1], true};
  ScatteringMorphism theta = scattering_from_route(*route, net, probe, k, {first.u, second.u});

  TensorSpace pspace(probe);
  CMatrix sigma = kron(kron(d.rho_B.mat, first.tau), second.tau);
  FvMeasurement m;
  for (auto& f : probe) m.probe.push_back({f.label, *route, f.dim});
  m.K = k;
  m.theta = theta;
  m.sigma = DensityOp{pspace, sigma};
  m.b = Effect{pspace, identity(pspace.dim())};
  return FvRealisation{m, *route, net};
}

// ---------------------------------------------------------------------------
// Randomized locality suites.

struct FvLocalityReport {
  SuiteTally fixes_complement;       // Theta(c) = c for c away from every interaction
  SuiteTally nonselective_locality;  // expectations in the causal complement of K survive
  SuiteTally probe_only_effects;     // epsilon_sigma(b) = sigma(b) 1 for b away from K
  SuiteTally localisation_transport; // Theta(U(L+)) inside U(L-)
  double max_residual = 0.0;

  bool passed() const {
    return fixes_complement.violations + nonselective_locality.violations + probe_only_effects.violations +
               localisation_transport.violations ==
           0;
  }
};

namespace detail {

/// Residual of m from the subalgebra B(H_labels) (x) 1.
inline double subalgebra_residual(const CMatrix& m, const std::vector<std::string>& labels, const TensorSpace& space) {
  if (labels.size() == space.size()) return 0.0;
  TensorSpace rest = space.complement(labels);
  auto keep = space.restricted(labels).labels();
  CMatrix local = partial_trace(m, space, keep) / double(rest.dim());
  return frobenius(m - tensor_embed(local, keep, space));
}

}  // namespace detail

/// Three qubit systems on x = 0, 3, 6; a probe factor P rides a route that crosses some of
/// them inside K, a second probe factor Q sits on x = 10 and never meets K.
inline FvLocalityReport fv_locality_suite(std::size_t trials, std::uint64_t seed) {
  FvLocalityReport rep;
  std::mt19937_64 rng(seed);
  const Rational slots[] = {Rational(-3, 2), Rational(3, 2), Rational(9, 2), Rational(15, 2)};
  std::vector<WorldlineSystem> systems{{"S0", vertical_worldline(0), 2},
                                       {"S1", vertical_worldline(3), 2},
                                       {"S2", vertical_worldline(6), 2}};
  HybridNet net = make_net(systems);
  TensorSpace sys = net.space();
  for (std::size_t trial = 0; trial < trials; ++trial) {
    int i = 0, j = 0;
    while (i == j || std::abs(i - j) > 2) {
      i = std::uniform_int_distribution<int>(0, 3)(rng);
      j = std::uniform_int_distribution<int>(0, 3)(rng);
    }
    Rational x0 = slots[i], x1 = slots[j], len = rabs(x1 - x0);
    Worldline route{{Point{0, x0}, Point{len, x1}}, 0, 0};
    Point mid{len / 2, (x0 + x1) / 2};
    Rational half = len / 2 + 1;
    Diamond k{Point{mid.t - half, mid.x}, Point{mid.t + half, mid.x}, true};

    auto events = route_events(route, net);
    std::vector<UnitaryOp> us;
    std::vector<std::string> crossed;
    for (auto& e : events) {
      TensorSpace s({{e.system_labels.front(), 2}, {"P", 2}});
      us.push_back(UnitaryOp{s, random_unitary_matrix(4, rng)});
      crossed.push_back(e.system_labels.front());
    }
    std::vector<Factor> probe{{"P", 2}, {"Q", 2}};
    ScatteringMorphism theta = scattering_from_route(route, net, probe, k, us);
    TensorSpace ps(probe);
    DensityOp sigma{ps, random_density_matrix(4, rng)};
    const TensorSpace& space = theta.space;

    // Observables on factors no interaction touches.
    std::vector<std::string> idle{"Q"};
    for (auto& s : systems)
      if (std::find(crossed.begin(), crossed.end(), s.label) == crossed.end()) idle.push_back(s.label);
    CMatrix c = tensor_embed(ginibre(space.dim_of(idle), space.dim_of(idle), rng), idle, space);
    double d1 = frobenius(theta.apply(c) - c);
    ++rep.fixes_complement.checks;
    if (d1 > 1e-12) ++rep.fixes_complement.violations;

    // Nonselective update seen from a region spacelike to K.
    Diamond far = detail::random_spacelike_partner(rng, k);
    auto labels = local_algebra(net, far).factor_labels;
    ++rep.nonselective_locality.checks;
    bool touches = false;
    for (auto& l : labels) touches |= std::find(crossed.begin(), crossed.end(), l) != crossed.end();
    CMatrix a = labels.empty() ? identity(sys.dim())
                               : tensor_embed(random_hermitian(sys.dim_of(labels), rng), labels, sys);
    DensityOp omega{sys, random_density_matrix(sys.dim(), rng)};
    DensityOp after = update_nonselective(theta, sigma, omega);
    double d2 = std::abs((after.mat * a).trace() - (omega.mat * a).trace());
    if (touches || d2 > 1e-10) ++rep.nonselective_locality.violations;

    // Effects on Q carry no information about the system.
    CMatrix bq = random_effect_matrix(2, rng);
    Effect b{ps, kron(identity(2), bq)};
    CMatrix eps = induced_observable(theta, sigma, b);
    double expect = (sigma.mat * b.mat).trace().real();
    double d3 = frobenius(eps - expect * identity(sys.dim()));
    ++rep.probe_only_effects.checks;
    if (d3 > 1e-12) ++rep.probe_only_effects.violations;

    // L- avoids J+(K), L+ inside L- avoids J-(K).
    HybridNet full = make_net({systems[0], systems[1], systems[2], {"P", route, 2}, {"Q", vertical_worldline(10), 2}});
    detail::Box box{k.bottom.t - 4, k.top.t + 4, k.bottom.x - 6, k.top.x + 6};
    std::optional<std::pair<Diamond, Diamond>> pair;
    for (int tries = 0; tries < 200 && !pair; ++tries) {
      Diamond lm = detail::random_diamond(rng, box);
      if (causally_precedes(k.bottom, lm.top)) continue;
      Diamond lp = detail::random_subdiamond(rng, lm);
      if (!causally_precedes(lp.bottom, k.top)) pair.emplace(lp, lm);
    }
    if (!pair) {
      Diamond lm = detail::random_spacelike_partner(rng, k);
      pair.emplace(detail::random_subdiamond(rng, lm), lm);
    }
    auto src = local_algebra(full, pair->first);
    auto dst = local_algebra(full, pair->second);
    CMatrix x = src.factor_labels.empty() ? identity(space.dim()) : random_element(src, space, rng);
    double d4 = dst.factor_labels.empty() ? frobenius(theta.apply(x) - x.trace() / double(space.dim()) *
                                                                         identity(space.dim()))
                                          : detail::subalgebra_residual(theta.apply(x), dst.factor_labels, space);
    ++rep.localisation_transport.checks;
    if (d4 > 1e-9) ++rep.localisation_transport.violations;

    rep.max_residual = std::max({rep.max_residual, d1, d2, d3, d4});
  }
  return rep;
}

}  // namespace causal_ops
