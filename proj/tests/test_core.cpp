#include <random>

#include <gtest/gtest.h>

#include "causal_ops/fv.hpp"
#include "causal_ops/geometry.hpp"
#include "causal_ops/hybrid.hpp"
#include "causal_ops/quantum.hpp"
#include "oracles.hpp"

using namespace causal_ops;

namespace {

Point P(Rational t, Rational x) { return Point{std::move(t), std::move(x)}; }
Diamond D(Point b, Point t, bool closed = false) { return Diamond{std::move(b), std::move(t), closed}; }
Rational R(long n, long d = 1) { return Rational(n, d); }

}  // namespace

// ---------------------------------------------------------------------------
// geometry

TEST(Geometry, CausalRelationExamples) {
  EXPECT_EQ(causal_relation(P(0, 0), P(2, 1)), CausalRelation::timelike_future);
  EXPECT_EQ(causal_relation(P(0, 0), P(0, 1)), CausalRelation::spacelike);
  EXPECT_EQ(causal_relation(P(0, 0), P(1, 1)), CausalRelation::lightlike_future);
  EXPECT_EQ(causal_relation(P(2, 1), P(0, 0)), CausalRelation::timelike_past);
  EXPECT_EQ(causal_relation(P(1, -1), P(0, 0)), CausalRelation::lightlike_past);
  EXPECT_EQ(causal_relation(P(R(1, 3), 0), P(R(1, 3), 0)), CausalRelation::equal);
}

TEST(Geometry, SetContainsExamples) {
  Diamond d = D(P(0, 0), P(1, 0), true);
  EXPECT_FALSE(set_contains({CausalSetKind::J_minus, d}, P(0, 2)));
  EXPECT_TRUE(set_contains({CausalSetKind::M_plus, d}, P(3, 0)));
  EXPECT_TRUE(set_contains({CausalSetKind::causal_complement, d}, P(0, 5)));
  // Light-cone boundary belongs to J of a closed diamond but not of an open one.
  EXPECT_TRUE(set_contains({CausalSetKind::J_plus, d}, P(2, 2)));
  EXPECT_FALSE(set_contains({CausalSetKind::J_plus, interior(d)}, P(2, 2)));
}

TEST(Geometry, CausallyDisjointExamples) {
  EXPECT_TRUE(causally_disjoint(D(P(0, -2), P(1, -2)), D(P(1, 3), P(2, 3))));
  EXPECT_FALSE(causally_disjoint(D(P(0, 0), P(2, 0)), D(P(3, 0), P(4, 0))));
  Diamond a = D(P(0, 0), P(1, 0));
  EXPECT_FALSE(causally_disjoint(a, a));
}

TEST(Geometry, CausalOrderExamples) {
  // Tip inequalities: each later bottom must lie outside J- of each earlier top.
  std::vector<Diamond> chain{D(P(0, -2), P(1, -2), true), D(P(R(3, 2), 0), P(R(5, 2), 0), true),
                             D(P(3, 3), P(4, 3), true)};
  for (std::size_t i = 0; i < chain.size(); ++i)
    for (std::size_t j = i + 1; j < chain.size(); ++j) {
      Rational dt = chain[i].top.t - chain[j].bottom.t;
      Rational dx = rabs(chain[i].top.x - chain[j].bottom.x);
      ASSERT_LT(dt, dx);
    }
  EXPECT_TRUE(check_causal_order(chain));
  EXPECT_FALSE(check_causal_order({D(P(3, 0), P(4, 0)), D(P(0, 0), P(1, 0))}));
  EXPECT_TRUE(check_causal_order({D(P(0, 0), P(1, 0))}));
}

TEST(Geometry, DomainOfDependenceExamples) {
  EXPECT_EQ(domain_of_dependence({0, -1, 1}), D(P(-1, 0), P(1, 0)));
  EXPECT_EQ(domain_of_dependence({2, 4, 6}), D(P(1, 5), P(3, 5)));
  // Null rays from (0,-3) and (0,1) meet at (-2,-1) below and (2,-1) above.
  EXPECT_EQ(domain_of_dependence({0, -3, 1}), D(P(-2, -1), P(2, -1)));
}

TEST(Geometry, SeparatingCauchySurfaceExamples) {
  {
    Diamond k = D(P(0, 0), P(1, 0), true), l = D(P(3, 5), P(4, 5), true);
    CauchyGraph g = separating_cauchy_surface(k, l);
    // Midpoint of 1 - |x| and 3 + |x - 5|.
    EXPECT_EQ(g.at(0), R(9, 2));
    EXPECT_EQ(g.at(5), R(-1, 2));
    EXPECT_TRUE(g.is_lipschitz());
  }
  {
    CauchyGraph g = separating_cauchy_surface(D(P(0, 0), P(1, 0), true), D(P(5, 0), P(6, 0), true));
    EXPECT_EQ(g.at(0), R(3));
  }
  EXPECT_THROW(
      {
        try {
          separating_cauchy_surface(D(P(0, 0), P(1, 0), true), D(P(0, 0), P(2, 0), true));
        } catch (const Error& e) {
          EXPECT_EQ(e.kind(), ErrorKind::PreconditionViolated);
          throw;
        }
      },
      Error);
}

TEST(Geometry, SeparatingCauchySurfaceStrictEnvelopes) {
  std::mt19937_64 rng(11);
  for (int inst = 0; inst < 40; ++inst) {
    Diamond k = closure(detail::random_box_diamond(rng, 3, true));
    Rational shift = random_rational(rng, 0, 6, 8);
    Rational lift = k.top.t - k.bottom.t + random_rational(rng, R(1, 8), 4, 8) + rabs(shift);
    Diamond l{P(k.bottom.t + lift, k.bottom.x + shift), P(k.top.t + lift, k.top.x + shift), true};
    if (causally_precedes(l.bottom, k.top)) continue;
    CauchyGraph g = separating_cauchy_surface(k, l);
    ASSERT_TRUE(g.is_lipschitz());
    for (int q = 0; q <= 200; ++q) {
      Rational x = R(-25) + R(q, 4);
      Rational below = k.top.t - rabs(x - k.top.x), above = l.bottom.t + rabs(x - l.bottom.x);
      ASSERT_LT(below, g.at(x));
      ASSERT_LT(g.at(x), above);
    }
  }
}

TEST(Geometry, CoverSegmentFarWorldline) {
  Worldline gamma = vertical_worldline(0), delta = vertical_worldline(10);
  Diamond k = D(P(-1, 0), P(5, 0));
  auto cover = cover_segment(gamma, delta, k);
  ASSERT_EQ(cover.size(), 1u);
  EXPECT_EQ(cover[0].t, R(-1));
  // Future development apex must reach the top of K.
  Rational half = (cover[0].x_hi - cover[0].x_lo) / 2;
  EXPECT_GE(cover[0].t + half, R(5));
  EXPECT_TRUE(validate_cover(gamma, delta, k, cover).ok());
}

TEST(Geometry, CoverSegmentNearWorldline) {
  Worldline gamma = vertical_worldline(0), delta = vertical_worldline(2);
  Diamond k = D(P(0, 0), P(4, 0));
  auto cover = cover_segment(gamma, delta, k);
  ASSERT_GE(cover.size(), 2u);
  for (auto& iv : cover) {
    EXPECT_LT(iv.x_hi - iv.x_lo, R(4));
    EXPECT_LT(iv.x_hi, R(2));
  }
  auto v = validate_cover(gamma, delta, k, cover);
  EXPECT_TRUE(v.coverage);
  EXPECT_TRUE(v.avoidance);
  EXPECT_TRUE(v.chaining);
}

TEST(Geometry, CoverSegmentCrossingThrows) {
  Worldline gamma = vertical_worldline(0);
  Worldline delta = straight_worldline(P(1, 0), R(1, 2));
  try {
    cover_segment(gamma, delta, D(P(-1, 0), P(3, 0)));
    FAIL() << "expected PreconditionViolated";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PreconditionViolated);
  }
}

TEST(Geometry, CoverValidatorRejectsBadCovers) {
  Worldline gamma = vertical_worldline(0), delta = vertical_worldline(2);
  Diamond k = D(P(0, 0), P(4, 0));
  EXPECT_FALSE(validate_cover(gamma, delta, k, {{0, -1, 1}}).coverage);
  EXPECT_FALSE(validate_cover(gamma, delta, k, {{0, -5, 5}}).avoidance);
}

TEST(Geometry, SorkinGeometryExamples) {
  Diamond a = D(P(0, -2), P(1, -2)), b = D(P(R(3, 2), 0), P(R(5, 2), 0)), c = D(P(3, 3), P(4, 3));
  auto rep = sorkin_geometry_check(a, b, c, 100, 7);
  EXPECT_TRUE(rep.ordered);
  EXPECT_TRUE(rep.disjoint_ac);
  EXPECT_EQ(rep.lemma_falsifications, 0u);
  EXPECT_EQ(rep.curves_checked, 100u * 100u);
  EXPECT_FALSE(sorkin_geometry_check(a, b, a, 2, 7).disjoint_ac);
  EXPECT_FALSE(sorkin_geometry_check(c, b, a, 2, 7).ordered);
}

TEST(Geometry, WorldlineValidationNamesVertexPair) {
  Worldline w{{P(0, 0), P(1, 0), P(2, 5)}, 0, 0};
  try {
    validate_worldline(w);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("vertices[1] -> vertices[2]"), std::string::npos) << e.what();
  }
}

TEST(Geometry, ProbeRouteOnVerticalLayout) {
  Diamond oa = D(P(-1, 0), P(1, 0)), oc = D(P(0, 6), P(2, 6));
  Worldline ga = vertical_worldline(0), gc = vertical_worldline(6);
  auto route = find_probe_route(oa, oc, ga, gc);
  ASSERT_TRUE(route.has_value());
  auto ec = worldline_intersections(*route, gc), ea = worldline_intersections(*route, ga);
  ASSERT_EQ(ec.size(), 1u);
  ASSERT_EQ(ea.size(), 1u);
  // e_C outside J-(closure O_A), e_A outside J+(closure O_C), e_C before e_A.
  auto rel_c = causal_relation(ec[0], oa.top);
  EXPECT_TRUE(rel_c == CausalRelation::spacelike || rel_c == CausalRelation::timelike_future ||
              rel_c == CausalRelation::lightlike_future);
  auto rel_a = causal_relation(oc.bottom, ea[0]);
  EXPECT_TRUE(rel_a == CausalRelation::spacelike || rel_a == CausalRelation::timelike_past ||
              rel_a == CausalRelation::lightlike_past);
  auto rel = causal_relation(ec[0], ea[0]);
  EXPECT_TRUE(rel == CausalRelation::timelike_future || rel == CausalRelation::lightlike_future);
}

TEST(Geometry, ProbeRouteMirrorsUnderReflection) {
  Diamond oa = D(P(-1, 0), P(1, 0)), oc = D(P(0, 6), P(2, 6));
  Worldline ga = vertical_worldline(0), gc = vertical_worldline(6);
  auto route = find_probe_route(oa, oc, ga, gc);
  auto mirrored = find_probe_route(mirror(oa), mirror(oc), mirror(ga), mirror(gc));
  ASSERT_TRUE(route && mirrored);
  EXPECT_EQ(*mirrored, mirror(*route));
}

TEST(Geometry, ProbeRouteNotFoundWhenWorldlinesCoincide) {
  Diamond oa = D(P(-1, 0), P(1, 0)), oc = D(P(0, 6), P(2, 6));
  EXPECT_FALSE(find_probe_route(oa, oc, vertical_worldline(6), vertical_worldline(6)).has_value());
  EXPECT_THROW(find_probe_route(oa, oa, vertical_worldline(0), vertical_worldline(6)), Error);
}

TEST(Geometry, CausalConvexitySuite) {
  auto t = causal_convexity_suite(2000, 3);
  EXPECT_EQ(t.checks, 2000u);
  EXPECT_EQ(t.violations, 0u);
}

TEST(Geometry, RationalParsing) {
  EXPECT_EQ(parse_rational("3/4"), R(3, 4));
  EXPECT_EQ(parse_rational("-7"), R(-7));
  EXPECT_THROW(parse_rational("1/0"), Error);
  EXPECT_THROW(parse_rational("0.5"), Error);
  EXPECT_THROW(parse_rational(""), Error);
}

// ---------------------------------------------------------------------------
// quantum

TEST(Quantum, TensorEmbedExamples) {
  TensorSpace ac{{"A", 2}, {"C", 2}};
  EXPECT_LE(frobenius(tensor_embed(pauli_x(), {"A"}, ac) - oracle::kron(oracle::pauli_x(), oracle::id(2))), 1e-15);
  TensorSpace abc{{"A", 2}, {"B", 2}, {"C", 2}};
  EXPECT_LE(frobenius(tensor_embed(identity(4), {"C", "A"}, abc) - identity(8)), 1e-15);
  CMatrix z = tensor_embed(pauli_z(), {"C"}, abc);
  EXPECT_EQ(z(1, 1), Complex(-1.0));  // index 1 = |001>, C in state 1
  EXPECT_EQ(z(0, 0), Complex(1.0));
  EXPECT_EQ(z(7, 7), Complex(-1.0));
  EXPECT_LE(frobenius(z - oracle::kron(oracle::id(4), oracle::pauli_z())), 1e-15);
}

TEST(Quantum, TensorEmbedMatchesIndexOracle) {
  std::mt19937_64 rng(5);
  TensorSpace s{{"A", 2}, {"B", 3}, {"C", 2}};
  for (int trial = 0; trial < 20; ++trial) {
    CMatrix op = ginibre(6, 6, rng);
    // op is written in the order (C, B).
    CMatrix ours = tensor_embed(op, {"C", "B"}, s);
    CMatrix ref = oracle::embed(op, {2, 1}, {2, 3, 2});
    ASSERT_LE(frobenius(ours - ref), 1e-12);
  }
}

TEST(Quantum, PartialTraceExamples) {
  TensorSpace ab{{"A", 2}, {"B", 2}};
  CVector phi = (ket(4, 0) + ket(4, 3)) / std::sqrt(2.0);
  EXPECT_LE(frobenius(partial_trace(projector(phi), ab, {"A"}) - identity(2) / 2.0), 1e-15);
  std::mt19937_64 rng(3);
  CMatrix ra = random_density_matrix(2, rng), sb = random_density_matrix(2, rng);
  EXPECT_LE(frobenius(partial_trace(kron(ra, sb), ab, {"A"}) - ra), 1e-14);
  CMatrix m = ginibre(4, 4, rng);
  CMatrix all = partial_trace(m, ab, {});
  ASSERT_EQ(all.rows(), 1);
  EXPECT_LE(std::abs(all(0, 0) - m.trace()), 1e-14);
}

TEST(Quantum, PartialTraceMatchesIndexOracle) {
  std::mt19937_64 rng(8);
  TensorSpace s{{"A", 2}, {"B", 3}, {"C", 2}};
  for (int trial = 0; trial < 20; ++trial) {
    CMatrix m = ginibre(12, 12, rng);
    ASSERT_LE(frobenius(partial_trace(m, s, {"A", "C"}) - oracle::ptrace(m, {0, 2}, {2, 3, 2})), 1e-12);
    ASSERT_LE(frobenius(partial_trace(m, s, {"B"}) - oracle::ptrace(m, {1}, {2, 3, 2})), 1e-12);
  }
}

TEST(Quantum, ValidateChannelExamples) {
  TensorSpace q{{"Q", 2}};
  auto v = validate_channel(identity_channel(q));
  EXPECT_TRUE(v.cp && v.tp && v.trace_nonincreasing && v.unital_dual);
  Channel flip{q, q, {std::sqrt(0.5) * identity(2), std::sqrt(0.5) * pauli_z()}};
  v = validate_channel(flip);
  EXPECT_TRUE(v.cp);
  EXPECT_TRUE(v.tp);
  Channel half{q, q, {0.5 * identity(2)}};
  v = validate_channel(half);
  EXPECT_TRUE(v.trace_nonincreasing);
  EXPECT_FALSE(v.tp);
}

TEST(Quantum, ChoiExamples) {
  TensorSpace q{{"Q", 2}};
  CVector omega = (ket(4, 0) + ket(4, 3)) / std::sqrt(2.0);
  EXPECT_LE(frobenius(identity_channel(q).choi() - 2.0 * projector(omega)), 1e-15);

  // Completely depolarizing: L(E_ij) = delta_ij 1/2.
  std::vector<CMatrix> ks;
  for (auto& p : {identity(2), pauli_x(), pauli_y(), pauli_z()}) ks.push_back(0.5 * p);
  Channel dep{q, q, ks};
  CMatrix j = dep.choi();
  CMatrix ref = oracle::choi(2, 2, [](const oracle::M& e) { return oracle::M(e.trace() * oracle::id(2) / 2.0); });
  EXPECT_LE(frobenius(j - ref), 1e-14);
  TensorSpace io{{"in", 2}, {"out", 2}};
  EXPECT_LE(frobenius(partial_trace(j, io, {"in"}) - identity(2)), 1e-14);
}

TEST(Quantum, ChoiRoundTrip) {
  TensorSpace s{{"A", 2}, {"B", 3}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Channel c = random_channel(s, 3, seed);
    Channel back = channel_from_choi(c.choi(), s, s);
    ASSERT_LE(choi_distance(c, back), 1e-10);
    CMatrix ref = oracle::choi(6, 6, [&](const oracle::M& e) { return oracle::apply_kraus(c.kraus, e); });
    ASSERT_LE(frobenius(c.choi() - ref), 1e-12);
  }
}

TEST(Quantum, HeisenbergDual) {
  TensorSpace q{{"Q", 2}};
  std::mt19937_64 rng(2);
  CMatrix u = random_unitary_matrix(2, rng);
  DualMap d = hs_adjoint(unitary_channel(q, u));
  CMatrix a = random_hermitian(2, rng);
  EXPECT_LE(frobenius(d.apply(a) - u.adjoint() * a * u), 1e-14);

  Channel flip{q, q, {std::sqrt(0.5) * identity(2), std::sqrt(0.5) * pauli_z()}};
  EXPECT_LE(frobenius(hs_adjoint(flip).apply(a) - flip.apply(a)), 1e-14);

  TensorSpace s{{"A", 2}, {"B", 2}};
  for (int i = 0; i < 100; ++i) {
    Channel c = random_channel(s, 2, 100 + i);
    CMatrix rho = random_density_matrix(4, rng), obs = random_hermitian(4, rng);
    double lhs = (c.apply(rho) * obs).trace().real();
    double rhs = (rho * hs_adjoint(c).apply(obs)).trace().real();
    ASSERT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Quantum, StinespringExamples) {
  auto check = [](const Channel& c, int env_dim) {
    Dilation d = stinespring(minimal_kraus(c));
    EXPECT_EQ(d.env.dim(), env_dim);
    TensorSpace full = c.space_in.concat(d.env);
    int n = c.space_in.dim();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        CMatrix e = matrix_unit(n, i, j);
        CMatrix out = partial_trace(d.u.mat * kron(e, d.tau) * d.u.mat.adjoint(), full, c.space_in.labels());
        EXPECT_LE(frobenius(out - c.apply(e)), 1e-10);
      }
    EXPECT_TRUE(is_unitary(d.u.mat));
  };
  TensorSpace q{{"Q", 2}};
  check(identity_channel(q), 1);
  check(Channel{q, q, {std::sqrt(0.5) * identity(2), std::sqrt(0.5) * pauli_z()}}, 2);
  std::vector<CMatrix> ks;
  for (auto& p : {identity(2), pauli_x(), pauli_y(), pauli_z()}) ks.push_back(0.5 * p);
  check(Channel{q, q, ks}, 4);
}

TEST(Quantum, TraceDistanceExamples) {
  std::mt19937_64 rng(4);
  CMatrix rho = random_density_matrix(3, rng);
  EXPECT_LE(trace_distance(rho, rho), 1e-15);
  CMatrix p0 = projector(ket(2, 0)), p1 = projector(ket(2, 1));
  EXPECT_NEAR(trace_distance(p0, p1), 1.0, 1e-15);
  EXPECT_NEAR(trace_distance(p0, identity(2) / 2.0), 0.5, 1e-15);
  CMatrix s = random_density_matrix(3, rng);
  EXPECT_NEAR(trace_distance(rho, s), oracle::trace_distance(rho, s), 1e-12);
}

TEST(Quantum, RandomInstancesAreDeterministicAndValid) {
  TensorSpace s{{"A", 2}, {"C", 3}};
  Channel a = random_channel(s, 3, 77), b = random_channel(s, 3, 77);
  ASSERT_EQ(a.kraus.size(), b.kraus.size());
  for (std::size_t k = 0; k < a.kraus.size(); ++k) EXPECT_TRUE(a.kraus[k] == b.kraus[k]);
  auto v = validate_channel(a);
  EXPECT_TRUE(v.cp && v.tp);
  EXPECT_TRUE(random_unitary(s, 5).mat == random_unitary(s, 5).mat);
  EXPECT_TRUE(is_unitary(random_unitary(s, 5).mat));
  DensityOp st = random_state(s, 9);
  EXPECT_NEAR(st.mat.trace().real(), 1.0, 1e-12);
  EXPECT_TRUE(is_density(st.mat));
}

TEST(Quantum, InputValidation) {
  TensorSpace q{{"Q", 2}};
  EXPECT_THROW(make_state(q, identity(2)), Error);
  EXPECT_THROW(make_state(q, identity(3) / 3.0), Error);
  EXPECT_THROW(make_effect(q, 2.0 * identity(2)), Error);
  EXPECT_THROW(make_unitary(q, 2.0 * identity(2)), Error);
  EXPECT_THROW(TensorSpace({{"A", 2}, {"A", 2}}), Error);
}

// ---------------------------------------------------------------------------
// hybrid

TEST(Hybrid, LocalAlgebraExamples) {
  HybridNet net = make_net({{"A", vertical_worldline(0), 2},
                            {"B", straight_worldline(P(0, 0), R(1, 2)), 2},
                            {"C", vertical_worldline(10), 2}});
  auto labels = [&](const Diamond& d) {
    auto l = local_algebra(net, d).factor_labels;
    std::sort(l.begin(), l.end());
    return l;
  };
  EXPECT_EQ(labels(D(P(-5, 0), P(-4, 0))), (std::vector<std::string>{"A"}));
  EXPECT_TRUE(labels(D(P(0, 5), P(1, 5))).empty());
  EXPECT_EQ(labels(D(P(-1, 0), P(1, 0))), (std::vector<std::string>{"A", "B"}));
}

TEST(Hybrid, WorldlineIntersectionExamples) {
  auto x = worldline_intersections(vertical_worldline(0), straight_worldline(P(0, 0), 1));
  ASSERT_EQ(x.size(), 1u);
  EXPECT_EQ(x[0], P(0, 0));
  EXPECT_TRUE(worldline_intersections(vertical_worldline(0), vertical_worldline(1)).empty());
  Worldline zig{{P(0, -1), P(2, 1), P(4, -1)}, 0, 0};
  auto z = worldline_intersections(zig, vertical_worldline(0));
  ASSERT_EQ(z.size(), 2u);
  EXPECT_EQ(z[0], P(1, 0));
  EXPECT_EQ(z[1], P(3, 0));
}

TEST(Hybrid, NetAxiomsHold) {
  HybridNet net = make_net({{"A", vertical_worldline(0), 2},
                            {"B", Worldline{{P(-2, 3), P(0, 2), P(2, 3)}, R(-1, 2), R(1, 2)}, 2},
                            {"C", straight_worldline(P(0, -3), R(1, 3)), 3}});
  auto rep = net_axiom_check(net, 500, 21);
  EXPECT_EQ(rep.violations(), 0u);
  EXPECT_GT(rep.einstein_causality.checks, 0u);
  EXPECT_GT(rep.commutators.checks, 0u);
  EXPECT_LE(rep.max_commutator, 1e-10);
}

TEST(Hybrid, BrokenAlgebraIsDetected) {
  HybridNet net = make_net({{"A", vertical_worldline(0), 2}, {"B", vertical_worldline(3), 2}});
  // Assigns every factor to every region: isotony survives, Einstein causality does not.
  auto broken = [](const HybridNet& n, const Diamond&) {
    SubalgebraDescriptor d;
    for (auto& s : n.systems) d.factor_labels.push_back(s.label);
    return d;
  };
  auto rep = net_axiom_check(net, 300, 4, broken);
  EXPECT_GT(rep.einstein_causality.violations, 0u);
  EXPECT_GT(rep.commutators.violations, 0u);
  EXPECT_GT(rep.haag_duality.violations, 0u);
}

TEST(Hybrid, EmptyNetIsVacuous) {
  auto rep = net_axiom_check(HybridNet{}, 200, 1);
  EXPECT_EQ(rep.violations(), 0u);
  EXPECT_EQ(rep.commutators.checks, 0u);
}

// ---------------------------------------------------------------------------
// fv

namespace {

TensorSpace sys_probe() { return TensorSpace{{"S", 2}, {"P", 2}}; }

CMatrix swap2() {
  CMatrix s = CMatrix::Zero(4, 4);
  s(0, 0) = s(3, 3) = s(1, 2) = s(2, 1) = 1.0;
  return s;
}

}  // namespace

TEST(Fv, InducedObservableExamples) {
  std::mt19937_64 rng(31);
  TensorSpace probe{{"P", 2}};
  DensityOp sigma{probe, random_density_matrix(2, rng)};
  Effect b{probe, random_effect_matrix(2, rng)};
  CMatrix eps = induced_observable(identity_scattering(sys_probe()), sigma, b);
  Complex sb = (sigma.mat * b.mat).trace();
  EXPECT_LE(frobenius(eps - sb * identity(2)), 1e-14);

  auto swap = scattering_from_schrodinger(sys_probe(), swap2());
  EXPECT_LE(frobenius(induced_observable(swap, sigma, b) - b.mat), 1e-14);

  auto theta = scattering_from_schrodinger(sys_probe(), random_unitary_matrix(4, rng));
  EXPECT_LE(frobenius(induced_observable(theta, sigma, Effect{probe, identity(2)}) - identity(2)), 1e-13);
}

TEST(Fv, InducedObservableIsAnEffect) {
  std::mt19937_64 rng(32);
  TensorSpace space{{"S", 3}, {"P", 2}};
  TensorSpace probe{{"P", 2}};
  for (int i = 0; i < 100; ++i) {
    auto theta = scattering_from_schrodinger(space, random_unitary_matrix(6, rng));
    DensityOp sigma{probe, random_density_matrix(2, rng)};
    CMatrix eps = induced_observable(theta, sigma, Effect{probe, random_effect_matrix(2, rng)});
    ASSERT_TRUE(is_effect(eps));
  }
}

TEST(Fv, SelectiveAndNonselectiveExamples) {
  std::mt19937_64 rng(33);
  TensorSpace probe{{"P", 2}}, sys{{"S", 2}};
  DensityOp sigma{probe, random_density_matrix(2, rng)};
  DensityOp omega{sys, random_density_matrix(2, rng)};
  Effect b{probe, random_effect_matrix(2, rng)};
  double sb = (sigma.mat * b.mat).trace().real();

  auto id = identity_scattering(sys_probe());
  auto sel = update_selective(id, sigma, b, omega);
  EXPECT_LE(frobenius(sel.unnormalized - sb * omega.mat), 1e-14);
  ASSERT_TRUE(sel.postselected.has_value());
  EXPECT_LE(frobenius(*sel.postselected - omega.mat), 1e-13);
  EXPECT_LE(frobenius(update_nonselective(id, sigma, omega).mat - omega.mat), 1e-14);

  auto swap = scattering_from_schrodinger(sys_probe(), swap2());
  EXPECT_LE(frobenius(update_nonselective(swap, sigma, omega).mat - sigma.mat), 1e-14);

  auto theta = scattering_from_schrodinger(sys_probe(), random_unitary_matrix(4, rng));
  Effect nb{probe, identity(2) - b.mat};
  EXPECT_NEAR(update_selective(theta, sigma, b, omega).probability + update_selective(theta, sigma, nb, omega).probability,
              1.0, 1e-13);

  Effect zero{probe, CMatrix::Zero(2, 2)};
  EXPECT_TRUE(update_selective(theta, sigma, zero, omega).zero_probability());
}

TEST(Fv, PhaseFlipDilationReproducesChannel) {
  TensorSpace q{{"S", 2}};
  Channel flip{q, q, {std::sqrt(0.5) * identity(2), std::sqrt(0.5) * pauli_z()}};
  Dilation d = stinespring(flip, "P");
  auto theta = scattering_from_schrodinger(q.concat(d.env), d.u.mat);
  std::mt19937_64 rng(34);
  for (int i = 0; i < 10; ++i) {
    DensityOp omega{q, random_density_matrix(2, rng)};
    CMatrix ref = oracle::apply_kraus(flip.kraus, omega.mat);
    ASSERT_LE(frobenius(update_nonselective(theta, DensityOp{d.env, d.tau}, omega).mat - ref), 1e-12);
  }
}

TEST(Fv, IncompleteBellMeasurementThroughProbe) {
  // Bob's ancilla as the probe: nonselective FV update reproduces P rho P + (1-P) rho (1-P).
  TensorSpace ac{{"A", 2}, {"C", 2}};
  oracle::M phi = oracle::M::Zero(4, 1);
  phi(0, 0) = phi(3, 0) = 1 / std::sqrt(2.0);
  oracle::M p = phi * phi.adjoint();
  Channel bob{ac, ac, {p, oracle::id(4) - p}};
  Dilation d = stinespring(bob, "P");
  auto theta = scattering_from_schrodinger(ac.concat(d.env), d.u.mat);
  CMatrix omega = projector(ket(4, 0));
  DensityOp out = update_nonselective(theta, DensityOp{d.env, d.tau}, DensityOp{ac, omega});
  oracle::M phim = oracle::M::Zero(4, 1);
  phim(0, 0) = 1 / std::sqrt(2.0);
  phim(3, 0) = -1 / std::sqrt(2.0);
  oracle::M expected = 0.5 * (p + phim * phim.adjoint());
  EXPECT_LE(frobenius(out.mat - expected), 1e-12);
}

TEST(Fv, NonselectiveUpdateIsAChannel) {
  std::mt19937_64 rng(35);
  TensorSpace space{{"S", 2}, {"T", 2}, {"P", 2}};
  TensorSpace probe{{"P", 2}}, sys{{"S", 2}, {"T", 2}};
  auto theta = scattering_from_schrodinger(space, random_unitary_matrix(8, rng));
  DensityOp sigma{probe, random_density_matrix(2, rng)};
  for (int i = 0; i < 100; ++i) {
    DensityOp out = update_nonselective(theta, sigma, DensityOp{sys, random_density_matrix(4, rng)});
    ASSERT_TRUE(is_density(out.mat));
  }
}

TEST(Fv, ComposedDisjointMeasurementsCommute) {
  HybridNet net = make_net({{"A", vertical_worldline(0), 2}, {"C", vertical_worldline(6), 2}});
  std::mt19937_64 rng(36);
  auto measurement = [&](Rational x0, const std::string& sys, const std::string& probe, Diamond k) {
    Worldline route{{P(k.bottom.t + 1, x0 - 1), P(k.top.t - 1, x0 + 1)}, 0, 0};
    std::vector<Factor> pf{{probe, 2}};
    TensorSpace local{{sys, 2}, {probe, 2}};
    FvMeasurement m;
    m.probe.push_back({probe, route, 2});
    m.K = k;
    m.theta = scattering_from_route(route, net, pf, k, {UnitaryOp{local, random_unitary_matrix(4, rng)}});
    m.sigma = DensityOp{TensorSpace(pf), random_density_matrix(2, rng)};
    m.b = Effect{TensorSpace(pf), random_effect_matrix(2, rng)};
    return m;
  };
  auto ma = measurement(0, "A", "P1", D(P(-2, 0), P(2, 0), true));
  auto mc = measurement(6, "C", "P2", D(P(-1, 6), P(3, 6), true));
  DensityOp omega{net.space(), random_density_matrix(4, rng)};
  auto out = compose_measurements({ma, mc}, omega);
  EXPECT_EQ(out.swap_checks, 1u);
  EXPECT_LE(out.max_swap_deviation, 1e-10);
  auto single = compose_measurements({ma}, omega);
  EXPECT_LE(frobenius(single.final_state - update_selective(ma.theta, ma.sigma, ma.b, omega).unnormalized), 1e-14);
}

TEST(Fv, RouteScatteringOrderingMatchesProduct) {
  // Route crosses gamma_C (x = 6) then gamma_A (x = 0).
  HybridNet net = make_net({{"A", vertical_worldline(0), 2}, {"C", vertical_worldline(6), 2}});
  Worldline route{{P(0, 7), P(8, -1)}, -1, -1};
  Diamond k = D(P(-1, 7), P(9, -1), true);
  std::mt19937_64 rng(37);
  CMatrix u_bc = random_unitary_matrix(4, rng), u_ab = random_unitary_matrix(4, rng);
  std::vector<Factor> probe{{"B", 2}};
  auto theta = scattering_from_route(route, net, probe, k,
                                     {UnitaryOp{TensorSpace{{"B", 2}, {"C", 2}}, u_bc},
                                      UnitaryOp{TensorSpace{{"A", 2}, {"B", 2}}, u_ab}});
  ASSERT_EQ(theta.interactions.size(), 2u);
  EXPECT_EQ(theta.interactions[0].labels.front(), "C");
  // theta.space is (A, C, B); Schrodinger evolution (u_AB (x) 1_C)(1_A (x) u_BC).
  CMatrix schrod = oracle::embed(u_ab, {0, 2}, {2, 2, 2}) * oracle::embed(u_bc, {2, 1}, {2, 2, 2});
  EXPECT_LE(frobenius(theta.u.mat - schrod.adjoint()), 1e-12);
}

TEST(Fv, RouteWithoutCrossingsActsOnProbeOnly) {
  HybridNet net = make_net({{"A", vertical_worldline(0), 2}});
  Worldline route = vertical_worldline(5);
  std::mt19937_64 rng(38);
  CMatrix ub = random_unitary_matrix(2, rng);
  TensorSpace pb{{"B", 2}};
  auto theta = scattering_from_route(route, net, {{"B", 2}}, D(P(-1, 5), P(1, 5), true), {}, {UnitaryOp{pb, ub}});
  EXPECT_TRUE(theta.interactions.empty());
  EXPECT_LE(frobenius(theta.u.mat - kron(identity(2), ub.adjoint())), 1e-14);
  CMatrix a = random_hermitian(2, rng);
  EXPECT_LE(frobenius(theta.apply(kron(a, identity(2))) - kron(a, identity(2))), 1e-13);
}

TEST(Fv, RouteRejectsNonlocalUnitaryAndOutsideCrossings) {
  HybridNet net = make_net({{"A", vertical_worldline(0), 2}, {"C", vertical_worldline(6), 2}});
  Worldline route{{P(0, -1), P(2, 1)}, 0, 0};
  Diamond k = D(P(-1, 0), P(3, 0), true);
  try {
    scattering_from_route(route, net, {{"B", 2}}, k, {UnitaryOp{TensorSpace{{"C", 2}, {"B", 2}}, identity(4)}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonlocalUnitary);
  }
  try {
    scattering_from_route(route, net, {{"B", 2}}, D(P(3, 0), P(4, 0), true),
                          {UnitaryOp{TensorSpace{{"A", 2}, {"B", 2}}, identity(4)}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CrossingOutsideCouplingZone);
  }
}

TEST(Fv, FactorScatteringProductOnAB) {
  std::mt19937_64 rng(39);
  TensorSpace abc{{"A", 2}, {"B", 2}, {"C", 2}};
  CMatrix u_ab = random_unitary_matrix(4, rng);
  auto theta = scattering_from_schrodinger(abc, kron(u_ab, identity(2)));
  auto res = factor_scattering(theta, {"A"}, {"B"}, {"C"});
  ASSERT_TRUE(std::holds_alternative<ScatteringFactors>(res));
  auto& f = std::get<ScatteringFactors>(res);
  EXPECT_LE(f.reconstruction, 1e-9);
  // Theta(a) = psi_BC(chi_AB(a) (x) 1_C), checked on random operators with index-level embeddings.
  for (int i = 0; i < 5; ++i) {
    CMatrix a = ginibre(8, 8, rng);
    CMatrix v = oracle::embed(f.psi_bc.mat, {1, 2}, {2, 2, 2}), w = oracle::embed(f.chi_ab.mat, {0, 1}, {2, 2, 2});
    CMatrix ref = v * w * a * w.adjoint() * v.adjoint();
    EXPECT_LE(frobenius(theta.apply(a) - ref), 1e-9);
  }
}

TEST(Fv, FactorScatteringCnotWitness) {
  TensorSpace abc{{"A", 2}, {"B", 1}, {"C", 2}};
  CMatrix cnot = CMatrix::Zero(4, 4);
  cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;
  auto res = factor_scattering(scattering_from_schrodinger(abc, cnot), {"A"}, {"B"}, {"C"});
  ASSERT_TRUE(std::holds_alternative<NotFactorable>(res));
  auto& nf = std::get<NotFactorable>(res);
  EXPECT_LE(frobenius(nf.witness - oracle::pauli_z()), 1e-15);
  // Ad_CNOT(1 (x) Z) = Z (x) Z leaves the subalgebra 1_A (x) B(C).
  CMatrix zz = cnot * kron(identity(2), pauli_z()) * cnot.adjoint();
  EXPECT_LE(frobenius(zz - oracle::kron(oracle::pauli_z(), oracle::pauli_z())), 1e-15);
}

TEST(Fv, FactorScatteringRandomStructured) {
  std::mt19937_64 rng(40);
  TensorSpace abc{{"A", 2}, {"B", 2}, {"C", 2}};
  for (int i = 0; i < 20; ++i) {
    CMatrix u_ab = random_unitary_matrix(4, rng), u_bc = random_unitary_matrix(4, rng);
    CMatrix schrod = kron(u_ab, identity(2)) * kron(identity(2), u_bc);
    auto res = factor_scattering(scattering_from_schrodinger(abc, schrod), {"A"}, {"B"}, {"C"});
    ASSERT_TRUE(std::holds_alternative<ScatteringFactors>(res));
    ASSERT_LE(std::get<ScatteringFactors>(res).reconstruction, 1e-9);
  }
}

TEST(Fv, LocalitySuites) {
  auto rep = fv_locality_suite(40, 12);
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.fixes_complement.checks > 0 && rep.nonselective_locality.checks > 0 &&
                rep.probe_only_effects.checks > 0 && rep.localisation_transport.checks > 0,
            true);
  EXPECT_LE(rep.max_residual, 1e-9);
}
