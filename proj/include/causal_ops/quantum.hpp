#pragma once

// Finite-dimensional quantum objects over labelled tensor factors.
// Composite indices are big-endian: the leftmost factor is most significant.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causal_ops/error.hpp"

namespace causal_ops {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

namespace tol {
inline constexpr double hermitian = 1e-12;
inline constexpr double trace = 1e-12;
inline constexpr double psd_relative = 1e-9;
inline constexpr double equality = 1e-10;
inline constexpr double kraus_drop = 1e-10;
}  // namespace tol

struct Factor {
  std::string label;
  int dim;
};

inline bool operator==(const Factor& a, const Factor& b) { return a.label == b.label && a.dim == b.dim; }

class TensorSpace {
 public:
  TensorSpace() = default;
  TensorSpace(std::initializer_list<Factor> f) : TensorSpace(std::vector<Factor>(f)) {}
  explicit TensorSpace(std::vector<Factor> f) : factors_(std::move(f)) {
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      if (factors_[i].dim < 1) throw Error(ErrorKind::InvalidValue, "factor '" + factors_[i].label + "' has dim < 1");
      for (std::size_t j = 0; j < i; ++j)
        if (factors_[j].label == factors_[i].label)
          throw Error(ErrorKind::InvalidValue, "duplicate factor label '" + factors_[i].label + "'");
    }
  }

  const std::vector<Factor>& factors() const { return factors_; }
  std::size_t size() const { return factors_.size(); }

  int dim() const {
    int d = 1;
    for (auto& f : factors_) d *= f.dim;
    return d;
  }

  bool has(const std::string& label) const { return find(label) >= 0; }

  int index_of(const std::string& label) const {
    int i = find(label);
    if (i < 0) throw Error(ErrorKind::DimensionMismatch, "unknown factor label '" + label + "'");
    return i;
  }

  int dim_of(const std::string& label) const { return factors_[index_of(label)].dim; }

  int dim_of(const std::vector<std::string>& labels) const {
    int d = 1;
    for (auto& l : labels) d *= dim_of(l);
    return d;
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (auto& f : factors_) out.push_back(f.label);
    return out;
  }

  /// Factors named in `labels`, kept in this space's order.
  TensorSpace restricted(const std::vector<std::string>& labels) const {
    std::vector<Factor> out;
    for (auto& f : factors_)
      if (std::find(labels.begin(), labels.end(), f.label) != labels.end()) out.push_back(f);
    if (out.size() != labels.size()) {
      for (auto& l : labels) index_of(l);
      throw Error(ErrorKind::InvalidValue, "repeated label in factor subset");
    }
    return TensorSpace(out);
  }

  /// Factors in the order given by `labels`.
  TensorSpace ordered(const std::vector<std::string>& labels) const {
    std::vector<Factor> out;
    for (auto& l : labels) out.push_back(factors_[index_of(l)]);
    return TensorSpace(out);
  }

  TensorSpace complement(const std::vector<std::string>& labels) const {
    std::vector<Factor> out;
    for (auto& f : factors_)
      if (std::find(labels.begin(), labels.end(), f.label) == labels.end()) out.push_back(f);
    return TensorSpace(out);
  }

  TensorSpace concat(const TensorSpace& o) const {
    auto f = factors_;
    f.insert(f.end(), o.factors_.begin(), o.factors_.end());
    return TensorSpace(f);
  }

  friend bool operator==(const TensorSpace& a, const TensorSpace& b) { return a.factors_ == b.factors_; }

 private:
  int find(const std::string& label) const {
    for (std::size_t i = 0; i < factors_.size(); ++i)
      if (factors_[i].label == label) return static_cast<int>(i);
    return -1;
  }

  std::vector<Factor> factors_;
};

// ---------------------------------------------------------------------------
// Small constructors.

inline CMatrix identity(int d) { return CMatrix::Identity(d, d); }

inline CMatrix matrix_unit(int d, int i, int j) {
  CMatrix m = CMatrix::Zero(d, d);
  m(i, j) = 1.0;
  return m;
}

inline CVector ket(int d, int i) {
  CVector v = CVector::Zero(d);
  v(i) = 1.0;
  return v;
}

inline CMatrix projector(const CVector& v) { return v * v.adjoint(); }

inline CMatrix pauli_x() {
  CMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline CMatrix pauli_y() {
  CMatrix m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}
inline CMatrix pauli_z() {
  CMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

/// Generalised shift X|k> = |k+1 mod d>.
inline CMatrix shift(int d) {
  CMatrix m = CMatrix::Zero(d, d);
  for (int k = 0; k < d; ++k) m((k + 1) % d, k) = 1.0;
  return m;
}

/// Generalised clock Z|k> = w^k |k>.
inline CMatrix clock(int d) {
  CMatrix m = CMatrix::Zero(d, d);
  for (int k = 0; k < d; ++k) m(k, k) = std::polar(1.0, 2.0 * M_PI * k / d);
  return m;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix r(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

inline CVector kron(const CVector& a, const CVector& b) {
  CVector r(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) r.segment(i * b.size(), b.size()) = a(i) * b;
  return r;
}

inline double frobenius(const CMatrix& m) { return m.norm(); }

// ---------------------------------------------------------------------------
// Index bookkeeping.

namespace detail {

inline std::vector<int> digits_of(int index, const std::vector<int>& dims) {
  std::vector<int> d(dims.size());
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    d[k] = index % dims[k];
    index /= dims[k];
  }
  return d;
}

inline std::vector<int> dims_of(const TensorSpace& s) {
  std::vector<int> d;
  for (auto& f : s.factors()) d.push_back(f.dim);
  return d;
}

/// perm[I] = index in `to` of the basis vector with index I in `from`; both hold the same factors.
inline std::vector<int> permutation(const TensorSpace& from, const TensorSpace& to) {
  if (from.size() != to.size() || from.dim() != to.dim())
    throw Error(ErrorKind::DimensionMismatch, "spaces hold different factors");
  std::vector<int> pos(from.size());
  for (std::size_t k = 0; k < from.size(); ++k) {
    pos[k] = to.index_of(from.factors()[k].label);
    if (to.factors()[pos[k]].dim != from.factors()[k].dim)
      throw Error(ErrorKind::DimensionMismatch, "factor '" + from.factors()[k].label + "' changes dimension");
  }
  auto fd = dims_of(from), td = dims_of(to);
  std::vector<int> perm(from.dim());
  for (int i = 0; i < from.dim(); ++i) {
    auto d = digits_of(i, fd);
    std::vector<int> e(td.size());
    for (std::size_t k = 0; k < d.size(); ++k) e[pos[k]] = d[k];
    int j = 0;
    for (std::size_t k = 0; k < e.size(); ++k) j = j * td[k] + e[k];
    perm[i] = j;
  }
  return perm;
}

}  // namespace detail

/// Re-express an operator on `from` in the factor order of `to`.
inline CMatrix reorder(const CMatrix& m, const TensorSpace& from, const TensorSpace& to) {
  if (m.rows() != from.dim() || m.cols() != from.dim())
    throw Error(ErrorKind::DimensionMismatch, "operator does not match space dimension");
  auto perm = detail::permutation(from, to);
  CMatrix r(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r(perm[i], perm[j]) = m(i, j);
  return r;
}

inline CVector reorder(const CVector& v, const TensorSpace& from, const TensorSpace& to) {
  auto perm = detail::permutation(from, to);
  CVector r(v.size());
  for (int i = 0; i < v.size(); ++i) r(perm[i]) = v(i);
  return r;
}

/// op acts on the factors `on` (in that order); identity elsewhere.
inline CMatrix tensor_embed(const CMatrix& op, const std::vector<std::string>& on, const TensorSpace& space) {
  TensorSpace sub = space.ordered(on);
  if (op.rows() != sub.dim() || op.cols() != sub.dim())
    throw Error(ErrorKind::DimensionMismatch, "operator dimension does not match the named factors");
  TensorSpace rest = space.complement(on);
  return reorder(kron(op, identity(rest.dim())), sub.concat(rest), space);
}

/// Partial trace onto `keep`, result in the space's factor order.
inline CMatrix partial_trace(const CMatrix& m, const TensorSpace& space, const std::vector<std::string>& keep) {
  if (m.rows() != space.dim() || m.cols() != space.dim())
    throw Error(ErrorKind::DimensionMismatch, "matrix does not match space dimension");
  TensorSpace kept = space.restricted(keep);
  TensorSpace traced = space.complement(keep);
  CMatrix r = reorder(m, space, kept.concat(traced));
  int dk = kept.dim(), dt = traced.dim();
  CMatrix out = CMatrix::Zero(dk, dk);
  for (int i = 0; i < dk; ++i)
    for (int j = 0; j < dk; ++j) {
      Complex s = 0;
      for (int k = 0; k < dt; ++k) s += r(i * dt + k, j * dt + k);
      out(i, j) = s;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral checks.

inline bool is_hermitian(const CMatrix& m, double eps = tol::hermitian) {
  return m.rows() == m.cols() && (m - m.adjoint()).cwiseAbs().maxCoeff() <= eps;
}

inline Eigen::VectorXd hermitian_eigenvalues(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es((m + m.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Minimum eigenvalue >= -1e-9 * max(1, max eigenvalue).
inline bool is_psd(const CMatrix& m) {
  auto ev = hermitian_eigenvalues(m);
  double top = std::max(1.0, ev.maxCoeff());
  return ev.minCoeff() >= -tol::psd_relative * top;
}

struct DensityOp {
  TensorSpace space;
  CMatrix mat;
};

struct Effect {
  TensorSpace space;
  CMatrix mat;
};

inline bool is_density(const CMatrix& m) {
  return is_hermitian(m) && is_psd(m) && std::abs(m.trace() - Complex(1.0)) <= tol::trace;
}

inline bool is_effect(const CMatrix& m) {
  if (!is_hermitian(m, 1e-10)) return false;
  auto ev = hermitian_eigenvalues(m);
  return ev.minCoeff() >= -tol::psd_relative && ev.maxCoeff() <= 1.0 + tol::psd_relative;
}

inline DensityOp make_state(TensorSpace space, CMatrix mat) {
  if (mat.rows() != space.dim() || mat.cols() != space.dim())
    throw Error(ErrorKind::DimensionMismatch, "state does not match space dimension");
  if (!is_hermitian(mat)) throw Error(ErrorKind::InvalidValue, "state is not Hermitian");
  if (!is_psd(mat)) throw Error(ErrorKind::NotPSD, "state has a negative eigenvalue");
  if (std::abs(mat.trace() - Complex(1.0)) > tol::trace) throw Error(ErrorKind::InvalidValue, "state trace is not 1");
  return DensityOp{std::move(space), std::move(mat)};
}

inline Effect make_effect(TensorSpace space, CMatrix mat) {
  if (mat.rows() != space.dim() || mat.cols() != space.dim())
    throw Error(ErrorKind::DimensionMismatch, "effect does not match space dimension");
  if (!is_effect(mat)) throw Error(ErrorKind::InvalidValue, "operator is not between 0 and 1");
  return Effect{std::move(space), std::move(mat)};
}

inline double trace_distance(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorKind::DimensionMismatch, "trace distance of differently sized operators");
  return 0.5 * hermitian_eigenvalues(a - b).cwiseAbs().sum();
}

inline double trace_distance(const DensityOp& a, const DensityOp& b) {
  if (!(a.space == b.space)) throw Error(ErrorKind::DimensionMismatch, "states live on different spaces");
  return trace_distance(a.mat, b.mat);
}

/// Projector onto the strictly positive eigenspace of a Hermitian operator.
inline CMatrix positive_part_projector(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es((m + m.adjoint()) / 2.0);
  CMatrix p = CMatrix::Zero(m.rows(), m.cols());
  for (int k = 0; k < m.rows(); ++k)
    if (es.eigenvalues()(k) > 0) p += projector(es.eigenvectors().col(k));
  return p;
}

// ---------------------------------------------------------------------------
// Channels.

struct ChannelValidation {
  bool cp = false;
  bool tp = false;
  bool trace_nonincreasing = false;
  bool unital_dual = false;
};

/// A completely positive trace-nonincreasing map in Kraus form.
struct Channel {
  TensorSpace space_in;
  TensorSpace space_out;
  std::vector<CMatrix> kraus;

  CMatrix apply(const CMatrix& rho) const {
    if (rho.rows() != space_in.dim() || rho.cols() != space_in.dim())
      throw Error(ErrorKind::DimensionMismatch, "input does not match channel input space");
    CMatrix out = CMatrix::Zero(space_out.dim(), space_out.dim());
    for (auto& k : kraus) out.noalias() += k * rho * k.adjoint();
    return out;
  }

  CMatrix kraus_sum() const {
    CMatrix s = CMatrix::Zero(space_in.dim(), space_in.dim());
    for (auto& k : kraus) s.noalias() += k.adjoint() * k;
    return s;
  }

  bool nonselective() const { return frobenius(kraus_sum() - identity(space_in.dim())) <= tol::equality; }

  /// J = sum_ij E_ij (x) L(E_ij), input factor on the left.
  CMatrix choi() const {
    int di = space_in.dim(), d_o = space_out.dim();
    CMatrix j = CMatrix::Zero(di * d_o, di * d_o);
    for (int a = 0; a < di; ++a)
      for (int b = 0; b < di; ++b) {
        // L(E_ab) = sum_k K|a><b|K^dagger
        CMatrix blk = CMatrix::Zero(d_o, d_o);
        for (auto& k : kraus) blk.noalias() += k.col(a) * k.col(b).adjoint();
        j.block(a * d_o, b * d_o, d_o, d_o) = blk;
      }
    return j;
  }
};

inline Channel make_channel(TensorSpace in, TensorSpace out, std::vector<CMatrix> kraus) {
  for (auto& k : kraus)
    if (k.rows() != out.dim() || k.cols() != in.dim())
      throw Error(ErrorKind::DimensionMismatch, "Kraus operator shape does not match channel spaces");
  Channel c{std::move(in), std::move(out), std::move(kraus)};
  auto ev = hermitian_eigenvalues(c.kraus_sum());
  if (ev.size() && ev.maxCoeff() > 1.0 + tol::equality)
    throw Error(ErrorKind::InvalidValue, "Kraus operators are trace-increasing");
  return c;
}

inline Channel identity_channel(const TensorSpace& s) { return Channel{s, s, {identity(s.dim())}}; }

inline Channel unitary_channel(const TensorSpace& s, const CMatrix& u) {
  if (u.rows() != s.dim() || u.cols() != s.dim()) throw Error(ErrorKind::DimensionMismatch, "unitary shape");
  return Channel{s, s, {u}};
}

inline ChannelValidation validate_channel(const Channel& c) {
  ChannelValidation v;
  v.cp = is_psd(c.choi());
  CMatrix s = c.kraus_sum();
  int d = c.space_in.dim();
  v.tp = frobenius(s - identity(d)) <= tol::equality;
  v.trace_nonincreasing = hermitian_eigenvalues(identity(d) - s).minCoeff() >= -tol::equality;
  CMatrix u = CMatrix::Zero(c.space_out.dim(), c.space_out.dim());
  for (auto& k : c.kraus) u.noalias() += k * k.adjoint();
  v.unital_dual = frobenius(u - identity(c.space_out.dim())) <= tol::equality;
  return v;
}

inline Channel channel_from_choi(const CMatrix& j, const TensorSpace& in, const TensorSpace& out) {
  int di = in.dim(), d_o = out.dim();
  if (j.rows() != di * d_o || j.cols() != di * d_o)
    throw Error(ErrorKind::DimensionMismatch, "Choi matrix does not match spaces");
  if (!is_hermitian(j, 1e-9)) throw Error(ErrorKind::NotPSD, "Choi matrix is not Hermitian");
  if (!is_psd(j)) throw Error(ErrorKind::NotPSD, "Choi matrix has a negative eigenvalue");
  Eigen::SelfAdjointEigenSolver<CMatrix> es((j + j.adjoint()) / 2.0);
  Channel c{in, out, {}};
  for (int k = di * d_o - 1; k >= 0; --k) {
    double lam = es.eigenvalues()(k);
    if (lam < tol::kraus_drop) continue;
    CMatrix kr(d_o, di);
    for (int i = 0; i < di; ++i)
      for (int o = 0; o < d_o; ++o) kr(o, i) = std::sqrt(lam) * es.eigenvectors()(i * d_o + o, k);
    c.kraus.push_back(kr);
  }
  if (c.kraus.empty()) c.kraus.push_back(CMatrix::Zero(d_o, di));
  return c;
}

/// Builds a channel from the action of a linear map on matrix units.
inline Channel channel_from_map(const TensorSpace& in, const TensorSpace& out,
                                const std::function<CMatrix(const CMatrix&)>& f) {
  int di = in.dim(), d_o = out.dim();
  CMatrix j = CMatrix::Zero(di * d_o, di * d_o);
  for (int a = 0; a < di; ++a)
    for (int b = 0; b < di; ++b) j.block(a * d_o, b * d_o, d_o, d_o) = f(matrix_unit(di, a, b));
  return channel_from_choi(j, in, out);
}

/// Minimal Kraus representation.
inline Channel minimal_kraus(const Channel& c) { return channel_from_choi(c.choi(), c.space_in, c.space_out); }

inline double choi_distance(const Channel& a, const Channel& b) {
  CMatrix ja = a.choi(), jb = b.choi();
  if (ja.rows() != jb.rows()) throw Error(ErrorKind::DimensionMismatch, "channels on different spaces");
  return frobenius(ja - jb);
}

/// b after a.
inline Channel compose(const Channel& b, const Channel& a) {
  if (!(a.space_out == b.space_in)) throw Error(ErrorKind::DimensionMismatch, "composition spaces differ");
  Channel c{a.space_in, b.space_out, {}};
  for (auto& kb : b.kraus)
    for (auto& ka : a.kraus) c.kraus.push_back(kb * ka);
  return c;
}

/// A channel on some factors of `space`, identity on the rest. Input and output factors must agree.
inline Channel embed_channel(const Channel& c, const TensorSpace& space) {
  if (!(c.space_in == c.space_out)) throw Error(ErrorKind::DimensionMismatch, "embedding needs equal in/out spaces");
  auto labels = c.space_in.labels();
  Channel r{space, space, {}};
  for (auto& k : c.kraus) r.kraus.push_back(tensor_embed(k, labels, space));
  return r;
}

/// Heisenberg picture a -> sum K^dagger a K.
struct DualMap {
  TensorSpace space_in;   // where observables live (the channel's output)
  TensorSpace space_out;  // the channel's input
  std::vector<CMatrix> kraus;

  CMatrix apply(const CMatrix& a) const {
    if (a.rows() != space_in.dim()) throw Error(ErrorKind::DimensionMismatch, "observable does not match space");
    CMatrix out = CMatrix::Zero(space_out.dim(), space_out.dim());
    for (auto& k : kraus) out.noalias() += k.adjoint() * a * k;
    return out;
  }
};

inline DualMap hs_adjoint(const Channel& c) { return DualMap{c.space_out, c.space_in, c.kraus}; }

struct UnitaryOp {
  TensorSpace space;
  CMatrix mat;
};

inline bool is_unitary(const CMatrix& u, double eps = tol::equality) {
  return u.rows() == u.cols() && frobenius(u.adjoint() * u - identity(u.rows())) <= eps;
}

inline UnitaryOp make_unitary(TensorSpace space, CMatrix mat) {
  if (mat.rows() != space.dim() || mat.cols() != space.dim())
    throw Error(ErrorKind::DimensionMismatch, "unitary does not match space dimension");
  if (!is_unitary(mat)) throw Error(ErrorKind::InvalidValue, "operator is not unitary");
  return UnitaryOp{std::move(space), std::move(mat)};
}

/// Columns spanning the orthogonal complement of the columns of an isometry.
inline CMatrix orthogonal_complement(const CMatrix& v) {
  Eigen::HouseholderQR<CMatrix> qr(v);
  CMatrix q = qr.householderQ();
  return q.rightCols(v.rows() - v.cols());
}

struct Dilation {
  TensorSpace env;
  CMatrix tau;
  UnitaryOp u;  // on in (x) env, with L(rho) = Tr_env(u (rho (x) tau) u^dagger)
};

inline Dilation stinespring(const Channel& c, const std::string& env_label = "env") {
  if (!c.nonselective()) throw Error(ErrorKind::NotTracePreserving, "Stinespring dilation needs a nonselective channel");
  if (!(c.space_in.dim() == c.space_out.dim()))
    throw Error(ErrorKind::DimensionMismatch, "unitary dilation needs equal input and output dimension");
  int d = c.space_in.dim();
  int r = static_cast<int>(c.kraus.size());
  int big = d * r;
  // V|i> = sum_k K_k|i> (x) |k>.
  CMatrix v = CMatrix::Zero(big, d);
  for (int k = 0; k < r; ++k)
    for (int i = 0; i < d; ++i)
      for (int o = 0; o < d; ++o) v(o * r + k, i) = c.kraus[k](o, i);
  CMatrix u = CMatrix::Zero(big, big);
  CMatrix rest = orthogonal_complement(v);
  int next = 0;
  for (int i = 0; i < d; ++i)
    for (int e = 0; e < r; ++e) u.col(i * r + e) = e == 0 ? CVector(v.col(i)) : CVector(rest.col(next++));
  TensorSpace env({Factor{env_label, r}});
  return Dilation{env, matrix_unit(r, 0, 0), UnitaryOp{c.space_in.concat(env), u}};
}

// ---------------------------------------------------------------------------
// Seeded random instances.

inline CMatrix ginibre(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix g(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      double re = n(rng);
      double im = n(rng);
      g(i, j) = Complex(re, im);
    }
  return g;
}

inline CMatrix random_unitary_matrix(int d, std::mt19937_64& rng) {
  Eigen::HouseholderQR<CMatrix> qr(ginibre(d, d, rng));
  CMatrix q = qr.householderQ();
  CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < d; ++k) {
    Complex z = r(k, k);
    q.col(k) *= std::abs(z) > 0 ? z / std::abs(z) : Complex(1.0);
  }
  return q;
}

inline UnitaryOp random_unitary(const TensorSpace& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return UnitaryOp{s, random_unitary_matrix(s.dim(), rng)};
}

inline CMatrix random_density_matrix(int d, std::mt19937_64& rng) {
  CMatrix g = ginibre(d, d, rng);
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return (rho + rho.adjoint()) / 2.0;
}

inline DensityOp random_state(const TensorSpace& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return DensityOp{s, random_density_matrix(s.dim(), rng)};
}

inline CVector random_pure_vector(int d, std::mt19937_64& rng) {
  CVector v = ginibre(d, 1, rng).col(0);
  return v / v.norm();
}

inline CMatrix random_hermitian(int d, std::mt19937_64& rng) {
  CMatrix g = ginibre(d, d, rng);
  return (g + g.adjoint()) / 2.0;
}

/// Random effect: U diag(uniform[0,1]) U^dagger.
inline CMatrix random_effect_matrix(int d, std::mt19937_64& rng) {
  CMatrix u = random_unitary_matrix(d, rng);
  std::uniform_real_distribution<double> un(0.0, 1.0);
  CMatrix diag = CMatrix::Zero(d, d);
  for (int k = 0; k < d; ++k) diag(k, k) = un(rng);
  CMatrix e = u * diag * u.adjoint();
  return (e + e.adjoint()) / 2.0;
}

inline Channel random_channel_between(const TensorSpace& in, const TensorSpace& out, int kraus_count,
                                      std::mt19937_64& rng) {
  int di = in.dim(), d_o = out.dim();
  if (kraus_count < 1 || kraus_count * d_o < di)
    throw Error(ErrorKind::InvalidValue, "too few Kraus operators for a trace-preserving channel");
  Eigen::HouseholderQR<CMatrix> qr(ginibre(kraus_count * d_o, di, rng));
  CMatrix q = qr.householderQ() * CMatrix::Identity(kraus_count * d_o, di);
  Channel c{in, out, {}};
  for (int k = 0; k < kraus_count; ++k) c.kraus.push_back(q.block(k * d_o, 0, d_o, di));
  return c;
}

inline Channel random_channel(const TensorSpace& s, int kraus_count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_channel_between(s, s, kraus_count, rng);
}

}  // namespace causal_ops
