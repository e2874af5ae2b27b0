#pragma once

// Brute-force reference computations written against raw indices, independent of the
// library's reorder/tensor_embed/partial_trace machinery.

#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using C = std::complex<double>;
using M = Eigen::MatrixXcd;

inline int flat(const std::vector<int>& digits, const std::vector<int>& dims) {
  int j = 0;
  for (std::size_t k = 0; k < dims.size(); ++k) j = j * dims[k] + digits[k];
  return j;
}

inline std::vector<int> split(int index, const std::vector<int>& dims) {
  std::vector<int> d(dims.size());
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    d[k] = index % dims[k];
    index /= dims[k];
  }
  return d;
}

/// op acting on factor positions `on` (in op's own order) of a space with `dims`.
inline M embed(const M& op, const std::vector<int>& on, const std::vector<int>& dims) {
  int n = 1;
  for (int d : dims) n *= d;
  std::vector<int> sub;
  for (int k : on) sub.push_back(dims[k]);
  M out = M::Zero(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      auto dr = split(r, dims), dc = split(c, dims);
      bool rest_equal = true;
      for (std::size_t k = 0; k < dims.size(); ++k)
        if (std::find(on.begin(), on.end(), static_cast<int>(k)) == on.end() && dr[k] != dc[k]) rest_equal = false;
      if (!rest_equal) continue;
      std::vector<int> sr, sc;
      for (int k : on) sr.push_back(dr[k]), sc.push_back(dc[k]);
      out(r, c) = op(flat(sr, sub), flat(sc, sub));
    }
  return out;
}

/// Partial trace keeping factor positions `keep` (ascending).
inline M ptrace(const M& m, const std::vector<int>& keep, const std::vector<int>& dims) {
  std::vector<int> kd;
  for (int k : keep) kd.push_back(dims[k]);
  int nk = 1;
  for (int d : kd) nk *= d;
  M out = M::Zero(nk, nk);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      auto dr = split(r, dims), dc = split(c, dims);
      bool traced_equal = true;
      for (std::size_t k = 0; k < dims.size(); ++k)
        if (std::find(keep.begin(), keep.end(), static_cast<int>(k)) == keep.end() && dr[k] != dc[k])
          traced_equal = false;
      if (!traced_equal) continue;
      std::vector<int> sr, sc;
      for (int k : keep) sr.push_back(dr[k]), sc.push_back(dc[k]);
      out(flat(sr, kd), flat(sc, kd)) += m(r, c);
    }
  return out;
}

inline M kron(const M& a, const M& b) {
  M r(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      for (int k = 0; k < b.rows(); ++k)
        for (int l = 0; l < b.cols(); ++l) r(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return r;
}

inline M apply_kraus(const std::vector<M>& ks, const M& rho) {
  M out = M::Zero(ks[0].rows(), ks[0].rows());
  for (auto& k : ks) out += k * rho * k.adjoint();
  return out;
}

inline M unit(int d, int i, int j) {
  M m = M::Zero(d, d);
  m(i, j) = 1.0;
  return m;
}

/// Choi matrix sum_ij E_ij (x) L(E_ij) from a black-box map.
template <typename F>
M choi(int din, int dout, F map) {
  M j = M::Zero(din * dout, din * dout);
  for (int a = 0; a < din; ++a)
    for (int b = 0; b < din; ++b) j += kron(unit(din, a, b), map(unit(din, a, b)));
  return j;
}

inline M pauli_x() { return (M(2, 2) << 0, 1, 1, 0).finished(); }
inline M pauli_y() { return (M(2, 2) << 0, C(0, -1), C(0, 1), 0).finished(); }
inline M pauli_z() { return (M(2, 2) << 1, 0, 0, -1).finished(); }
inline M id(int d) { return M::Identity(d, d); }

/// Trace norm / 2 via singular values of the Hermitian difference.
inline double trace_distance(const M& a, const M& b) {
  Eigen::SelfAdjointEigenSolver<M> es((a - b + (a - b).adjoint()) / 2.0);
  return es.eigenvalues().cwiseAbs().sum() / 2.0;
}

inline M haar_unitary(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  M z(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) z(i, j) = C(n(rng), n(rng));
  Eigen::HouseholderQR<M> qr(z);
  M q = qr.householderQ();
  M r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < d; ++i) q.col(i) *= std::polar(1.0, -std::arg(r(i, i)));
  return q;
}

inline M random_density(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  M g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = C(n(rng), n(rng));
  M rho = g * g.adjoint();
  return rho / rho.trace();
}

}  // namespace oracle
