#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <vector>

#include "bergmanlab/common.hpp"

namespace bergman {

struct EigenSystem {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXcd vectors; // columns
};

/// Cyclic Jacobi eigensolver for complex Hermitian matrices with threshold
/// sweeps; converged when the off-diagonal Frobenius mass drops below
/// 1e-13 * ||A||_F. Dimensions at desk scale (<= a few thousand).
inline EigenSystem jacobi_hermitian(Eigen::MatrixXcd A, bool want_vectors = true,
                                    double herm_tol = 1e-8) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n) throw std::invalid_argument("jacobi_hermitian: matrix not square");
  const double scale = std::max(1.0, A.norm());
  if ((A - A.adjoint()).norm() > herm_tol * scale)
    throw std::invalid_argument("jacobi_hermitian: input not Hermitian within tolerance");
  A = 0.5 * (A + A.adjoint()).eval();

  Eigen::MatrixXcd V = Eigen::MatrixXcd::Identity(n, n);
  const double anorm = std::max(A.norm(), 1e-300);
  const double stop = 1e-13 * anorm;

  auto offdiag = [&]() {
    double s = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) s += 2.0 * std::norm(A(p, q));
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && offdiag() > stop; ++sweep) {
    const double thresh = (sweep < 3) ? 0.2 * offdiag() / (n * n) : 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double ab = std::abs(A(p, q));
        if (ab <= std::max(thresh, 1e-300)) {
          if (ab > 0.0 && ab <= stop / (n * n)) A(p, q) = A(q, p) = 0.0;
          continue;
        }
        const cplx phase = A(p, q) / ab;
        const double app = A(p, p).real(), aqq = A(q, q).real();
        const double tau = (aqq - app) / (2.0 * ab);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const cplx spq = s * phase;             // J(p,q) = s e^{i a}
        const cplx sqp = -s * std::conj(phase); // J(q,p)

        for (int r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const cplx arp = A(r, p), arq = A(r, q);
          A(r, p) = c * arp + sqp * arq;
          A(r, q) = spq * arp + c * arq;
          A(p, r) = std::conj(A(r, p));
          A(q, r) = std::conj(A(r, q));
        }
        A(p, p) = c * c * app + s * s * aqq - 2.0 * c * s * ab;
        A(q, q) = s * s * app + c * c * aqq + 2.0 * c * s * ab;
        A(p, q) = A(q, p) = 0.0;
        if (want_vectors) {
          for (int r = 0; r < n; ++r) {
            const cplx vrp = V(r, p), vrq = V(r, q);
            V(r, p) = c * vrp + sqp * vrq;
            V(r, q) = spq * vrp + c * vrq;
          }
        }
      }
    }
  }

  EigenSystem es;
  es.values.resize(n);
  for (int i = 0; i < n; ++i) es.values[i] = A(i, i).real();
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return es.values[a] < es.values[b]; });
  Eigen::VectorXd vals(n);
  Eigen::MatrixXcd vecs;
  if (want_vectors) vecs.resize(n, n);
  for (int i = 0; i < n; ++i) {
    vals[i] = es.values[idx[i]];
    if (want_vectors) vecs.col(i) = V.col(idx[i]);
  }
  es.values = vals;
  es.vectors = vecs;
  return es;
}

struct OnbFactor {
  Eigen::MatrixXcd C;  // C^H G C = I
  double cond = 0.0;   // spectral condition number of G
};

/// Orthonormalizing factor from a symmetric-pivoted triangular (LDL^H)
/// factorization of the Gram matrix.
inline OnbFactor onb_from_gram(const Eigen::MatrixXcd& G, bool with_cond = true) {
  const int n = static_cast<int>(G.rows());
  Eigen::LDLT<Eigen::MatrixXcd> ldlt(G);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("onb_from_gram: factorization failed");
  Eigen::VectorXd d = ldlt.vectorD().real();
  // Diagonal Gram entries legitimately span many orders of magnitude
  // (weighted monomial norms), so only nonpositive pivots flag an
  // indistinguishable basis.
  if (d.size() == 0 || !(d.minCoeff() > 1e-280))
    throw std::runtime_error("onb_from_gram: Gram matrix numerically singular");

  Eigen::MatrixXcd C = Eigen::MatrixXcd::Identity(n, n);
  ldlt.matrixU().solveInPlace(C);  // C = L^{-H}
  for (int j = 0; j < n; ++j) C.col(j) /= std::sqrt(d[j]);
  C = ldlt.transpositionsP().transpose() * C;

  OnbFactor f;
  f.C = C;
  if (with_cond) {
    const auto es = jacobi_hermitian(G, false);
    f.cond = es.values[n - 1] / es.values[0];
  }
  return f;
}

}  // namespace bergman
