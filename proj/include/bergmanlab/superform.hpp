#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "bergmanlab/common.hpp"
#include "bergmanlab/geometry.hpp"

namespace bergman {

// ---------------------------------------------------------------------------
// Graded forms in a pointwise orthonormal coframe e^1..e^n of unit-norm (1,0)
// forms. A form is stored as sum_{I,J} f_IJ M(I,J) where the basis monomial
//
//   M(I,J) := e^{i_1} ^ ... ^ e^{i_p} ^ e^{j_r +} ^ ... ^ e^{j_1 +}
//           = e^I ^ (e^J)+            (plain block ascending, dagger block
//                                      written as the dagger of e^J)
//
// With this normal form the dagger acts componentwise, M(I,J)+ = M(J,I), and
// the diagonal monomials M(J,J) coincide with the paired products
// (e^{j_1} ^ e^{j_1 +}) ^ ... so the commutative subalgebra of (p,p) blocks
// carries no signs at all. All wedge signs follow from transposition counting
// of the underlying odd generators.
// ---------------------------------------------------------------------------

class GradedForm {
 public:
  explicit GradedForm(int n) : n_(n), c_(std::size_t{1} << (2 * n), cplx(0, 0)) {
    if (n < 1 || n > 8) throw std::invalid_argument("GradedForm: n out of range");
  }
  static GradedForm scalar(int n, cplx v) {
    GradedForm f(n);
    f.set(0, 0, v);
    return f;
  }
  static GradedForm monomial(int n, std::uint32_t I, std::uint32_t J, cplx v = 1.0) {
    GradedForm f(n);
    f.set(I, J, v);
    return f;
  }

  int n() const { return n_; }
  std::uint32_t mask() const { return (1u << n_) - 1u; }
  cplx coeff(std::uint32_t I, std::uint32_t J) const { return c_[(I << n_) | J]; }
  void set(std::uint32_t I, std::uint32_t J, cplx v) { c_[(I << n_) | J] = v; }
  void add(std::uint32_t I, std::uint32_t J, cplx v) { c_[(I << n_) | J] += v; }

  GradedForm& operator+=(const GradedForm& o) {
    check(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  GradedForm& operator-=(const GradedForm& o) {
    check(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  GradedForm& operator*=(cplx s) {
    for (auto& v : c_) v *= s;
    return *this;
  }
  friend GradedForm operator+(GradedForm a, const GradedForm& b) { return a += b; }
  friend GradedForm operator-(GradedForm a, const GradedForm& b) { return a -= b; }
  friend GradedForm operator*(cplx s, GradedForm a) { return a *= s; }

  double max_abs() const {
    double m = 0.0;
    for (const auto& v : c_) m = std::max(m, std::abs(v));
    return m;
  }
  double max_abs_diff(const GradedForm& o) const {
    check(o);
    double m = 0.0;
    for (std::size_t i = 0; i < c_.size(); ++i) m = std::max(m, std::abs(c_[i] - o.c_[i]));
    return m;
  }

  template <class F>
  void for_each(F&& f) const {
    for (std::uint32_t I = 0; I <= mask(); ++I)
      for (std::uint32_t J = 0; J <= mask(); ++J) {
        const cplx v = coeff(I, J);
        if (v != cplx(0, 0)) f(I, J, v);
      }
  }

 private:
  void check(const GradedForm& o) const {
    if (o.n_ != n_) throw std::invalid_argument("GradedForm: dimension mismatch");
  }
  int n_;
  std::vector<cplx> c_;
};

// Parity of #{(a,b) in A x B : b < a}; e^A ^ e^B = merge_sign * e^{A|B}.
inline int merge_sign(std::uint32_t A, std::uint32_t B) {
  int cnt = 0;
  while (B) {
    const int b = __builtin_ctz(B);
    cnt += popcount32(A >> (b + 1));
    B &= B - 1;
  }
  return (cnt & 1) ? -1 : 1;
}

inline GradedForm wedge(const GradedForm& f, const GradedForm& g) {
  if (f.n() != g.n()) throw std::invalid_argument("wedge: dimension mismatch");
  GradedForm out(f.n());
  f.for_each([&](std::uint32_t I1, std::uint32_t J1, cplx a) {
    g.for_each([&](std::uint32_t I2, std::uint32_t J2, cplx b) {
      if ((I1 & I2) || (J1 & J2)) return;
      int s = merge_sign(I1, I2) * merge_sign(J2, J1);
      if ((popcount32(J1) * popcount32(I2)) & 1) s = -s;
      out.add(I1 | I2, J1 | J2, static_cast<double>(s) * a * b);
    });
  });
  return out;
}

/// Conjugate-linear, product-reversing involution extending complex
/// conjugation of 1-forms; componentwise in the M(I,J) normal form.
inline GradedForm dagger(const GradedForm& f) {
  GradedForm out(f.n());
  f.for_each([&](std::uint32_t I, std::uint32_t J, cplx v) { out.add(J, I, std::conj(v)); });
  return out;
}

inline bool is_dagger_real(const GradedForm& f, double tol = 1e-12) {
  return dagger(f).max_abs_diff(f) <= tol;
}

/// exp(omega') with omega' = -2i omega = sum_i e^i ^ e^{i+}, truncated at top
/// degree; equals sum_A M(A,A) in the normal form.
inline GradedForm exp_omega_prime(int n) {
  GradedForm out(n);
  for (std::uint32_t A = 0; A <= ((1u << n) - 1u); ++A) out.set(A, A, 1.0);
  return out;
}

/// Volume form omega_n = omega^n / n! = (i/2)^n M(N,N).
inline GradedForm omega_n_form(int n) {
  const std::uint32_t N = (1u << n) - 1u;
  return GradedForm::monomial(n, N, N, std::pow(cplx(0, 0.5), n));
}

/// Berezin integral: top coefficient of f divided by the top coefficient of
/// the volume form.
inline cplx berezin(const GradedForm& f, const GradedForm& vol) {
  if (f.n() != vol.n()) throw std::invalid_argument("berezin: dimension mismatch");
  const std::uint32_t N = f.mask();
  const cplx v = vol.coeff(N, N);
  if (v == cplx(0, 0)) throw std::invalid_argument("berezin: volume form has vanishing top coefficient");
  return f.coeff(N, N) / v;
}

/// Re-expresses f in the coframe dual to the frame with vectors in the
/// columns of the unitary U (substitutes e^a = sum_c U_{a,c} enew^c).
inline GradedForm rotate_frame(const GradedForm& f, const Eigen::MatrixXcd& U) {
  const int n = f.n();
  if (U.rows() != n || U.cols() != n) throw std::invalid_argument("rotate_frame: bad matrix size");
  GradedForm out(n);
  f.for_each([&](std::uint32_t I, std::uint32_t J, cplx v) {
    GradedForm acc = GradedForm::scalar(n, v);
    for (int a = 0; a < n; ++a) {
      if (!(I & (1u << a))) continue;  // ascending plain block
      GradedForm gen(n);
      for (int c = 0; c < n; ++c) gen.add(1u << c, 0, U(a, c));
      acc = wedge(acc, gen);
    }
    for (int a = n - 1; a >= 0; --a) {
      if (!(J & (1u << a))) continue;  // descending dagger block
      GradedForm gen(n);
      for (int c = 0; c < n; ++c) gen.add(0, 1u << c, std::conj(U(a, c)));
      acc = wedge(acc, gen);
    }
    out += acc;
  });
  return out;
}

/// Hermitian pairing (alpha, beta) = (i/2)^n Berezin(beta+ ^ alpha ^ e^{omega'});
/// positive on (0,q) coefficient vectors and equal to sum_J a_J conj(b_J).
inline cplx hermitian_pairing(const GradedForm& alpha, const GradedForm& beta) {
  const int n = alpha.n();
  const GradedForm integrand = wedge(wedge(dagger(beta), alpha), exp_omega_prime(n));
  return std::pow(cplx(0, 0.5), n) * berezin(integrand, omega_n_form(n));
}
inline double norm2_pairing(const GradedForm& alpha) { return hermitian_pairing(alpha, alpha).real(); }

/// Direction form chi^{q,q} = e^{I0} ^ e^{I0+} built from the negative
/// eigendirections, expressed in the chart coframe; zero off X(q) and at
/// degenerate points (callers check CurvatureData::degenerate()).
inline GradedForm direction_form(const CurvatureData& curv, int q) {
  const int n = static_cast<int>(curv.lambdas.size());
  GradedForm zero(n);
  if (curv.degenerate() || q != curv.q_index) return zero;
  const std::uint32_t I0 = (q > 0) ? ((1u << q) - 1u) : 0u;
  GradedForm chi_eigen = GradedForm::monomial(n, I0, I0, 1.0);
  if (q == 0) return chi_eigen;
  return rotate_frame(chi_eigen, curv.v_frame.adjoint().eval());
}

/// f_chi: sum of the diagonal coefficients f_JJ with J disjoint from I0,
/// evaluated in the curvature eigenframe. Primary route.
inline double symbol_reduce(const GradedForm& f, const CurvatureData& curv) {
  if (curv.degenerate()) throw std::domain_error("symbol_reduce: degenerate curvature");
  const int n = f.n();
  const int q = curv.q_index;
  const GradedForm fe = rotate_frame(f, curv.v_frame);
  const std::uint32_t I0 = (q > 0) ? ((1u << q) - 1u) : 0u;
  cplx s = 0.0;
  for (std::uint32_t J = 0; J <= fe.mask(); ++J)
    if (!(J & I0)) s += fe.coeff(J, J);
  return s.real();
}

/// Berezin-integral route for f_chi; agrees with symbol_reduce and serves as
/// its independent self-check.
inline cplx symbol_reduce_berezin(const GradedForm& f, const CurvatureData& curv) {
  if (curv.degenerate()) throw std::domain_error("symbol_reduce_berezin: degenerate curvature");
  const int n = f.n();
  const GradedForm chi = direction_form(curv, curv.q_index);
  const GradedForm integrand = wedge(wedge(chi, f), exp_omega_prime(n));
  return std::pow(cplx(0, 0.5), n) * berezin(integrand, omega_n_form(n));
}

}  // namespace bergman
