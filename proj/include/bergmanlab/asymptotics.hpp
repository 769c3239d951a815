#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "bergmanlab/common.hpp"
#include "bergmanlab/geometry.hpp"
#include "bergmanlab/spaces.hpp"
#include "bergmanlab/toeplitz.hpp"

namespace bergman {

// ---------------------------------------------------------------------------
// k-sweep diagnostics: each limit theorem becomes a finite-k error that the
// report tables track against its acceptance band.
// ---------------------------------------------------------------------------

/// L^1 distance between k^{-n} B_k and pi^{-n} 1_{X(q)} |det| over the grid.
inline double l1_bergman_error(const HarmonicSpace& s, const QuadratureGrid& grid,
                               const Eigen::VectorXd& B) {
  const double kn = std::pow(static_cast<double>(s.k), s.geom.n());
  const double pin = std::pow(kPi, s.geom.n());
  double err = 0.0;
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
    const CurvatureData c = s.geom.curvature_at(grid.nodes[i].p);
    const double target = (!c.degenerate() && c.q_index == s.q) ? c.det_abs / pin : 0.0;
    err += grid.nodes[i].w * std::abs(B[static_cast<Eigen::Index>(i)] / kn - target);
  }
  return err;
}

/// Maximum pointwise deviation of k^{-n} B_k from the constant-curvature
/// limit, relative to the limit (for the exact catalog constants).
inline double max_rel_bergman_dev(const HarmonicSpace& s, const QuadratureGrid& grid,
                                  const Eigen::VectorXd& B, double target) {
  double dev = 0.0;
  const double kn = std::pow(static_cast<double>(s.k), s.geom.n());
  for (Eigen::Index i = 0; i < B.size(); ++i)
    dev = std::max(dev, std::abs(B[i] / kn - target) / std::abs(target));
  return dev;
}

/// Off-diagonal kernel mass fraction beyond geodesic angle delta, integrated
/// on a dedicated coarse pair grid (documented pair budget) and normalized by
/// the total mass k^{-n} dim.
inline double offdiagonal_mass(const HarmonicSpace& s, const QuadratureGrid& pair_grid,
                               double delta) {
  if (s.dim == 0) return 0.0;
  const double cq = comp_metric_scale(s.q);
  Eigen::MatrixXcd V;
  s.eval_onb(std::span<const GridNode>(pair_grid.nodes.data(), pair_grid.nodes.size()), V);
  const std::size_t m = pair_grid.nodes.size();
  double mass = 0.0;
  parallel_ranges(
      m, mass, [] { return 0.0; },
      [&](double& acc, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          for (std::size_t j = 0; j < m; ++j) {
            if (delta > 0.0 &&
                s.geom.geodesic_angle(pair_grid.nodes[i].p, pair_grid.nodes[j].p) <= delta)
              continue;
            const cplx kij = V.col(static_cast<Eigen::Index>(j)).dot(V.col(static_cast<Eigen::Index>(i)));
            acc += pair_grid.nodes[i].w * pair_grid.nodes[j].w * cq * cq * std::norm(kij);
          }
        }
      },
      [](double& a, double p) { a += p; });
  return mass / static_cast<double>(s.dim);
}

/// Curvature mass of {field > gamma} on the X(q) stratum.
inline double sublevel_mass(const ModelGeometry& g, const QuadratureGrid& grid, int q,
                            const std::function<double(const Point&)>& field, double gamma) {
  const double pin = std::pow(kPi, g.n());
  double m = 0.0;
  for (const auto& nd : grid.nodes) {
    const CurvatureData c = g.curvature_at(nd.p);
    if (c.degenerate() || c.q_index != q) continue;
    if (field(nd.p) > gamma) m += nd.w * c.det_abs / pin;
  }
  return m;
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;  // log-space constant
  double r2 = 0.0;
};

namespace detail {
inline RateFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double n = static_cast<double>(m);
  const double den = n * sxx - sx * sx;
  RateFit f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / n;
  for (std::size_t i = 0; i < m; ++i) {
    const double fit = f.intercept + f.slope * x[i];
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  f.r2 = (ss_tot > 0) ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}
}  // namespace detail

/// Least-squares fit of log(err) against log(k); the slope is the empirical
/// convergence order.
inline RateFit fit_rate(const std::vector<double>& ks, const std::vector<double>& errs) {
  if (ks.size() != errs.size() || ks.size() < 4)
    throw std::invalid_argument("fit_rate: need at least 4 samples");
  std::vector<double> lx(ks.size()), ly(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!(errs[i] > 0.0)) throw std::invalid_argument("fit_rate: nonpositive series entry");
    lx[i] = std::log(ks[i]);
    ly[i] = std::log(errs[i]);
  }
  return detail::linear_fit(lx, ly);
}

/// Least-squares fit of log(err) against k (exp(-c k) decay: slope = -c).
inline RateFit fit_exp(const std::vector<double>& ks, const std::vector<double>& errs) {
  if (ks.size() != errs.size() || ks.size() < 4)
    throw std::invalid_argument("fit_exp: need at least 4 samples");
  std::vector<double> ly(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!(errs[i] > 0.0)) throw std::invalid_argument("fit_exp: nonpositive series entry");
    ly[i] = std::log(errs[i]);
  }
  return detail::linear_fit(ks, ly);
}

/// Monitored local Morse ratio: max over X(q) grid nodes of
/// k^{-n} B(x) pi^n / |det|; the acceptance band (1 + 5/k) holds exactly on
/// the constant-curvature geometries and is recorded on PERTURBED.
inline double morse_ratio_max(const HarmonicSpace& s, const QuadratureGrid& grid,
                              const Eigen::VectorXd& B) {
  const double kn = std::pow(static_cast<double>(s.k), s.geom.n());
  const double pin = std::pow(kPi, s.geom.n());
  double r = 0.0;
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
    const CurvatureData c = s.geom.curvature_at(grid.nodes[i].p);
    if (c.degenerate() || c.q_index != s.q) continue;
    r = std::max(r, B[static_cast<Eigen::Index>(i)] * pin / (kn * c.det_abs));
  }
  return r;
}

struct ConcentrationResult {
  int subspace_dim = 0;
  double min_mass = 1.0;  // min ||alpha||_Omega^2 over sampled unit combinations
};

/// Span of eigenvectors of T_{1_Omega} with eigenvalue >= 1 - eps; the mass
/// of random unit combinations on Omega is bounded below by the smallest
/// eigenvalue in the span (spectral theorem, up to quadrature error).
inline ConcentrationResult concentration_subspace(const ToeplitzMatrix& T, double eps,
                                                  int samples, std::uint64_t seed) {
  const EigenSystem es = jacobi_hermitian(T.m);
  const int d = static_cast<int>(es.values.size());
  std::vector<int> idx;
  for (int i = 0; i < d; ++i)
    if (es.values[i] >= 1.0 - eps) idx.push_back(i);
  ConcentrationResult out;
  out.subspace_dim = static_cast<int>(idx.size());
  if (idx.empty()) return out;
  SplitMix64 rng(seed);
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXcd c(idx.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = rng.complex_box();
    c /= c.norm();
    Eigen::VectorXcd alpha = Eigen::VectorXcd::Zero(d);
    for (std::size_t i = 0; i < idx.size(); ++i) alpha += c[static_cast<Eigen::Index>(i)] * es.vectors.col(idx[i]);
    const double mass = (alpha.adjoint() * T.m * alpha).value().real();
    out.min_mass = std::min(out.min_mass, mass);
  }
  return out;
}

}  // namespace bergman
