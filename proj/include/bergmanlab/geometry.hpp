#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "bergmanlab/common.hpp"

namespace bergman {

// ---------------------------------------------------------------------------
// Model catalog: CP^1 and CP^1 x CP^1 with the Fubini-Study base metric on
// each factor (area pi per factor) and explicit fiber weights. Each factor
// has two charts, z on U0 and w = 1/z on U1. The weight of L^k is k*phi.
// ---------------------------------------------------------------------------

enum class WeightKind { FS, Perturbed, Neg };

struct CurveFactor {
  WeightKind kind = WeightKind::FS;
  int degree = 1;      // d for FS/Perturbed, m for Neg (phi = -m log(1+t))
  double bump_t = 0.0; // Perturbed only
  int line_degree() const { return kind == WeightKind::Neg ? -degree : degree; }
};

struct Point {
  int nf = 1;
  std::array<int, 2> chart{0, 0};
  std::array<cplx, 2> z{cplx(0, 0), cplx(0, 0)};
};

inline constexpr int kDegenerate = -1;
inline constexpr double kCurvEps = 1e-9;

struct CurvatureData {
  Point point;
  std::vector<double> lambdas;  // ascending, relative to the base metric
  double det_abs = 0.0;
  int q_index = 0;              // kDegenerate when any |lambda| < kCurvEps
  Eigen::MatrixXcd v_frame;     // columns: eigenframe in the chart frame
  bool degenerate() const { return q_index == kDegenerate; }
};

// Smooth bump eta(u) = exp(-1/(1-v^2)), v = (u-1)/0.5, supported on |u-1|<0.5.
inline double bump_eta(double u) {
  const double v = (u - 1.0) / 0.5;
  if (!(std::abs(v) < 1.0)) return 0.0;
  return std::exp(-1.0 / (1.0 - v * v));
}
// First and second u-derivatives of eta, closed form.
inline void bump_eta_derivs(double u, double& eta, double& d1, double& d2) {
  const double v = (u - 1.0) / 0.5;
  if (!(std::abs(v) < 1.0)) {
    eta = d1 = d2 = 0.0;
    return;
  }
  const double s = 1.0 - v * v;
  eta = std::exp(-1.0 / s);
  const double h = -4.0 * v / (s * s);              // eta' = h * eta (d/du)
  const double hp = -8.0 / (s * s) - 32.0 * v * v / (s * s * s);
  d1 = h * eta;
  d2 = (hp + h * h) * eta;
}
// Curvature response of the bump relative to the FS metric:
// lambda_pert(u) = (u eta'' + eta') (1+u)^2, so lambda = d + t * psi(u).
inline double bump_psi(double u) {
  double eta, d1, d2;
  bump_eta_derivs(u, eta, d1, d2);
  return (u * d2 + d1) * (1.0 + u) * (1.0 + u);
}

/// Largest perturbation strength keeping the curvature of PERTURBED_CP1(d,t)
/// nonnegative, found by bisection against a dense radial sample.
inline double perturbed_t_max(int d) {
  static std::map<int, double> cache;
  auto it = cache.find(d);
  if (it != cache.end()) return it->second;
  const int m = 200001;
  std::vector<double> psi(m);
  double psi_min = 0.0;
  for (int i = 0; i < m; ++i) {
    const double u = 0.5 + 1.0 * i / (m - 1);
    psi[i] = bump_psi(u);
    psi_min = std::min(psi_min, psi[i]);
  }
  if (psi_min >= 0.0) return cache[d] = 1e9;
  auto min_lambda = [&](double t) {
    double lo = d;
    for (double p : psi) lo = std::min(lo, d + t * p);
    return lo;
  };
  double lo = 0.0, hi = 2.0 * d / (-psi_min);
  for (int iter = 0; iter < 80; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (min_lambda(mid) >= 0.0 ? lo : hi) = mid;
  }
  return cache[d] = lo;
}

struct ModelGeometry {
  std::string name;
  std::vector<CurveFactor> factors;
  std::vector<double> params;

  int n() const { return static_cast<int>(factors.size()); }

  // Fiber weight of one factor in the chart of the point.  u is |coord|^2.
  double factor_phi(int f, int chart, double u) const {
    const CurveFactor& cf = factors[f];
    switch (cf.kind) {
      case WeightKind::FS:
        return cf.degree * std::log1p(u);
      case WeightKind::Perturbed: {
        const double u0 = (chart == 0) ? u : (u > 0 ? 1.0 / u : 1e300);
        return cf.degree * std::log1p(u) + cf.bump_t * bump_eta(u0);
      }
      case WeightKind::Neg:
        return -cf.degree * std::log1p(u);
    }
    return 0.0;
  }

  double phi(const Point& p) const {
    double s = 0.0;
    for (int f = 0; f < n(); ++f) s += factor_phi(f, p.chart[f], std::norm(p.z[f]));
    return s;
  }

  // Curvature eigenvalue of one factor relative to the FS metric, as a
  // function of the chart-0 radial variable u = |z|^2 (u may be huge at the
  // opposite pole).
  double factor_lambda(int f, double u_chart0) const {
    const CurveFactor& cf = factors[f];
    switch (cf.kind) {
      case WeightKind::FS:
        return cf.degree;
      case WeightKind::Perturbed:
        return cf.degree + cf.bump_t * bump_psi(u_chart0);
      case WeightKind::Neg:
        return -cf.degree;
    }
    return 0.0;
  }

  CurvatureData curvature_at(const Point& p) const {
    CurvatureData c;
    c.point = p;
    std::vector<std::pair<double, int>> lam(n());
    for (int f = 0; f < n(); ++f) {
      const double t = std::norm(p.z[f]);
      const double u0 = (p.chart[f] == 0) ? t : (t > 0 ? 1.0 / t : 1e300);
      lam[f] = {factor_lambda(f, u0), f};
    }
    std::sort(lam.begin(), lam.end());
    c.lambdas.resize(n());
    c.v_frame = Eigen::MatrixXcd::Zero(n(), n());
    c.det_abs = 1.0;
    bool deg = false;
    int negs = 0;
    for (int i = 0; i < n(); ++i) {
      c.lambdas[i] = lam[i].first;
      c.v_frame(lam[i].second, i) = 1.0;
      c.det_abs *= std::abs(lam[i].first);
      if (std::abs(lam[i].first) < kCurvEps) deg = true;
      if (lam[i].first < 0.0) ++negs;
    }
    c.q_index = deg ? kDegenerate : negs;
    return c;
  }

  // Unit-sphere position of a factor coordinate (distances below are angles
  // on the unit sphere, so each factor has diameter pi).
  static std::array<double, 3> to_sphere(int chart, cplx z) {
    const double t = std::norm(z);
    const double d = 1.0 + t;
    if (chart == 0) return {2.0 * z.real() / d, 2.0 * z.imag() / d, (1.0 - t) / d};
    return {2.0 * z.real() / d, -2.0 * z.imag() / d, -(1.0 - t) / d};
  }

  double geodesic_angle(const Point& a, const Point& b) const {
    double s2 = 0.0;
    for (int f = 0; f < n(); ++f) {
      const auto u = to_sphere(a.chart[f], a.z[f]);
      const auto v = to_sphere(b.chart[f], b.z[f]);
      double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
      dot = std::clamp(dot, -1.0, 1.0);
      const double ang = std::acos(dot);
      s2 += ang * ang;
    }
    return std::sqrt(s2);
  }

  // Chart transition for one factor; phi_U(z) - phi_V(1/z) = log|z^deg|^2.
  static cplx transition(cplx z) { return 1.0 / z; }
};

inline ModelGeometry build_geometry(const std::string& name, const std::vector<double>& params) {
  ModelGeometry g;
  g.name = name;
  g.params = params;
  auto need = [&](std::size_t m) {
    if (params.size() != m)
      throw std::invalid_argument("geometry " + name + ": expected " + std::to_string(m) + " parameter(s)");
  };
  auto as_int = [&](double v, const char* what, int lo) {
    const int i = static_cast<int>(std::lround(v));
    if (std::abs(v - i) > 1e-12 || i < lo)
      throw std::invalid_argument("geometry " + name + ": " + what + " must be an integer >= " + std::to_string(lo));
    return i;
  };
  if (name == "FS_CP1") {
    need(1);
    g.factors = {CurveFactor{WeightKind::FS, as_int(params[0], "degree", 0), 0.0}};
  } else if (name == "PERTURBED_CP1") {
    need(2);
    const int d = as_int(params[0], "degree", 1);
    const double t = params[1];
    const double tmax = perturbed_t_max(d);
    if (t < 0.0 || t > tmax * (1.0 + 1e-12))
      throw std::invalid_argument("geometry PERTURBED_CP1: t must lie in [0, t_max], t_max = " + std::to_string(tmax));
    g.factors = {CurveFactor{WeightKind::Perturbed, d, t}};
  } else if (name == "NEG_CP1") {
    need(1);
    g.factors = {CurveFactor{WeightKind::Neg, as_int(params[0], "m", 1), 0.0}};
  } else if (name == "PRODUCT_CP1xCP1") {
    need(2);
    g.factors = {CurveFactor{WeightKind::FS, as_int(params[0], "a", 1), 0.0},
                 CurveFactor{WeightKind::Neg, as_int(params[1], "b", 1), 0.0}};
  } else {
    throw std::invalid_argument("unknown catalog geometry: " + name);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Quadrature grids. Per factor: two polar chart rules glued by a smooth
// partition of unity (ramp in log r between r = 1/2 and r = 2), Gauss-
// Legendre radially after t = r^2, uniform trapezoid in angle. Product grids
// are tensor products.
// ---------------------------------------------------------------------------

// Chart-0 cutoff as a function of t = r^2.  chi0 + chi0(1/t) = 1.
inline double chart_cutoff(double t) {
  if (t <= 0.25) return 1.0;
  if (t >= 4.0) return 0.0;
  const double u = (std::log(t) + std::log(4.0)) / (2.0 * std::log(4.0));
  auto f = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
  return 1.0 - f(u) / (f(u) + f(1.0 - u));
}

/// Gauss-Legendre nodes/weights on [-1,1] by Newton on Legendre polynomials.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double p0 = 0.0, p1 = 0.0;
    for (int it = 0; it < 100; ++it) {
      p0 = 1.0;
      p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * t * p1 - j * p2) / (j + 1.0);
      }
      const double dp = n * (t * p0 - p1) / (t * t - 1.0);
      const double dt = p0 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    p0 = 1.0;
    p1 = 0.0;
    for (int j = 0; j < n; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j + 1.0) * t * p1 - j * p2) / (j + 1.0);
    }
    const double dp = n * (t * p0 - p1) / (t * t - 1.0);
    x[i] = -t;
    x[n - 1 - i] = t;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

struct GridResolution {
  int radial = 0;                    // Gauss-Legendre nodes per radial panel (0 = default)
  int angular = 0;                   // trapezoid nodes per factor (0 = auto from max_k)
  int max_k = 40;                    // sizes the angular rule when angular == 0
  std::vector<double> extra_breaks;  // additional radial panel boundaries in t
};

struct GridNode {
  Point p;
  double w = 0.0;
};

struct QuadratureGrid {
  std::vector<GridNode> nodes;
  GridResolution res;
  double total_weight() const {
    double s = 0.0;
    for (const auto& nd : nodes) s += nd.w;
    return s;
  }
};

namespace detail {

struct FactorRule {
  std::vector<int> chart;
  std::vector<cplx> z;
  std::vector<double> w;
};

inline FactorRule build_factor_rule(const ModelGeometry& g, int f, const GridResolution& res) {
  const int nr = res.radial > 0 ? res.radial : (g.n() == 1 ? 24 : 14);
  int na = res.angular;
  if (na == 0) {
    na = 2 * res.max_k * std::abs(g.factors[f].degree) + (g.n() == 1 ? 16 : 4);
    na = ((na + 3) / 4) * 4;
    na = std::max(na, 16);
  }
  if (nr < 2 || na < 4)
    throw std::invalid_argument("grid resolution below documented minimum (radial >= 2, angular >= 4)");

  std::vector<double> breaks = {0.0, 0.25, 4.0};
  if (g.n() == 1) breaks.insert(breaks.end(), {0.5, 1.0, 1.5});
  if (g.factors[f].kind == WeightKind::Perturbed) breaks.insert(breaks.end(), {0.5, 1.5, 2.0 / 3.0, 2.0});
  for (double b : res.extra_breaks)
    if (b > 0.0 && b < 4.0) breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-14; }),
               breaks.end());

  std::vector<double> gx, gw;
  gauss_legendre(nr, gx, gw);

  FactorRule r;
  for (int chart = 0; chart < 2; ++chart) {
    for (std::size_t pnl = 0; pnl + 1 < breaks.size(); ++pnl) {
      const double a = breaks[pnl], b = breaks[pnl + 1];
      for (int i = 0; i < nr; ++i) {
        const double t = 0.5 * (a + b) + 0.5 * (b - a) * gx[i];
        const double wt = 0.5 * (b - a) * gw[i];
        const double cut = chart_cutoff(t);
        if (cut <= 0.0) continue;
        const double dens = 1.0 / ((1.0 + t) * (1.0 + t));  // FS density
        const double rad = std::sqrt(t);
        for (int j = 0; j < na; ++j) {
          const double th = 2.0 * kPi * j / na;
          r.chart.push_back(chart);
          r.z.push_back(rad * cplx(std::cos(th), std::sin(th)));
          // dx dy = (1/2) dt dtheta in polar t = r^2
          r.w.push_back(cut * dens * 0.5 * wt * (2.0 * kPi / na));
        }
      }
    }
  }
  return r;
}

}  // namespace detail

inline QuadratureGrid build_grid(const ModelGeometry& g, const GridResolution& res = {}) {
  QuadratureGrid grid;
  grid.res = res;
  if (g.n() == 1) {
    auto r = detail::build_factor_rule(g, 0, res);
    grid.nodes.reserve(r.z.size());
    for (std::size_t i = 0; i < r.z.size(); ++i) {
      GridNode nd;
      nd.p.nf = 1;
      nd.p.chart[0] = r.chart[i];
      nd.p.z[0] = r.z[i];
      nd.w = r.w[i];
      grid.nodes.push_back(nd);
    }
  } else {
    auto r0 = detail::build_factor_rule(g, 0, res);
    auto r1 = detail::build_factor_rule(g, 1, res);
    grid.nodes.reserve(r0.z.size() * r1.z.size());
    for (std::size_t i = 0; i < r0.z.size(); ++i) {
      for (std::size_t j = 0; j < r1.z.size(); ++j) {
        GridNode nd;
        nd.p.nf = 2;
        nd.p.chart = {r0.chart[i], r1.chart[j]};
        nd.p.z = {r0.z[i], r1.z[j]};
        nd.w = r0.w[i] * r1.w[j];
        grid.nodes.push_back(nd);
      }
    }
  }
  return grid;
}

struct ClassifyReport {
  std::map<int, std::size_t> counts;     // q_index -> node count (kDegenerate key for degenerate)
  std::map<int, double> masses;          // q_index -> integral of |det| w / pi^n over X(q)
  std::size_t total = 0;
};

inline ClassifyReport classify(const ModelGeometry& g, const QuadratureGrid& grid) {
  ClassifyReport rep;
  const double pin = std::pow(kPi, g.n());
  for (const auto& nd : grid.nodes) {
    const CurvatureData c = g.curvature_at(nd.p);
    rep.counts[c.q_index]++;
    if (!c.degenerate()) rep.masses[c.q_index] += nd.w * c.det_abs / pin;
    rep.total++;
  }
  return rep;
}

/// Total curvature integral (2 pi)^{-1} int i ddbar(phi) of one factor;
/// equals the line-bundle degree for every catalog entry.
inline double degree_integral(const ModelGeometry& g, int f, const QuadratureGrid& grid) {
  // (2pi)^{-1} int i ddbar phi = pi^{-1} int (i/2) ddbar phi = pi^{-1} int lambda_f omega_f.
  // On product grids the f-th factor integral is extracted by dividing by the
  // total weight of the complementary factors (pi per factor).
  double s = 0.0;
  for (const auto& nd : grid.nodes) {
    const double t = std::norm(nd.p.z[f]);
    const double u0 = (nd.p.chart[f] == 0) ? t : (t > 0 ? 1.0 / t : 1e300);
    s += nd.w * g.factor_lambda(f, u0);
  }
  return s / (kPi * std::pow(kPi, g.n() - 1));
}

}  // namespace bergman
