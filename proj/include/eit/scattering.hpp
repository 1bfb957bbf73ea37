// SPDX-License-Identifier: Apache-2.0
#pragma once

// Non-linear scattering transform on the unit disk.
//
// CGO traces psi(., k) solve the boundary integral equation
//   psi = e^{ikz} - S_k (Lambda_sigma - Lambda_1) psi   on the circle,
// where S_k is the single layer with the Faddeev Green's function
// G_k(z) = G_1(kz), G_1(w) = Re E1(-iw) / (2 pi). The kernel is split into
// the logarithmic part -log|z|/(2 pi), diagonal in the trigonometric basis
// with eigenvalue 1/(2|n|), and a smooth real remainder handled by the
// trapezoid rule.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "eit/common.hpp"
#include "eit/forward.hpp"
#include "eit/kgrid.hpp"
#include "eit/phantom.hpp"

namespace eit::scattering {

// ---------------------------------------------------------------------------
// Exponential integral and the Faddeev kernel.

namespace detail {

// sum_{n>=1} (-1)^{n+1} z^n / (n n!), so that E1(z) = -gamma - log z + tail.
inline cplx e1_series_tail(cplx z) {
  cplx term = z, sum = z;
  for (int n = 2; n < 500; ++n) {
    term *= -z * (static_cast<double>(n - 1) / static_cast<double>(n * n));
    sum += term;
    if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

inline bool e1_use_series(cplx z) {
  const double a = std::abs(z);
  return a <= 5.0 || (z.real() < -2.0 * std::abs(z.imag()) && a < 40.0);
}

// Even contraction of the continued fraction for E1, modified Lentz.
inline cplx e1_continued_fraction(cplx z) {
  constexpr double tiny = 1e-300;
  cplx b = z + 1.0;
  cplx c = 1.0 / tiny;
  cplx d = 1.0 / b;
  cplx h = d;
  for (int i = 1; i < 2000; ++i) {
    const double a = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (a * d + b);
    c = b + a / c;
    const cplx del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-z);
}

}  // namespace detail

// Principal-branch exponential integral E1(z), z != 0.
inline cplx expint_e1(cplx z) {
  if (z == cplx(0.0, 0.0)) throw InvalidArgument("expint_e1: singular at 0");
  if (detail::e1_use_series(z)) return -std::numbers::egamma - std::log(z) + detail::e1_series_tail(z);
  return detail::e1_continued_fraction(z);
}

// G_1(w) = e^{iw} g_1(w), real valued.
inline double faddeev_G1(cplx w) {
  if (std::abs(w) <= 1e-9) throw InvalidArgument("faddeev_G1: |w| must exceed 1e-9");
  return expint_e1(cplx(w.imag(), -w.real())).real() / (2.0 * pi);
}

// g_1(w): (-Lap - 4i dbar) g_1 = delta, with g_k(z) = g_1(kz).
inline cplx faddeev_g1(cplx w) {
  if (std::abs(w) <= 1e-9) throw InvalidArgument("faddeev_g1: |w| must exceed 1e-9 (singular point)");
  return std::exp(cplx(w.imag(), -w.real())) * faddeev_G1(w);
}

// H(w) = G_1(w) + log|w| / (2 pi). Real-analytic; H(0) = -gamma / (2 pi).
inline double faddeev_remainder(cplx w) {
  const cplx z(w.imag(), -w.real());  // -i w
  if (detail::e1_use_series(z))
    return (-std::numbers::egamma + detail::e1_series_tail(z).real()) / (2.0 * pi);
  return (detail::e1_continued_fraction(z).real() + std::log(std::abs(w))) / (2.0 * pi);
}

// ---------------------------------------------------------------------------
// k lattices.

// Disk |k| <= outer when inner == 0, otherwise annulus inner < |k| <= outer.
struct Region {
  double inner = 0.0;
  double outer = 0.0;

  bool is_disk() const { return inner == 0.0; }
  bool contains(cplx k) const {
    constexpr double slack = 1e-12;
    const double a = std::abs(k);
    if (a < 1e-9 || a > outer * (1.0 + slack)) return false;
    return is_disk() || a > inner * (1.0 + slack);
  }
  friend bool operator==(const Region&, const Region&) = default;
};

struct KPointSet {
  std::vector<cplx> points;
  double h = 0.2;
  Region region;
};

inline KPointSet kpoints(Region region, double h = 0.2) {
  if (!(h > 0.0)) throw InvalidArgument("kpoints: spacing must be positive");
  if (!(region.outer > region.inner) || region.inner < 0.0)
    throw InvalidArgument("kpoints: need outer > inner >= 0");
  KPointSet set{{}, h, region};
  const int m = static_cast<int>(std::ceil(region.outer / h)) + 1;
  for (int j = -m; j <= m; ++j)
    for (int i = -m; i <= m; ++i) {
      const cplx k(h * i, h * j);
      if (region.contains(k)) set.points.push_back(k);
    }
  if (set.points.empty()) throw InvalidArgument("kpoints: region contains no lattice points");
  return set;
}

struct ScatteringValues {
  KPointSet kset;
  std::vector<cplx> t;
};

// ---------------------------------------------------------------------------
// CGO boundary integral equation.

enum class CgoMode { full, born };

inline CgoMode parse_mode(const std::string& s) {
  if (s == "full") return CgoMode::full;
  if (s == "born") return CgoMode::born;
  throw InvalidArgument("unknown CGO mode '" + s + "'");
}

// psi(z_j, k) at z_j = exp(2 pi i j / M).
struct CGOTrace {
  cplx k;
  std::vector<cplx> values;
};

struct IllConditionedBIE : Error {
  IllConditionedBIE(const std::string& what, double k_abs) : Error(what), k_modulus(k_abs) {}
  double k_modulus;
};

// Point values <-> trigonometric coefficients in the DtN ordering -N..N.
class BoundaryBasis {
 public:
  BoundaryBasis(std::size_t M, int N) : M_(M), N_(N), synth_(M, 2 * N + 1), proj_(2 * N + 1, M) {
    const double w = 2.0 * pi / static_cast<double>(M);
    for (std::size_t j = 0; j < M; ++j)
      for (int n = -N; n <= N; ++n) {
        const double v = forward::trig_pattern(n, angle(j));
        synth_(static_cast<Eigen::Index>(j), n + N) = v;
        proj_(n + N, static_cast<Eigen::Index>(j)) = w * v;
      }
  }

  std::size_t points() const { return M_; }
  int patterns() const { return N_; }
  double angle(std::size_t j) const { return 2.0 * pi * static_cast<double>(j) / static_cast<double>(M_); }
  cplx point(std::size_t j) const { return {std::cos(angle(j)), std::sin(angle(j))}; }
  double weight() const { return 2.0 * pi / static_cast<double>(M_); }
  const Eigen::MatrixXd& synthesis() const { return synth_; }
  const Eigen::MatrixXd& projection() const { return proj_; }

 private:
  std::size_t M_;
  int N_;
  Eigen::MatrixXd synth_;
  Eigen::MatrixXd proj_;
};

inline void check_boundary_points(std::size_t M, int N) {
  if (M < static_cast<std::size_t>(2 * (2 * N + 1)) || (M & (M - 1)) != 0)
    throw InvalidArgument("CGO solve: M must be a power of two >= 2(2N+1), got " + std::to_string(M));
}

// Reusable solver for one pair of DtN matrices.
class CgoSolver {
 public:
  CgoSolver(const forward::DtNMatrix& L_sigma, const forward::DtNMatrix& L_1, std::size_t M = 128)
      : basis_(M, L_sigma.N) {
    if (L_sigma.N != L_1.N) throw InvalidArgument("CGO solve: DtN matrices of different size");
    check_boundary_points(M, L_sigma.N);
    apply_ = (L_sigma.values - L_1.values) * basis_.projection();  // (2N+1) x M
  }

  const BoundaryBasis& basis() const { return basis_; }

  CGOTrace trace(cplx k, CgoMode mode = CgoMode::full) const {
    if (std::abs(k) < 1e-9) throw InvalidArgument("CGO solve: k must be nonzero");
    const std::size_t M = basis_.points();
    const auto Mi = static_cast<Eigen::Index>(M);
    Eigen::VectorXcd rhs(Mi);
    for (std::size_t j = 0; j < M; ++j) rhs[static_cast<Eigen::Index>(j)] = std::exp(cplx(0.0, 1.0) * k * basis_.point(j));

    CGOTrace out{k, std::vector<cplx>(rhs.data(), rhs.data() + M)};
    if (mode == CgoMode::born || apply_.isZero(0.0)) return out;

    // S_k restricted to band-limited data: B = Syn D + w H Syn.
    const int N = basis_.patterns();
    Eigen::MatrixXd smooth(Mi, Mi);
    const double h0 = faddeev_remainder(0.0) - std::log(std::abs(k)) / (2.0 * pi);
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j < M; ++j)
        smooth(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            i == j ? h0
                   : faddeev_remainder(k * (basis_.point(i) - basis_.point(j))) - std::log(std::abs(k)) / (2.0 * pi);
    Eigen::VectorXd log_part(2 * N + 1);
    for (int n = -N; n <= N; ++n) log_part[n + N] = n == 0 ? 0.0 : 1.0 / (2.0 * std::abs(n));
    const Eigen::MatrixXd B =
        basis_.synthesis() * log_part.asDiagonal() + basis_.weight() * smooth * basis_.synthesis();

    // (I + B C) psi = e  <=>  (I + C B) y = C e,  psi = e - B y.
    const Eigen::MatrixXd small = Eigen::MatrixXd::Identity(2 * N + 1, 2 * N + 1) + apply_ * B;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(small);
    const Eigen::VectorXcd Ce = apply_.cast<cplx>() * rhs;
    const Eigen::VectorXd y_re = lu.solve(Ce.real());
    const Eigen::VectorXd y_im = lu.solve(Ce.imag());
    Eigen::VectorXcd y(2 * N + 1);
    y.real() = y_re;
    y.imag() = y_im;
    const Eigen::VectorXcd psi = rhs - B.cast<cplx>() * y;

    const Eigen::VectorXcd residual = psi + B.cast<cplx>() * (apply_.cast<cplx>() * psi) - rhs;
    if (!psi.allFinite() || residual.norm() > 1e-8 * rhs.norm() || lu.rcond() < 1e-14)
      throw IllConditionedBIE("CGO boundary integral equation ill-conditioned at |k| = " + std::to_string(std::abs(k)),
                              std::abs(k));
    for (std::size_t j = 0; j < M; ++j) out.values[j] = psi[static_cast<Eigen::Index>(j)];
    return out;
  }

 private:
  BoundaryBasis basis_;
  Eigen::MatrixXd apply_;
};

inline CGOTrace solve_cgo_trace(const forward::DtNMatrix& L_sigma, const forward::DtNMatrix& L_1, cplx k,
                                std::size_t M = 128, CgoMode mode = CgoMode::full) {
  return CgoSolver(L_sigma, L_1, M).trace(k, mode);
}

// t(k) = int e^{i conj(k) conj(z)} (Lambda - Lambda_1) psi ds, trapezoid rule.
inline cplx t_exp(const forward::DtNMatrix& L_noisy, const forward::DtNMatrix& L_1, cplx k, const CGOTrace& trace) {
  if (trace.k != k) throw InvalidArgument("t_exp: trace computed for a different k");
  const std::size_t M = trace.values.size();
  check_boundary_points(M, L_noisy.N);
  const BoundaryBasis basis(M, L_noisy.N);
  const Eigen::Map<const Eigen::VectorXcd> psi(trace.values.data(), static_cast<Eigen::Index>(M));
  const Eigen::VectorXcd coeff = ((L_noisy.values - L_1.values) * basis.projection()).cast<cplx>() * psi;
  const Eigen::VectorXcd f = basis.synthesis().cast<cplx>() * coeff;
  cplx acc = 0.0;
  for (std::size_t j = 0; j < M; ++j)
    acc += std::exp(cplx(0.0, 1.0) * std::conj(k) * std::conj(basis.point(j))) * f[static_cast<Eigen::Index>(j)];
  return acc * basis.weight();
}

// t^exp over a lattice, one independent CGO solve per k.
inline ScatteringValues scattering_exp(const forward::DtNMatrix& L_noisy, const forward::DtNMatrix& L_1,
                                       const KPointSet& kset, std::size_t M = 128, CgoMode mode = CgoMode::full) {
  const CgoSolver solver(L_noisy, L_1, M);
  ScatteringValues out{kset, std::vector<cplx>(kset.points.size())};
  parallel_for(kset.points.size(), [&](std::size_t i) {
    const cplx k = kset.points[i];
    out.t[i] = t_exp(L_noisy, L_1, k, solver.trace(k, mode));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Asymptotic transform t~(k) = int q(z) e^{i(kz + conj(kz))} dz as a
// Riemann sum over the potential grid.

class AsymptoticTransform {
 public:
  explicit AsymptoticTransform(const phantom::PotentialImage& pot) : area_(pot.spacing() * pot.spacing()) {
    for (std::size_t r = 0; r < pot.size(); ++r)
      for (std::size_t c = 0; c < pot.size(); ++c)
        if (pot.q(r, c) != 0.0) {
          pos_.push_back(pot.point(r, c));
          q_.push_back(pot.q(r, c));
        }
  }

  cplx operator()(cplx k) const {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < q_.size(); ++i) {
      const double phase = 2.0 * (k.real() * pos_[i].real() - k.imag() * pos_[i].imag());
      re += q_[i] * std::cos(phase);
      im += q_[i] * std::sin(phase);
    }
    return {re * area_, im * area_};
  }

 private:
  double area_;
  std::vector<cplx> pos_;
  std::vector<double> q_;
};

inline cplx t_asymptotic(const phantom::PotentialImage& q, cplx k) { return AsymptoticTransform(q)(k); }

inline ScatteringValues scattering_asymptotic(const phantom::PotentialImage& q, const KPointSet& kset) {
  const AsymptoticTransform transform(q);
  ScatteringValues out{kset, std::vector<cplx>(kset.points.size())};
  parallel_for(kset.points.size(), [&](std::size_t i) { out.t[i] = transform(kset.points[i]); });
  return out;
}

// ---------------------------------------------------------------------------
// Truncated scattering data on the D-bar grid.

struct ScatteringField {
  dbar::KGrid grid;
  Grid<cplx> values;
  double Rdelta = 0.0;
  double R = 0.0;
};

namespace detail {

// Scattering values indexed by integer lattice coordinates.
class LatticeTable {
 public:
  explicit LatticeTable(double h) : h_(h) {}

  void reserve_extent(double radius) {
    const int m = static_cast<int>(std::ceil(radius / h_)) + 2;
    if (m <= half_) return;
    half_ = m;
    const auto side = static_cast<std::size_t>(2 * m + 1);
    values_.assign(side * side, cplx(0.0));
    present_.assign(side * side, 0);
  }

  void insert(cplx k, cplx t, bool overwrite) {
    const double fi = k.real() / h_, fj = k.imag() / h_;
    const long i = std::lround(fi), j = std::lround(fj);
    if (std::abs(fi - static_cast<double>(i)) > 1e-6 || std::abs(fj - static_cast<double>(j)) > 1e-6)
      throw InvalidArgument("assemble_t_field: k point off the lattice");
    const auto idx = index(static_cast<int>(i), static_cast<int>(j));
    if (present_[idx] && !overwrite) return;
    values_[idx] = t;
    present_[idx] = 1;
  }

  // Bilinear interpolation renormalized over the corners that carry data.
  cplx interpolate(cplx k) const {
    const double fx = k.real() / h_, fy = k.imag() / h_;
    const double x0 = std::floor(fx), y0 = std::floor(fy);
    const double tx = fx - x0, ty = fy - y0;
    cplx acc = 0.0;
    double weight = 0.0;
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        const int i = static_cast<int>(x0) + dx, j = static_cast<int>(y0) + dy;
        if (std::abs(i) > half_ || std::abs(j) > half_) continue;
        const auto idx = index(i, j);
        if (!present_[idx]) continue;
        const double w = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty);
        acc += w * values_[idx];
        weight += w;
      }
    if (weight <= 0.0) throw Error("assemble_t_field: interpolation stencil has no scattering data near k = (" +
                                   std::to_string(k.real()) + ", " + std::to_string(k.imag()) + ")");
    return acc / weight;
  }

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j + half_) * static_cast<std::size_t>(2 * half_ + 1) + static_cast<std::size_t>(i + half_);
  }

  double h_;
  int half_ = -1;
  std::vector<cplx> values_;
  std::vector<char> present_;
};

}  // namespace detail

// t_R(k): interpolated t^exp for |k| <= Rdelta, interpolated t~ for
// Rdelta < |k| < R, zero elsewhere and at k = 0. Stencils near the seam may
// mix both data sets. Passing R == Rdelta with an empty tasym gives the
// low-pass field.
inline ScatteringField assemble_t_field(const ScatteringValues& texp, const ScatteringValues& tasym, double Rdelta,
                                        double R, const dbar::KGrid& grid) {
  if (std::abs(grid.R - R) > 1e-12 * R) throw GridMismatch("assemble_t_field: grid radius does not match R");
  if (R < Rdelta) throw InvalidArgument("assemble_t_field: R must be >= Rdelta");
  if (!tasym.t.empty() && std::abs(tasym.kset.h - texp.kset.h) > 1e-12)
    throw InvalidArgument("assemble_t_field: texp and tasym lattices differ");
  if (texp.t.size() != texp.kset.points.size() || tasym.t.size() != tasym.kset.points.size())
    throw InvalidArgument("assemble_t_field: values do not match their k points");

  detail::LatticeTable table(texp.kset.h);
  double extent = 0.0;
  for (cplx k : texp.kset.points) extent = std::max(extent, std::abs(k));
  for (cplx k : tasym.kset.points) extent = std::max(extent, std::abs(k));
  table.reserve_extent(extent);
  for (std::size_t i = 0; i < texp.t.size(); ++i) table.insert(texp.kset.points[i], texp.t[i], true);
  for (std::size_t i = 0; i < tasym.t.size(); ++i)
    if (std::abs(tasym.kset.points[i]) > Rdelta) table.insert(tasym.kset.points[i], tasym.t[i], false);

  ScatteringField field{grid, Grid<cplx>(grid.size(), grid.size(), cplx(0.0)), Rdelta, R};
  for (std::size_t r = 0; r < grid.size(); ++r)
    for (std::size_t c = 0; c < grid.size(); ++c) {
      const cplx k = grid.point(r, c);
      const double a = std::abs(k);
      if (a == 0.0 || a >= R) continue;
      field.values(r, c) = table.interpolate(k);
    }
  return field;
}

}  // namespace eit::scattering
