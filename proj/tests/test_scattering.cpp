// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "eit/scattering.hpp"

using namespace eit;
using namespace eit::scattering;

namespace {

struct Fem {
  forward::Mesh mesh = forward::build_disk_mesh(3);
  forward::DtNMatrix L1 = forward::ntd_to_dtn(forward::compute_ntd(mesh, phantom::Phantom{}));

  forward::DtNMatrix dtn(const phantom::Phantom& ph) const { return forward::ntd_to_dtn(forward::compute_ntd(mesh, ph)); }
};

const Fem& fem() {
  static const Fem f;
  return f;
}

phantom::Phantom disk_phantom() {
  phantom::Phantom ph;
  ph.inclusions.push_back(phantom::Inclusion::circle({0.0, 0.0}, 0.5, 2.0));
  return ph;
}

phantom::Phantom two_inclusions() {
  phantom::Phantom ph;
  ph.inclusions.push_back(phantom::Inclusion::circle({0.3, 0.2}, 0.2, 2.0));
  ph.inclusions.push_back(phantom::Inclusion::ellipse({-0.35, -0.25}, 0.25, 0.12, 0.4, 0.5));
  return ph;
}

const forward::DtNMatrix& two_inclusions_dtn() {
  static const forward::DtNMatrix L = fem().dtn(two_inclusions());
  return L;
}

double max_abs(const std::vector<cplx>& v) {
  double m = 0.0;
  for (cplx x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(ExpInt, RealAxisValues) {
  EXPECT_NEAR(expint_e1(1.0).real(), 0.21938393439552027, 1e-15);
  EXPECT_NEAR(expint_e1(10.0).real(), 4.156968929685324e-06, 1e-19);
  EXPECT_NEAR(expint_e1(1.0).imag(), 0.0, 1e-15);
  EXPECT_THROW(expint_e1(0.0), InvalidArgument);
}

TEST(ExpInt, BranchesAgreeAcrossSwitch) {
  for (double ang = -3.0; ang <= 3.0; ang += 0.25) {
    const cplx z = std::polar(5.0, ang);
    const cplx series = -std::numbers::egamma - std::log(z) + scattering::detail::e1_series_tail(z);
    if (std::abs(ang) < 2.6)  // continued fraction converges away from the negative axis
      EXPECT_LT(std::abs(series - scattering::detail::e1_continued_fraction(z)), 1e-12 * std::abs(series)) << ang;
  }
}

TEST(Faddeev, MatchesQuadratureFixture) {
  std::ifstream in(std::string(EIT_FIXTURE_DIR) + "/g1_oracle.txt");
  ASSERT_TRUE(in.good());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double wr, wi, gr, gi;
    ss >> wr >> wi >> gr >> gi;
    const cplx g = faddeev_g1({wr, wi});
    EXPECT_LT(std::abs(g - cplx(gr, gi)), 1e-9) << "w = " << wr << " " << wi;
    ++rows;
  }
  EXPECT_EQ(rows, 50);
}

TEST(Faddeev, UnitArgument) {
  EXPECT_LT(std::abs(faddeev_g1(1.0) - cplx(-0.029013964834689954, 0.045186572956411827)), 1e-4);
}

TEST(Faddeev, ScalingInK) {
  // g_k(z) = g_1(kz); quadrature value of the k = 2 integral at z = 0.3 + 0.1i
  const cplx k = 2.0, z(0.3, 0.1);
  EXPECT_LT(std::abs(faddeev_g1(k * z) - cplx(0.023916619284430599, -0.016362239583573719)), 1e-6);
}

TEST(Faddeev, RemainderBoundedNearZero) {
  const double h0 = faddeev_remainder(0.0);
  EXPECT_NEAR(h0, -std::numbers::egamma / (2.0 * pi), 1e-15);
  for (double r : {1e-3, 1e-4, 1e-5})
    for (int ray = 0; ray < 8; ++ray) {
      const cplx w = std::polar(r, ray * pi / 4.0 + 0.1);
      const double h = faddeev_G1(w) + std::log(r) / (2.0 * pi);
      EXPECT_NEAR(h, h0, 1e-3);
      EXPECT_NEAR(h, faddeev_remainder(w), 1e-12);
    }
}

TEST(Faddeev, RejectsSingularPoint) {
  EXPECT_THROW(faddeev_g1(cplx(1e-10, 0.0)), InvalidArgument);
  EXPECT_THROW(faddeev_G1(0.0), InvalidArgument);
}

// ---------------------------------------------------------------------------

TEST(KPoints, SmallDisk) {
  const KPointSet s = kpoints({0.0, 0.2}, 0.2);
  ASSERT_EQ(s.points.size(), 4u);
  for (cplx k : s.points) EXPECT_NEAR(std::abs(k), 0.2, 1e-15);
}

TEST(KPoints, DiskCountMatchesBruteForce) {
  int brute = 0;
  for (int i = -30; i <= 30; ++i)
    for (int j = -30; j <= 30; ++j)
      if ((i || j) && i * i + j * j <= 400) ++brute;
  EXPECT_EQ(brute, 1256);
  EXPECT_EQ(kpoints({0.0, 4.0}, 0.2).points.size(), 1256u);
}

TEST(KPoints, AnnulusPredicate) {
  const KPointSet s = kpoints({4.0, 6.0}, 0.2);
  EXPECT_FALSE(s.points.empty());
  for (cplx k : s.points) {
    EXPECT_GT(std::abs(k), 4.0 + 1e-9);
    EXPECT_LE(std::abs(k), 6.0 + 1e-9);
  }
  EXPECT_EQ(s.points.size() + kpoints({0.0, 4.0}, 0.2).points.size(), kpoints({0.0, 6.0}, 0.2).points.size());
}

TEST(KPoints, Errors) {
  EXPECT_THROW(kpoints({0.0, 0.1}, 0.2), InvalidArgument);
  EXPECT_THROW(kpoints({0.0, 1.0}, 0.0), InvalidArgument);
  EXPECT_THROW(kpoints({2.0, 1.0}, 0.2), InvalidArgument);
}

// ---------------------------------------------------------------------------

TEST(CgoTrace, NoPerturbationGivesExponential) {
  const auto L1 = forward::homogeneous_dtn(16);
  for (cplx k : {cplx(0.5, 0.0), cplx(-2.0, 3.0), cplx(0.0, 6.0)}) {
    const CGOTrace tr = solve_cgo_trace(L1, L1, k);
    ASSERT_EQ(tr.values.size(), 128u);
    for (std::size_t j = 0; j < 128; ++j) {
      const cplx z = std::polar(1.0, 2.0 * pi * j / 128.0);
      EXPECT_EQ(tr.values[j], std::exp(cplx(0.0, 1.0) * k * z));
    }
    EXPECT_EQ(t_exp(L1, L1, k, tr), cplx(0.0));
  }
}

TEST(CgoTrace, BornModeIsExponential) {
  const CGOTrace tr = solve_cgo_trace(two_inclusions_dtn(), fem().L1, {1.0, 1.0}, 128, CgoMode::born);
  for (std::size_t j = 0; j < 128; ++j)
    EXPECT_EQ(tr.values[j], std::exp(cplx(0.0, 1.0) * cplx(1.0, 1.0) * std::polar(1.0, 2.0 * pi * j / 128.0)));
}

TEST(CgoTrace, Preconditions) {
  const auto L1 = forward::homogeneous_dtn(16);
  EXPECT_THROW(solve_cgo_trace(L1, L1, 1.0, 64), InvalidArgument);
  EXPECT_THROW(solve_cgo_trace(L1, L1, 1.0, 96), InvalidArgument);
  EXPECT_THROW(solve_cgo_trace(L1, L1, 0.0), InvalidArgument);
  EXPECT_THROW(solve_cgo_trace(L1, forward::homogeneous_dtn(8), 1.0), InvalidArgument);
  const CGOTrace tr = solve_cgo_trace(L1, L1, 1.0);
  EXPECT_THROW(t_exp(L1, L1, 2.0, tr), InvalidArgument);
}

TEST(CgoTrace, SelfConvergence) {
  phantom::Phantom ph;
  ph.inclusions.push_back(phantom::Inclusion::circle({0.2, 0.1}, 0.2, 1.5));
  const auto L = fem().dtn(ph);
  for (cplx k : {cplx(0.5, 0.0), std::polar(0.5, 2.0)}) {
    const CGOTrace coarse = solve_cgo_trace(L, fem().L1, k, 128);
    const CGOTrace fine = solve_cgo_trace(L, fem().L1, k, 512);
    double err = 0.0;
    for (std::size_t j = 0; j < 128; ++j) err = std::max(err, std::abs(coarse.values[j] - fine.values[4 * j]));
    EXPECT_LT(err, 1e-4 * max_abs(fine.values));
    // the perturbation is visible, so the check is not vacuous
    EXPECT_GT(std::abs(coarse.values[0] - std::exp(cplx(0.0, 1.0) * k)), 1e-4);
  }
}

TEST(CgoTrace, SolvesDiscreteEquation) {
  const auto& L = two_inclusions_dtn();
  const CgoSolver solver(L, fem().L1);
  const cplx k(1.2, -0.7);
  const CGOTrace tr = solver.trace(k);
  // single layer applied through an independent 4x finer trapezoid rule
  const auto& b = solver.basis();
  const Eigen::Map<const Eigen::VectorXcd> psi(tr.values.data(), 128);
  const Eigen::VectorXcd coeff = ((L.values - fem().L1.values) * b.projection()).cast<cplx>() * psi;
  const std::size_t fine = 2048;
  for (std::size_t i = 0; i < 128; i += 9) {
    const cplx zi = b.point(i);
    cplx acc = 0.0;
    for (std::size_t j = 0; j < fine; ++j) {
      const double th = 2.0 * pi * (j + 0.5) / fine;
      cplx f = 0.0;
      for (int n = -16; n <= 16; ++n) f += coeff[n + 16] * forward::trig_pattern(n, th);
      const cplx w = zi - std::polar(1.0, th);
      acc += (faddeev_G1(k * w)) * f * (2.0 * pi / fine);
    }
    EXPECT_LT(std::abs(tr.values[i] + acc - std::exp(cplx(0.0, 1.0) * k * zi)), 2e-3) << i;
  }
}

// ---------------------------------------------------------------------------

TEST(TExp, RadialPhantomDependsOnModulusOnly) {
  const auto L = fem().dtn(disk_phantom());
  const CgoSolver solver(L, fem().L1);
  for (double r : {1.0, 2.0}) {
    std::vector<double> mags;
    for (int j = 0; j < 16; ++j) {
      const cplx k = std::polar(r, 2.0 * pi * j / 16.0 + 0.05);
      mags.push_back(std::abs(t_exp(L, fem().L1, k, solver.trace(k))));
    }
    const double hi = *std::max_element(mags.begin(), mags.end());
    const double lo = *std::min_element(mags.begin(), mags.end());
    EXPECT_LT((hi - lo) / hi, 0.02) << "|k| = " << r;
  }
}

TEST(TExp, ConjugateSymmetry) {
  const auto& L = two_inclusions_dtn();
  const CgoSolver solver(L, fem().L1);
  for (cplx k : {cplx(0.4, 0.2), cplx(1.0, -0.6), cplx(-1.2, 1.4), cplx(0.0, 2.0)}) {
    const cplx a = t_exp(L, fem().L1, k, solver.trace(k));
    const cplx b = t_exp(L, fem().L1, -k, solver.trace(-k));
    EXPECT_LT(std::abs(b - std::conj(a)), 0.01 * std::abs(a)) << k;
  }
}

TEST(TExp, NoiseGrowsAtLargeK) {
  const auto& L = two_inclusions_dtn();
  const phantom::Phantom ph = two_inclusions();
  const auto noisy = forward::ntd_to_dtn(forward::perturb_ntd(forward::compute_ntd(fem().mesh, ph), 0.0075, 11));
  double clean = 0.0, dirty = 0.0;
  const CgoSolver s_clean(L, fem().L1), s_dirty(noisy, fem().L1);
  for (int j = 0; j < 16; ++j) {
    const cplx k = std::polar(5.0, 2.0 * pi * j / 16.0);
    clean += std::abs(t_exp(L, fem().L1, k, s_clean.trace(k)));
    dirty += std::abs(t_exp(noisy, fem().L1, k, s_dirty.trace(k)));
  }
  EXPECT_GE(dirty, 2.0 * clean);
}

TEST(TExp, BatchMatchesSingle) {
  const auto& L = two_inclusions_dtn();
  const KPointSet ks = kpoints({0.0, 0.6}, 0.2);
  const ScatteringValues v = scattering_exp(L, fem().L1, ks);
  for (std::size_t i = 0; i < ks.points.size(); ++i)
    EXPECT_EQ(v.t[i], t_exp(L, fem().L1, ks.points[i], solve_cgo_trace(L, fem().L1, ks.points[i])));
}

// ---------------------------------------------------------------------------

namespace {

phantom::PotentialImage gaussian_potential(double amp, double width) {
  phantom::PotentialImage pot{Grid<double>(269, 269, 0.0), 2.1};
  for (std::size_t r = 0; r < 269; ++r)
    for (std::size_t c = 0; c < 269; ++c)
      pot.q(r, c) = amp * std::exp(-std::norm(pot.point(r, c)) / (2.0 * width * width));
  return pot;
}

}  // namespace

TEST(TAsymptotic, ZeroPotential) {
  const phantom::PotentialImage pot{Grid<double>(269, 269, 0.0), 2.1};
  for (cplx k : {cplx(1.0, 0.0), cplx(3.0, -4.0)}) EXPECT_EQ(t_asymptotic(pot, k), cplx(0.0));
}

TEST(TAsymptotic, ExactConjugateSymmetry) {
  const auto pot = phantom::potential_q(two_inclusions());
  for (cplx k : {cplx(0.2, 0.4), cplx(-3.0, 1.6), cplx(5.2, -2.2)}) {
    const cplx a = t_asymptotic(pot, k), b = t_asymptotic(pot, -k);
    EXPECT_EQ(b.real(), a.real());
    EXPECT_EQ(b.imag(), -a.imag());
  }
}

TEST(TAsymptotic, GaussianBumpMatchesHankelTransform) {
  const double amp = 3.0, w = 0.15;
  const auto pot = gaussian_potential(amp, w);
  for (double kr : {0.0, 0.5, 2.0, 4.0, 6.0}) {
    // 2 pi int q(r) J0(2|k| r) r dr, once by quadrature and once in closed form
    const int n = 20000;
    const double rmax = 12.0 * w, dr = rmax / n;
    double hankel = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = (i + 0.5) * dr;
      hankel += amp * std::exp(-r * r / (2.0 * w * w)) * std::cyl_bessel_j(0.0, 2.0 * kr * r) * r * dr;
    }
    hankel *= 2.0 * pi;
    EXPECT_NEAR(hankel, 2.0 * pi * amp * w * w * std::exp(-2.0 * kr * kr * w * w), 1e-8);
    const cplx t = t_asymptotic(pot, std::polar(kr, 0.7));
    EXPECT_NEAR(t.real(), hankel, 1e-4) << kr;
    EXPECT_NEAR(t.imag(), 0.0, 1e-4) << kr;
  }
}

// ---------------------------------------------------------------------------

namespace {

ScatteringValues random_values(const KPointSet& ks, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  ScatteringValues v{ks, {}};
  for (std::size_t i = 0; i < ks.points.size(); ++i) v.t.emplace_back(g(rng), g(rng));
  return v;
}

}  // namespace

TEST(Field, ZeroInputsGiveZeroField) {
  const auto grid = dbar::build_kgrid(6.0);
  const ScatteringValues a{kpoints({0.0, 4.0}), std::vector<cplx>(1256)};
  const KPointSet ann = kpoints({4.0, 6.5});
  const ScatteringValues b{ann, std::vector<cplx>(ann.points.size())};
  const ScatteringField f = assemble_t_field(a, b, 4.0, 6.0, grid);
  for (cplx v : f.values) EXPECT_EQ(v, cplx(0.0));
}

TEST(Field, NonzeroFraction) {
  const auto grid = dbar::build_kgrid(6.0, 2.1, 7);
  const KPointSet disk = kpoints({0.0, 4.0}), ann = kpoints({4.0, 6.5});
  const ScatteringValues a{disk, std::vector<cplx>(disk.points.size(), 1.0)};
  const ScatteringValues b{ann, std::vector<cplx>(ann.points.size(), 1.0)};
  const ScatteringField f = assemble_t_field(a, b, 4.0, 6.0, grid);
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    const double mag = std::abs(grid.point(i));
    if (f.values[i] != cplx(0.0)) {
      ++nonzero;
      EXPECT_NEAR(std::abs(f.values[i]), 1.0, 1e-12);
      EXPECT_LT(mag, 6.0);
    } else {
      EXPECT_TRUE(mag == 0.0 || mag >= 6.0);
    }
  }
  const double frac = static_cast<double>(nonzero) / static_cast<double>(grid.points());
  EXPECT_NEAR(frac, pi * 36.0 / (4.0 * 12.6 * 12.6), 0.005);
  EXPECT_EQ(f.values[grid.origin_index()], cplx(0.0));
}

TEST(Field, NodalExactness) {
  // spacing 2 * 2.5 * 1.28 / 32 = 0.2 puts every grid point on the lattice
  const auto grid = dbar::build_kgrid(1.28, 2.5, 5);
  const KPointSet disk = kpoints({0.0, 1.28});
  const ScatteringValues v = random_values(disk, 3);
  const ScatteringField f = assemble_t_field(v, {}, 1.28, 1.28, grid);
  std::size_t matched = 0;
  for (std::size_t i = 0; i < disk.points.size(); ++i) {
    const cplx k = disk.points[i];
    if (std::abs(k) >= 1.28) continue;
    const auto col = static_cast<std::size_t>(std::lround((k.real() + grid.half_width()) / 0.2));
    const auto row = static_cast<std::size_t>(std::lround((k.imag() + grid.half_width()) / 0.2));
    EXPECT_LT(std::abs(f.values(row, col) - v.t[i]), 1e-12);
    ++matched;
  }
  EXPECT_GT(matched, 100u);
}

TEST(Field, LinearAndIdempotent) {
  const auto grid = dbar::build_kgrid(6.0);
  const KPointSet disk = kpoints({0.0, 4.0}), ann = kpoints({4.0, 6.5});
  const auto a1 = random_values(disk, 1), a2 = random_values(disk, 2);
  const auto b1 = random_values(ann, 3), b2 = random_values(ann, 4);
  const cplx alpha(0.7, -1.1), beta(-2.0, 0.3);
  ScatteringValues ac = a1, bc = b1;
  for (std::size_t i = 0; i < ac.t.size(); ++i) ac.t[i] = alpha * a1.t[i] + beta * a2.t[i];
  for (std::size_t i = 0; i < bc.t.size(); ++i) bc.t[i] = alpha * b1.t[i] + beta * b2.t[i];
  const auto f1 = assemble_t_field(a1, b1, 4.0, 6.0, grid), f2 = assemble_t_field(a2, b2, 4.0, 6.0, grid);
  const auto fc = assemble_t_field(ac, bc, 4.0, 6.0, grid);
  for (std::size_t i = 0; i < fc.values.size(); ++i)
    EXPECT_LT(std::abs(fc.values[i] - alpha * f1.values[i] - beta * f2.values[i]), 1e-12);
  EXPECT_EQ(assemble_t_field(a1, b1, 4.0, 6.0, grid).values, f1.values);
}

TEST(Field, LowPassVariant) {
  const auto grid = dbar::build_kgrid(4.0);
  const KPointSet disk = kpoints({0.0, 4.4});
  const ScatteringValues v{disk, std::vector<cplx>(disk.points.size(), cplx(0.0, 2.0))};
  const ScatteringField f = assemble_t_field(v, {}, 4.0, 4.0, grid);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    const double mag = std::abs(grid.point(i));
    EXPECT_EQ(f.values[i] != cplx(0.0), mag > 0.0 && mag < 4.0);
  }
}

TEST(Field, Errors) {
  const auto grid = dbar::build_kgrid(6.0);
  const ScatteringValues v{kpoints({0.0, 4.0}), std::vector<cplx>(1256)};
  EXPECT_THROW(assemble_t_field(v, {}, 4.0, 5.0, grid), GridMismatch);
  // no data beyond |k| = 4: the stencils at 5 < |k| < 6 are empty
  EXPECT_THROW(assemble_t_field(v, {}, 4.0, 6.0, grid), Error);
  ScatteringValues off = v;
  off.kset.points[0] += 0.05;
  EXPECT_THROW(assemble_t_field(off, {}, 4.0, 6.0, grid), InvalidArgument);
}
