// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "eit/dbar.hpp"

using namespace eit;
using namespace eit::dbar;

namespace {

MGrid random_grid(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MGrid v(n, n);
  for (auto& x : v) x = {g(rng), g(rng)};
  return v;
}

// Random values wherever 0 < |k| < R, matching a truncated field.
ScatteringField random_field(const KGrid& grid, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g;
  ScatteringField f{grid, Grid<cplx>(grid.size(), grid.size()), grid.R, grid.R};
  for (std::size_t i = 0; i < grid.points(); ++i) {
    const double a = std::abs(grid.point(i));
    if (a > 0.0 && a < grid.R) f.values[i] = scale * cplx(g(rng), g(rng));
  }
  return f;
}

ScatteringField phantom_field(const KGrid& grid) {
  phantom::Phantom ph;
  ph.inclusions.push_back(phantom::Inclusion::circle({0.3, 0.2}, 0.2, 2.0));
  ph.inclusions.push_back(phantom::Inclusion::ellipse({-0.35, -0.25}, 0.25, 0.12, 0.4, 0.5));
  const auto pot = phantom::potential_q(ph);
  const auto values = scattering::scattering_asymptotic(pot, scattering::kpoints({0.0, grid.R + 0.4}));
  return scattering::assemble_t_field(values, {}, grid.R, grid.R, grid);
}

// ||A|| by power iteration on A*A; A*w = T conj(C* w) for A v = C(T conj v).
double operator_norm(cplx z, const ScatteringField& f, const SpectralKernel& K) {
  const DbarOperator A(z, f, K);
  std::mt19937_64 rng(99);
  MGrid v = random_grid(K.grid().size(), rng);
  const double scale = K.grid().spacing() * K.grid().spacing() / static_cast<double>(K.grid().points());
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    double nv = 0.0;
    for (cplx x : v) nv += std::norm(x);
    for (cplx& x : v) x /= std::sqrt(nv);
    MGrid w = A(v);
    K.fft().forward(w.data());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] *= std::conj(K.hat()[i]);
    K.fft().backward(w.data());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = A.weights()[i] * std::conj(w[i] * scale);
    double nw = 0.0;
    for (cplx x : w) nw += std::norm(x);
    lambda = std::sqrt(nw);
    v = w;
  }
  return std::sqrt(lambda);
}

double rel_l2(const MGrid& a, const MGrid& b) {
  double e = 0.0, n = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    e += std::norm(a[i] - b[i]);
    n += std::norm(b[i]);
  }
  return std::sqrt(e / n);
}

}  // namespace

TEST(KGrid, FullResolutionConfiguration) {
  const KGrid g = build_kgrid(4.0, 2.1, 9);
  EXPECT_EQ(g.size(), 512u);
  EXPECT_DOUBLE_EQ(g.half_width(), 8.4);
  EXPECT_DOUBLE_EQ(g.spacing(), 8.4 / 256.0);
  EXPECT_DOUBLE_EQ(g.spacing() * 512.0, 2.0 * 2.1 * 4.0);
}

TEST(KGrid, ContainsOrigin) {
  const KGrid g = build_kgrid(1.0, 2.1, 4);
  EXPECT_EQ(g.point(g.origin_index()), cplx(0.0));
  EXPECT_EQ(g.point(0), cplx(-2.1, -2.1));
}

TEST(KGrid, RejectsBadParameters) {
  EXPECT_THROW(build_kgrid(4.0, 2.1, 3), InvalidArgument);
  EXPECT_THROW(build_kgrid(4.0, 2.1, 13), InvalidArgument);
  EXPECT_THROW(build_kgrid(0.0), InvalidArgument);
  EXPECT_THROW(build_kgrid(4.0, 1.5), InvalidArgument);
}

TEST(Kernel, InverseTransformReproducesFundamentalSolution) {
  const KGrid g = build_kgrid(2.0, 2.1, 5);
  const SpectralKernel K(g);
  std::vector<cplx> back = K.hat();
  K.fft().backward(back.data());
  const std::size_t n = g.size();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const long dr = r < n / 2 ? static_cast<long>(r) : static_cast<long>(r) - static_cast<long>(n);
      const long dc = c < n / 2 ? static_cast<long>(c) : static_cast<long>(c) - static_cast<long>(n);
      const cplx k(g.spacing() * dc, g.spacing() * dr);
      const cplx expect = (dr == 0 && dc == 0) ? cplx(0.0) : 1.0 / (pi * k);
      EXPECT_LT(std::abs(back[r * n + c] / static_cast<double>(n * n) - expect), 1e-13 * (1.0 + std::abs(expect)));
    }
}

TEST(Operator, ZeroFieldGivesZero) {
  const KGrid g = build_kgrid(4.0, 2.1, 5);
  const SpectralKernel K(g);
  const ScatteringField f{g, Grid<cplx>(g.size(), g.size()), 4.0, 4.0};
  std::mt19937_64 rng(1);
  for (cplx x : apply_dbar_operator({0.2, 0.1}, f, K, random_grid(g.size(), rng))) EXPECT_EQ(x, cplx(0.0));
}

TEST(Operator, MatchesDensePeriodicSummation) {
  const KGrid g = build_kgrid(3.0, 2.1, 4);
  const SpectralKernel K(g);
  const std::size_t n = g.size();
  const double h = g.spacing();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const cplx z(u(rng), u(rng));
    const ScatteringField f = random_field(g, rng);
    const MGrid v = random_grid(n, rng);
    const MGrid fast = apply_dbar_operator(z, f, K, v);
    for (std::size_t i = 0; i < n * n; ++i) {
      cplx acc = 0.0;
      for (std::size_t j = 0; j < n * n; ++j) {
        const cplx kp = g.point(j);
        if (kp == cplx(0.0)) continue;
        // periodic distance between lattice indices
        long dr = static_cast<long>(i / n) - static_cast<long>(j / n);
        long dc = static_cast<long>(i % n) - static_cast<long>(j % n);
        dr = ((dr + 3 * static_cast<long>(n) / 2) % static_cast<long>(n)) - static_cast<long>(n) / 2;
        dc = ((dc + 3 * static_cast<long>(n) / 2) % static_cast<long>(n)) - static_cast<long>(n) / 2;
        if (dr == 0 && dc == 0) continue;
        const cplx diff(h * dc, h * dr);
        const cplx ez = std::exp(cplx(0.0, -1.0) * (kp * z + std::conj(kp * z)));
        acc += f.values[j] * ez * std::conj(v[j]) / (4.0 * pi * pi * diff * std::conj(kp));
      }
      acc *= h * h;
      EXPECT_LT(std::abs(fast[i] - acc), 1e-10) << "trial " << trial << " point " << i;
    }
  }
}

TEST(Operator, RealLinearOnly) {
  const KGrid g = build_kgrid(3.0, 2.1, 5);
  const SpectralKernel K(g);
  std::mt19937_64 rng(5);
  const ScatteringField f = random_field(g, rng);
  const MGrid v1 = random_grid(g.size(), rng), v2 = random_grid(g.size(), rng);
  const DbarOperator A({0.1, -0.4}, f, K);
  MGrid sum = v1, scaled = v1, rotated = v1;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    sum[i] += v2[i];
    scaled[i] *= -2.5;
    rotated[i] *= cplx(0.0, 1.0);
  }
  const MGrid a1 = A(v1), a2 = A(v2), as = A(sum), ac = A(scaled), ai = A(rotated);
  double lin = 0.0, cplx_gap = 0.0;
  for (std::size_t i = 0; i < a1.size(); ++i) {
    lin = std::max({lin, std::abs(as[i] - a1[i] - a2[i]), std::abs(ac[i] + 2.5 * a1[i])});
    cplx_gap = std::max(cplx_gap, std::abs(ai[i] - cplx(0.0, 1.0) * a1[i]));
  }
  EXPECT_LT(lin, 1e-12);
  EXPECT_GT(cplx_gap, 1e-3);
}

TEST(Operator, GridMismatchRejected) {
  const KGrid g = build_kgrid(3.0, 2.1, 5);
  const SpectralKernel K(build_kgrid(3.0, 2.1, 6));
  const ScatteringField f{g, Grid<cplx>(g.size(), g.size()), 3.0, 3.0};
  EXPECT_THROW(apply_dbar_operator(0.0, f, K, MGrid(32, 32)), GridMismatch);
}

TEST(Richardson, ZeroFieldIsFixedPoint) {
  const KGrid g = build_kgrid(4.0, 2.1, 5);
  const SpectralKernel K(g);
  const ScatteringField f{g, Grid<cplx>(g.size(), g.size()), 4.0, 4.0};
  for (cplx x : richardson_solve({0.3, 0.3}, f, K, 1)) EXPECT_EQ(x, cplx(1.0));
  EXPECT_THROW(richardson_solve(0.0, f, K, 0), InvalidArgument);
}

TEST(Richardson, DivergenceCarriesIteration) {
  const KGrid g = build_kgrid(4.0, 2.1, 5);
  const SpectralKernel K(g);
  std::mt19937_64 rng(8);
  const ScatteringField f = random_field(g, rng, 1e300);
  try {
    richardson_solve(0.0, f, K, 5);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.iteration, 1);
    EXPECT_LE(e.iteration, 5);
  }
}

TEST(Direct, ZeroFieldAndGuard) {
  const KGrid g = build_kgrid(4.0, 2.1, 5);
  const SpectralKernel K(g);
  const ScatteringField f{g, Grid<cplx>(g.size(), g.size()), 4.0, 4.0};
  for (cplx x : direct_solve_oracle(0.0, f, K)) EXPECT_EQ(x, cplx(1.0));
  const KGrid big = build_kgrid(4.0, 2.1, 7);
  const SpectralKernel Kb(big);
  const ScatteringField fb{big, Grid<cplx>(big.size(), big.size()), 4.0, 4.0};
  EXPECT_THROW(direct_solve_oracle(0.0, fb, Kb), ResourceGuard);
}

TEST(Direct, ResidualContract) {
  const KGrid g = build_kgrid(4.0, 2.1, 5);
  const SpectralKernel K(g);
  const ScatteringField f = phantom_field(g);
  const cplx z(0.2, -0.3);
  const MGrid m = direct_solve_oracle(z, f, K);
  const MGrid Am = apply_dbar_operator(z, f, K, m);
  double r = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) r = std::max(r, std::abs(m[i] - 1.0 - Am[i]));
  EXPECT_LT(r, 1e-10);
}

class RichardsonVsDirect : public ::testing::TestWithParam<int> {};

TEST_P(RichardsonVsDirect, SmallNormAgreement) {
  const KGrid g = build_kgrid(4.0, 2.1, GetParam());
  const SpectralKernel K(g);
  const ScatteringField base = phantom_field(g);
  for (cplx z : {cplx(0.0, 0.0), cplx(0.3, -0.5), cplx(-0.7, 0.1)}) {
    ScatteringField f = base;
    const double scale = 0.45 / operator_norm(z, base, K);
    for (cplx& x : f.values) x *= scale;
    ASSERT_LT(operator_norm(z, f, K), 0.5);
    std::vector<double> res;
    const MGrid mr = richardson_solve(z, f, K, 5, &res);
    const MGrid md = direct_solve_oracle(z, f, K);
    EXPECT_LT(rel_l2(mr, md), 1e-3);
    ASSERT_EQ(res.size(), 5u);
    for (std::size_t i = 1; i < res.size(); ++i) EXPECT_LT(res[i], res[i - 1]);
  }
}

INSTANTIATE_TEST_SUITE_P(Levels, RichardsonVsDirect, ::testing::Values(5, 6));

TEST(Reconstruct, ZeroFieldGivesOne) {
  const KGrid g = build_kgrid(4.0, 2.1, 6);
  const SpectralKernel K(g);
  const ScatteringField f{g, Grid<cplx>(g.size(), g.size()), 4.0, 4.0};
  const Reconstruction rec = reconstruct(f, K, 16);
  for (double s : rec.sigma.values) EXPECT_EQ(s, 1.0);
  for (double s : rec.imaginary) EXPECT_EQ(s, 0.0);
}

TEST(Reconstruct, OutsideDiskIsOneAndSolversAgree) {
  const KGrid g = build_kgrid(4.0, 2.1, 5);
  const SpectralKernel K(g);
  const ScatteringField f = phantom_field(g);
  const Reconstruction a = reconstruct(f, K, 12, 5, Solver::richardson);
  const Reconstruction b = reconstruct(f, K, 12, 5, Solver::direct);
  for (std::size_t i = 0; i < a.sigma.values.size(); ++i) {
    const cplx z = a.sigma.point(i / 12, i % 12);
    if (std::abs(z) >= 1.0) {
      EXPECT_EQ(a.sigma.values[i], 1.0);
    } else {
      EXPECT_NEAR(a.sigma.values[i], b.sigma.values[i], 1e-2);
    }
  }
}

TEST(Reconstruct, DeterministicAcrossThreadCounts) {
  const KGrid g = build_kgrid(4.0, 2.1, 5);
  const SpectralKernel K(g);
  const ScatteringField f = phantom_field(g);
  const unsigned before = thread_count();
  set_thread_count(1);
  const Reconstruction a = reconstruct(f, K, 16);
  set_thread_count(3);
  const Reconstruction b = reconstruct(f, K, 16);
  set_thread_count(before);
  EXPECT_EQ(a.sigma.values, b.sigma.values);
}

TEST(Reconstruct, RadialFieldGivesRadialImage) {
  // t~ of a centered bump is radial, so sigma_R must be too
  phantom::Phantom ph;
  ph.inclusions.push_back(phantom::Inclusion::circle({0.0, 0.0}, 0.45, 1.8));
  const auto pot = phantom::potential_q(ph);
  const KGrid g = build_kgrid(4.0, 2.1, 6);
  const SpectralKernel K(g);
  const auto values = scattering::scattering_asymptotic(pot, scattering::kpoints({0.0, 4.4}));
  const ScatteringField f = scattering::assemble_t_field(values, {}, 4.0, 4.0, g);
  for (double r : {0.2, 0.5, 0.8}) {
    std::vector<double> ring;
    for (int j = 0; j < 12; ++j) {
      const cplx z = std::polar(r, 2.0 * pi * j / 12.0 + 0.1);
      const MGrid m = richardson_solve(z, f, K);
      ring.push_back((m[g.origin_index()] * m[g.origin_index()]).real());
    }
    double mean = 0.0, var = 0.0;
    for (double s : ring) mean += s / ring.size();
    for (double s : ring) var += (s - mean) * (s - mean) / ring.size();
    EXPECT_LT(std::sqrt(var) / mean, 0.03) << "r = " << r;
  }
}
