// SPDX-License-Identifier: Apache-2.0
#pragma once

// Regularized D-bar equation
//   m(z,k) = 1 + (2 pi)^-2 int t_R(k') e_{-z}(k') conj(m(z,k')) / ((k - k') conj(k')) dk'
// on a periodic k lattice. The kernel splits as [1/(pi(k-k'))] [1/(4 pi conj k')],
// so one application is a periodic convolution with 1/(pi k) evaluated by FFT.

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "eit/common.hpp"
#include "eit/fft.hpp"
#include "eit/kgrid.hpp"
#include "eit/phantom.hpp"
#include "eit/scattering.hpp"

namespace eit::dbar {

using scattering::ScatteringField;
using MGrid = Grid<cplx>;

// 1/(pi k) on wrapped lattice differences, zero at k = 0.
inline cplx wrapped_fundamental(const KGrid& grid, std::ptrdiff_t drow, std::ptrdiff_t dcol) {
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
  auto wrap = [n](std::ptrdiff_t d) {
    d = ((d % n) + n) % n;
    return d >= n / 2 ? d - n : d;
  };
  const cplx k(grid.spacing() * static_cast<double>(wrap(dcol)), grid.spacing() * static_cast<double>(wrap(drow)));
  return k == cplx(0.0) ? cplx(0.0) : 1.0 / (pi * k);
}

// DFT of the sampled fundamental solution, shared by every z.
class SpectralKernel {
 public:
  explicit SpectralKernel(const KGrid& grid) : grid_(grid), fft_(std::make_shared<Fft2>(grid.size())) {
    const std::size_t n = grid.size();
    hat_.resize(n * n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c)
        hat_[r * n + c] = wrapped_fundamental(grid, static_cast<std::ptrdiff_t>(r), static_cast<std::ptrdiff_t>(c));
    fft_->forward(hat_.data());
  }

  const KGrid& grid() const { return grid_; }
  const Fft2& fft() const { return *fft_; }
  const std::vector<cplx>& hat() const { return hat_; }

 private:
  KGrid grid_;
  std::shared_ptr<const Fft2> fft_;
  std::vector<cplx> hat_;
};

inline void check_same_grid(const ScatteringField& field, const KGrid& grid, const char* where) {
  if (!(field.grid == grid) || field.values.width() != grid.size() || field.values.height() != grid.size())
    throw GridMismatch(std::string(where) + ": scattering field and k grid differ");
}

// T_z(k') = t(k') e^{-i(k'z + conj(k'z))} / (4 pi conj k'), zero at the origin.
inline std::vector<cplx> weighted_field(cplx z, const ScatteringField& field) {
  const KGrid& g = field.grid;
  std::vector<cplx> out(g.points(), cplx(0.0));
  for (std::size_t i = 0; i < g.points(); ++i) {
    const cplx t = field.values[i];
    if (t == cplx(0.0)) continue;
    const cplx k = g.point(i);
    const cplx kz = k * z;
    out[i] = t * std::exp(cplx(0.0, -2.0 * kz.real())) / (4.0 * pi * std::conj(k));
  }
  return out;
}

// A(z, t_R) for one fixed z; real-linear in v.
class DbarOperator {
 public:
  DbarOperator(cplx z, const ScatteringField& field, const SpectralKernel& kernel)
      : kernel_(kernel), weights_(weighted_field(z, field)) {
    check_same_grid(field, kernel.grid(), "apply_dbar_operator");
  }

  const std::vector<cplx>& weights() const { return weights_; }

  void apply(const MGrid& v, MGrid& out) const {
    const KGrid& g = kernel_.grid();
    if (v.width() != g.size() || v.height() != g.size()) throw GridMismatch("apply_dbar_operator: v has the wrong shape");
    if (!out.same_shape(v)) out = MGrid(g.size(), g.size());
    for (std::size_t i = 0; i < g.points(); ++i) out[i] = weights_[i] * std::conj(v[i]);
    kernel_.fft().forward(out.data());
    for (std::size_t i = 0; i < g.points(); ++i) out[i] *= kernel_.hat()[i];
    kernel_.fft().backward(out.data());
    const double scale = g.spacing() * g.spacing() / static_cast<double>(g.points());
    for (cplx& x : out) x *= scale;
  }

  MGrid operator()(const MGrid& v) const {
    MGrid out;
    apply(v, out);
    return out;
  }

 private:
  const SpectralKernel& kernel_;
  std::vector<cplx> weights_;
};

inline MGrid apply_dbar_operator(cplx z, const ScatteringField& field, const SpectralKernel& kernel, const MGrid& v) {
  return DbarOperator(z, field, kernel)(v);
}

struct DivergenceError : Error {
  DivergenceError(const std::string& what, int it) : Error(what), iteration(it) {}
  int iteration;
};

// m^{(n+1)} = 1 + A m^{(n)}, m^{(0)} = 1. When residuals is non-null it
// receives ||m^{(n)} - 1 - A m^{(n)}||_2 for n = 1..n_iter.
inline MGrid richardson_solve(cplx z, const ScatteringField& field, const SpectralKernel& kernel, int n_iter = 5,
                              std::vector<double>* residuals = nullptr) {
  if (n_iter < 1) throw InvalidArgument("richardson_solve: need at least one iteration");
  const DbarOperator A(z, field, kernel);
  const std::size_t n = kernel.grid().size();
  MGrid m(n, n, cplx(1.0)), Am;
  for (int it = 1; it <= n_iter; ++it) {
    A.apply(m, Am);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = 1.0 + Am[i];
    for (cplx x : m)
      if (!std::isfinite(x.real()) || !std::isfinite(x.imag()))
        throw DivergenceError("richardson_solve: non-finite iterate at iteration " + std::to_string(it), it);
    if (residuals) {
      A.apply(m, Am);
      double r = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) r += std::norm(m[i] - 1.0 - Am[i]);
      residuals->push_back(std::sqrt(r));
    }
  }
  return m;
}

// Dense real-linear solve of (I - A) m = 1 with 2x2 real blocks. A reads v
// only where T_z is nonzero, so the system is solved on that support S and
// m = 1 + A m_S recovers every other lattice value exactly.
inline MGrid direct_solve_oracle(cplx z, const ScatteringField& field, const SpectralKernel& kernel) {
  const KGrid& g = kernel.grid();
  if (g.l > 6) throw ResourceGuard("direct_solve_oracle: dense solve limited to l <= 6, got l = " + std::to_string(g.l));
  const DbarOperator A(z, field, kernel);
  const auto& T = A.weights();
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < T.size(); ++i)
    if (T[i] != cplx(0.0)) support.push_back(i);

  const std::size_t n = g.size();
  MGrid m(n, n, cplx(1.0));
  if (support.empty()) return m;

  const auto s = static_cast<Eigen::Index>(support.size());
  const double h2 = g.spacing() * g.spacing();
  Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(2 * s, 2 * s);
  for (Eigen::Index a = 0; a < s; ++a) {
    const std::size_t ra = support[a] / n, ca = support[a] % n;
    for (Eigen::Index b = 0; b < s; ++b) {
      const std::size_t rb = support[b] / n, cb = support[b] % n;
      const cplx w = h2 * T[support[b]] *
                     wrapped_fundamental(g, static_cast<std::ptrdiff_t>(ra) - static_cast<std::ptrdiff_t>(rb),
                                         static_cast<std::ptrdiff_t>(ca) - static_cast<std::ptrdiff_t>(cb));
      sys(2 * a, 2 * b) -= w.real();
      sys(2 * a, 2 * b + 1) -= w.imag();
      sys(2 * a + 1, 2 * b) -= w.imag();
      sys(2 * a + 1, 2 * b + 1) += w.real();
    }
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * s);
  for (Eigen::Index a = 0; a < s; ++a) rhs[2 * a] = 1.0;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys);
  if (!(lu.rcond() > 1e-14)) throw SingularSystem("direct_solve_oracle: singular system", 1.0 / lu.rcond());
  const Eigen::VectorXd x = lu.solve(rhs);

  MGrid ms(n, n, cplx(0.0));
  for (Eigen::Index a = 0; a < s; ++a) ms[support[a]] = {x[2 * a], x[2 * a + 1]};
  const MGrid Am = A(ms);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = 1.0 + Am[i];
  return m;
}

enum class Solver { richardson, direct };

inline Solver parse_solver(const std::string& s) {
  if (s == "richardson") return Solver::richardson;
  if (s == "direct") return Solver::direct;
  throw InvalidArgument("unknown solver '" + s + "'");
}

struct Reconstruction {
  phantom::ConductivityImage sigma;
  Grid<double> imaginary;  // |Im m(z,0)^2|, zero outside the disk
};

// sigma_R(z) = Re m(z,0)^2 on a width x width lattice over [-1,1)^2.
inline Reconstruction reconstruct(const ScatteringField& field, const SpectralKernel& kernel, std::size_t width,
                                  int n_iter = 5, Solver solver = Solver::richardson) {
  if (width < 8) throw InvalidArgument("reconstruct: z grid must be at least 8x8");
  check_same_grid(field, kernel.grid(), "reconstruct");
  Reconstruction out{{Grid<double>(width, width, 1.0), 1.0}, Grid<double>(width, width, 0.0)};
  const std::size_t origin = kernel.grid().origin_index();
  parallel_for(width * width, [&](std::size_t i) {
    const cplx z = out.sigma.point(i / width, i % width);
    if (std::abs(z) >= 1.0) return;
    const MGrid m =
        solver == Solver::richardson ? richardson_solve(z, field, kernel, n_iter) : direct_solve_oracle(z, field, kernel);
    const cplx m2 = m[origin] * m[origin];
    out.sigma.values[i] = m2.real();
    out.imaginary[i] = std::abs(m2.imag());
  });
  return out;
}

}  // namespace eit::dbar
