// SPDX-License-Identifier: Apache-2.0
#pragma once

// Finite-element forward model on the unit disk under trigonometric current
// patterns: Neumann-to-Dirichlet matrix, measurement noise and the
// Dirichlet-to-Neumann matrix used by the scattering transform.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "eit/common.hpp"
#include "eit/phantom.hpp"

namespace eit::forward {

struct Mesh {
  std::vector<cplx> vertices;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<int> boundary;                  // vertex ids, ordered by angle starting at 0

  std::size_t boundary_count() const { return boundary.size(); }

  double boundary_angle(std::size_t j) const {
    return 2.0 * pi * static_cast<double>(j) / static_cast<double>(boundary.size());
  }

  double triangle_area(std::size_t t) const {
    const auto& tri = triangles[t];
    const cplx a = vertices[tri[1]] - vertices[tri[0]];
    const cplx b = vertices[tri[2]] - vertices[tri[0]];
    return 0.5 * (a.real() * b.imag() - a.imag() * b.real());
  }

  friend bool operator==(const Mesh&, const Mesh&) = default;
};

namespace detail {

// Triangulates the annular strip between two rings of vertices. Both rings
// are listed by increasing angle starting near angle 0.
inline void stitch_rings(const std::vector<int>& outer, double outer_offset, const std::vector<int>& inner,
                         double inner_offset, std::vector<std::array<int, 3>>& tris) {
  const auto na = outer.size(), nb = inner.size();
  auto angle = [](std::size_t k, std::size_t n, double offset) {
    return offset + 2.0 * pi * static_cast<double>(k) / static_cast<double>(n);
  };
  std::size_t ia = 0, ib = 0;
  while (ia < na || ib < nb) {
    const bool advance_outer =
        ib == nb || (ia < na && angle(ia + 1, na, outer_offset) <= angle(ib + 1, nb, inner_offset));
    if (advance_outer) {
      tris.push_back({outer[ia % na], outer[(ia + 1) % na], inner[ib % nb]});
      ++ia;
    } else {
      tris.push_back({outer[ia % na], inner[(ib + 1) % nb], inner[ib % nb]});
      ++ib;
    }
  }
}

}  // namespace detail

// Concentric-ring mesh. The boundary ring has 64 * 2^level equispaced
// vertices; the element size grows linearly toward the center up to four
// times the boundary spacing.
inline Mesh build_disk_mesh(int level = 3) {
  if (level < 0 || level > 8) throw InvalidArgument("build_disk_mesh: level must lie in [0, 8]");
  const std::size_t nb = std::size_t{64} << level;
  const double hb = 2.0 * pi / static_cast<double>(nb);
  auto local_size = [&](double r) { return hb * (1.0 + 3.0 * (1.0 - r)); };

  Mesh mesh;
  std::vector<int> prev;
  double prev_offset = 0.0;
  double r = 1.0;
  std::size_t ring = 0;
  std::size_t count = nb;
  while (true) {
    std::vector<int> ids(count);
    const double offset = (ring % 2 == 0) ? 0.0 : pi / static_cast<double>(count);
    for (std::size_t j = 0; j < count; ++j) {
      ids[j] = static_cast<int>(mesh.vertices.size());
      const double t = offset + 2.0 * pi * static_cast<double>(j) / static_cast<double>(count);
      mesh.vertices.push_back(r == 1.0 ? cplx(std::cos(t), std::sin(t)) : std::polar(r, t));
    }
    if (ring == 0) mesh.boundary = ids;
    else detail::stitch_rings(prev, prev_offset, ids, offset, mesh.triangles);
    prev = std::move(ids);
    prev_offset = offset;
    ++ring;

    const double step = local_size(r) * std::sqrt(3.0) / 2.0;
    const double next = r - step;
    if (next < 0.75 * local_size(next)) break;
    r = next;
    count = std::max<std::size_t>(6, static_cast<std::size_t>(std::lround(2.0 * pi * r / local_size(r))));
  }
  const int center = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, 0.0);
  for (std::size_t j = 0; j < prev.size(); ++j)
    mesh.triangles.push_back({prev[j], prev[(j + 1) % prev.size()], center});

  for (auto& tri : mesh.triangles) {
    const cplx a = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
    const cplx b = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
    if (a.real() * b.imag() - a.imag() * b.real() < 0.0) std::swap(tri[1], tri[2]);
  }
  return mesh;
}

// ---------------------------------------------------------------------------
// Trigonometric basis, pattern order -N..-1, 1..N.

inline double trig_pattern(int n, double theta) {
  if (n == 0) return 1.0 / std::sqrt(2.0 * pi);
  return (n < 0 ? std::sin(n * theta) : std::cos(n * theta)) / std::sqrt(pi);
}

inline int pattern_of_column(int column, int N) { return column < N ? column - N : column - N + 1; }

struct NtDMatrix {
  Eigen::MatrixXd values;  // 2N x 2N, order -N..-1, 1..N
  int N = 0;
};

struct DtNMatrix {
  Eigen::MatrixXd values;  // (2N+1) x (2N+1), order -N..N, zero middle row/column
  int N = 0;
};

using BoundaryTrace = Eigen::VectorXd;  // values at mesh.boundary vertices

using ConductivityFn = std::function<double(cplx)>;

// Stiffness factorization for one conductivity, reused across patterns.
class NeumannSolver {
 public:
  NeumannSolver(const Mesh& mesh, const phantom::Phantom& ph)
      : NeumannSolver(mesh, ConductivityFn([&ph](cplx z) { return ph.conductivity(z); })) {}

  // sigma sampled at triangle centroids.
  NeumannSolver(const Mesh& mesh, const ConductivityFn& conductivity) : mesh_(&mesh) {
    const auto nv = static_cast<Eigen::Index>(mesh.vertices.size());
    const double weight = 2.0 * pi / static_cast<double>(mesh.boundary_count());
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(mesh.triangles.size() * 9 + 2 * mesh.boundary_count());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const auto& tri = mesh.triangles[t];
      const cplx p0 = mesh.vertices[tri[0]], p1 = mesh.vertices[tri[1]], p2 = mesh.vertices[tri[2]];
      const double area = mesh.triangle_area(t);
      const double sigma = conductivity((p0 + p1 + p2) / 3.0);
      if (!(sigma > 0.0)) throw InvalidArgument("forward: conductivity must be positive");
      const std::array<double, 3> b{p1.imag() - p2.imag(), p2.imag() - p0.imag(), p0.imag() - p1.imag()};
      const std::array<double, 3> c{p2.real() - p1.real(), p0.real() - p2.real(), p1.real() - p0.real()};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          entries.emplace_back(tri[i], tri[j], sigma * (b[i] * b[j] + c[i] * c[j]) / (4.0 * area));
    }
    // mean-zero constraint on the boundary trace through one multiplier
    for (int v : mesh.boundary) {
      entries.emplace_back(v, nv, weight);
      entries.emplace_back(nv, v, weight);
    }
    Eigen::SparseMatrix<double> system(nv + 1, nv + 1);
    system.setFromTriplets(entries.begin(), entries.end());
    system.makeCompressed();
    lu_.analyzePattern(system);
    lu_.factorize(system);
    if (lu_.info() != Eigen::Success) throw SingularSystem("forward: stiffness factorization failed", INFINITY);
  }

  // Boundary trace for the Neumann datum phi_n.
  BoundaryTrace solve(int n) const {
    if (n == 0) throw InvalidArgument("solve_neumann: pattern index must be nonzero");
    const auto& mesh = *mesh_;
    const auto nv = static_cast<Eigen::Index>(mesh.vertices.size());
    const double weight = 2.0 * pi / static_cast<double>(mesh.boundary_count());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nv + 1);
    for (std::size_t j = 0; j < mesh.boundary_count(); ++j)
      rhs[mesh.boundary[j]] = weight * trig_pattern(n, mesh.boundary_angle(j));
    const Eigen::VectorXd u = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success || !u.allFinite())
      throw SingularSystem("solve_neumann: singular system", INFINITY);
    BoundaryTrace trace(static_cast<Eigen::Index>(mesh.boundary_count()));
    for (std::size_t j = 0; j < mesh.boundary_count(); ++j) trace[static_cast<Eigen::Index>(j)] = u[mesh.boundary[j]];
    return trace;
  }

 private:
  const Mesh* mesh_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

inline BoundaryTrace solve_neumann(const Mesh& mesh, const phantom::Phantom& ph, int n) {
  if (n == 0) throw InvalidArgument("solve_neumann: pattern index must be nonzero");
  return NeumannSolver(mesh, ph).solve(n);
}

inline NtDMatrix compute_ntd(const Mesh& mesh, const ConductivityFn& sigma, int N = 16) {
  if (N < 1) throw InvalidArgument("compute_ntd: need at least one pattern");
  const NeumannSolver solver(mesh, sigma);
  const auto nb = mesh.boundary_count();
  const double weight = 2.0 * pi / static_cast<double>(nb);
  NtDMatrix R{Eigen::MatrixXd::Zero(2 * N, 2 * N), N};
  std::vector<BoundaryTrace> traces(static_cast<std::size_t>(2 * N));
  parallel_for(traces.size(), [&](std::size_t col) { traces[col] = solver.solve(pattern_of_column(static_cast<int>(col), N)); });
  for (int col = 0; col < 2 * N; ++col) {
    const BoundaryTrace& trace = traces[static_cast<std::size_t>(col)];
    for (int row = 0; row < 2 * N; ++row) {
      const int m = pattern_of_column(row, N);
      double acc = 0.0;
      for (std::size_t j = 0; j < nb; ++j) acc += trace[static_cast<Eigen::Index>(j)] * trig_pattern(m, mesh.boundary_angle(j));
      R.values(row, col) = weight * acc;
    }
  }
  return R;
}

inline NtDMatrix compute_ntd(const Mesh& mesh, const phantom::Phantom& ph, int N = 16) {
  return compute_ntd(mesh, ConductivityFn([&ph](cplx z) { return ph.conductivity(z); }), N);
}

// Sup norm over the circle of the band-limited trace sum_m R(m, col) phi_m.
inline double column_trace_sup(const NtDMatrix& R, int col, int samples = 512) {
  double sup = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double theta = 2.0 * pi * s / samples;
    double v = 0.0;
    for (int row = 0; row < 2 * R.N; ++row) v += R.values(row, col) * trig_pattern(pattern_of_column(row, R.N), theta);
    sup = std::max(sup, std::abs(v));
  }
  return sup;
}

// Relative Gaussian noise per current pattern: column n gains
// delta * ||R phi_n||_inf * (standard normal vector).
inline NtDMatrix perturb_ntd(const NtDMatrix& R, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0)) throw InvalidArgument("perturb_ntd: noise level must be non-negative");
  if (delta == 0.0) return R;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  NtDMatrix out = R;
  for (int col = 0; col < 2 * R.N; ++col) {
    const double scale = delta * column_trace_sup(R, col);
    for (int row = 0; row < 2 * R.N; ++row) out.values(row, col) += scale * gauss(rng);
  }
  return out;
}

inline DtNMatrix ntd_to_dtn(const NtDMatrix& R) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(R.values, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cond = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : INFINITY;
  if (!(cond < 1e12))
    throw SingularSystem("ntd_to_dtn: NtD matrix numerically singular (condition " + std::to_string(cond) + ")", cond);
  const Eigen::MatrixXd inv = R.values.partialPivLu().inverse();
  const int N = R.N;
  DtNMatrix L{Eigen::MatrixXd::Zero(2 * N + 1, 2 * N + 1), N};
  for (int i = 0; i < 2 * N; ++i)
    for (int j = 0; j < 2 * N; ++j) L.values(pattern_of_column(i, N) + N, pattern_of_column(j, N) + N) = inv(i, j);
  return L;
}

// Lambda_1 on the unit disk: phi_n -> |n| phi_n.
inline DtNMatrix homogeneous_dtn(int N) {
  if (N < 1) throw InvalidArgument("homogeneous_dtn: need at least one pattern");
  DtNMatrix L{Eigen::MatrixXd::Zero(2 * N + 1, 2 * N + 1), N};
  for (int n = -N; n <= N; ++n) L.values(n + N, n + N) = std::abs(n);
  return L;
}

}  // namespace eit::forward
