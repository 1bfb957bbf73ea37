// SPDX-License-Identifier: Apache-2.0
// Reference run for the smooth radial bump used by the acceptance suite.
// Prints the relative L2 error of the R = 4 reconstruction, the l = 7 / l = 8
// gap, and rmse over R = 6, 7, 8. The frozen bound in tests/acceptance.cpp
// comes from this output.
//
//   g++ -O2 -std=c++20 -Iinclude -Ivendor $(pkg-config --cflags eigen3) \
//     tools/oracles/smooth_bump_reference.cpp -lfftw3 -lpng -lz -pthread
#include <cstdio>

#include "eit/dataset.hpp"
#include "eit/metrics.hpp"

using namespace eit;

int main() {
  const auto sigma = [](cplx z) { return 1.0 + 0.5 * std::exp(-std::norm(z) / (2.0 * 0.2 * 0.2)); };
  const dataset::Target target{sigma, phantom::potential_from_function(sigma)};
  const auto& pipe = dataset::Pipeline::shared(3);

  auto rel_l2 = [](const Grid<double>& a, const Grid<double>& b) {
    double e = 0.0, n = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      e += (a[i] - b[i]) * (a[i] - b[i]);
      n += b[i] * b[i];
    }
    return std::sqrt(e / n);
  };

  dataset::SampleMeta meta;
  meta.delta = 0.0;
  meta.Rdelta = 4.0;
  meta.radii = {4.0};
  meta.width = meta.height = 64;
  for (int l : {7, 8}) {
    meta.l = l;
    const auto s = pipe.make_sample(target, meta);
    std::printf("l=%d R=4 rel_l2=%.6f rmse=%.6f\n", l, rel_l2(s.lowpass.values, s.truth.values),
                metrics::rmse(s.lowpass.values, s.truth.values));
    if (l == 7) {
      meta.l = 8;
      const auto s8 = pipe.make_sample(target, meta);
      std::printf("l7 vs l8 rel_l2=%.6e\n", rel_l2(s.lowpass.values, s8.lowpass.values));
      break;
    }
  }

  meta.l = 7;
  meta.Rdelta = 6.0;
  meta.radii = {6.0, 7.0, 8.0};
  const auto s = pipe.make_sample(target, meta);
  for (std::size_t j = 0; j < 3; ++j)
    std::printf("R=%g rmse=%.6f\n", meta.radii[j], metrics::rmse(s.enhanced[j].values, s.truth.values));
}
