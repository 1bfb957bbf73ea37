// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal thread-safe wrapper over FFTW's 2-D complex transform. Plans are
// created once (planning is not thread-safe) and then executed through the
// new-array interface from any thread.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <vector>

#include "eit/common.hpp"

namespace eit {

class Fft2 {
 public:
  explicit Fft2(std::size_t n) : n_(n) {
    static std::mutex planner;
    const std::lock_guard lock(planner);
    std::vector<cplx> scratch(n * n);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    const int ni = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_2d(ni, ni, p, p, FFTW_FORWARD, flags);
    backward_ = fftw_plan_dft_2d(ni, ni, p, p, FFTW_BACKWARD, flags);
    if (!forward_ || !backward_) throw Error("fft: planning failed");
  }
  ~Fft2() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  std::size_t size() const { return n_; }

  // In place, unnormalized.
  void forward(cplx* data) const { run(forward_, data); }
  void backward(cplx* data) const { run(backward_, data); }

 private:
  static void run(fftw_plan plan, cplx* data) {
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plan, p, p);
  }

  std::size_t n_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace eit
