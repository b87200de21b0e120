#include "dqm/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace dqm::fft {

namespace {

// The FFTW planner is not re-entrant; executing a finished plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct ComplexPlan {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  ~ComplexPlan() {
    std::lock_guard lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }
};

const ComplexPlan& complex_plan(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<ComplexPlan>> cache;
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_unique<ComplexPlan>();
    std::lock_guard lock(planner_mutex());
    auto* buf = fftw_alloc_complex(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    slot->fwd = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, flags);
    slot->bwd = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD, flags);
    fftw_free(buf);
  }
  return *slot;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

double wavenumber(std::size_t j, std::size_t n, double length) {
  const double base = 2.0 * std::numbers::pi / length;
  const auto signed_j = (2 * j < n) ? static_cast<double>(j)
                                    : static_cast<double>(j) - static_cast<double>(n);
  return base * signed_j;
}

void forward(std::span<cplx> data) {
  const auto& plan = complex_plan(data.size());
  fftw_execute_dft(plan.fwd, as_fftw(data.data()), as_fftw(data.data()));
}

void backward(std::span<cplx> data) {
  const auto& plan = complex_plan(data.size());
  fftw_execute_dft(plan.bwd, as_fftw(data.data()), as_fftw(data.data()));
  const double scale = 1.0 / static_cast<double>(data.size());
  for (auto& v : data) v *= scale;
}

RealAxis::RealAxis(std::size_t n, std::size_t howmany, std::size_t stride, std::size_t dist)
    : n_(n), howmany_(howmany), stride_(stride), dist_(dist) {
  std::lock_guard lock(planner_mutex());
  const std::size_t real_extent = (howmany - 1) * dist + (n - 1) * stride + 1;
  auto* r = fftw_alloc_real(real_extent);
  auto* c = fftw_alloc_complex(howmany * bins());
  const int len[] = {static_cast<int>(n)};
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  fwd_ = fftw_plan_many_dft_r2c(1, len, static_cast<int>(howmany), r, nullptr,
                                static_cast<int>(stride), static_cast<int>(dist), c, nullptr,
                                1, static_cast<int>(bins()), flags);
  bwd_ = fftw_plan_many_dft_c2r(1, len, static_cast<int>(howmany), c, nullptr, 1,
                                static_cast<int>(bins()), r, nullptr,
                                static_cast<int>(stride), static_cast<int>(dist), flags);
  fftw_free(r);
  fftw_free(c);
}

RealAxis::~RealAxis() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
}

void RealAxis::forward(const double* in, cplx* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(fwd_), const_cast<double*>(in), as_fftw(out));
}

void RealAxis::backward(cplx* in, double* out) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(bwd_), as_fftw(in), out);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t l = 0; l < howmany_; ++l)
    for (std::size_t i = 0; i < n_; ++i) out[l * dist_ + i * stride_] *= scale;
}

}  // namespace dqm::fft
