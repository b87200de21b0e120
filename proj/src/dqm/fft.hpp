#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace dqm::fft {

using cplx = std::complex<double>;

// Angular wavenumber of FFT bin j for a periodic axis of n points and length L.
// Bins above n/2 map to negative frequencies; the Nyquist bin (n even, j = n/2)
// is reported as -pi n / L.
double wavenumber(std::size_t j, std::size_t n, double length);

// In-place unnormalized complex transforms of one contiguous array.
void forward(std::span<cplx> data);
void backward(std::span<cplx> data);  // includes the 1/n factor

// Batched real transforms along one axis of a row-major 2D array.
//
// `howmany` lines of `n` samples, sample stride `stride`, line distance `dist`
// on the real side. The complex side is always packed as howmany lines of
// n/2+1 contiguous coefficients.
class RealAxis {
 public:
  RealAxis(std::size_t n, std::size_t howmany, std::size_t stride, std::size_t dist);
  ~RealAxis();
  RealAxis(const RealAxis&) = delete;
  RealAxis& operator=(const RealAxis&) = delete;

  std::size_t n() const { return n_; }
  std::size_t lines() const { return howmany_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  void forward(const double* in, cplx* out) const;
  // Destroys `in`. Output is normalized (divided by n).
  void backward(cplx* in, double* out) const;

 private:
  std::size_t n_, howmany_, stride_, dist_;
  void* fwd_ = nullptr;
  void* bwd_ = nullptr;
};

}  // namespace dqm::fft
