#pragma once

// Mixed-radix DFT for arbitrary sizes, with an optional complex
// multiply-add counter. Forward transform uses exp(-j 2 pi k n / N);
// the inverse is scaled by 1/N.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "subbeam/array.hpp"

namespace subbeam {

/// Counts complex multiply-adds performed by instrumented kernels.
struct OpCount {
  std::uint64_t complex_macs = 0;
};

class Dft {
 public:
  explicit Dft(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("Dft: size must be >= 1");
    std::size_t rem = n;
    for (std::size_t p = 2; p * p <= rem; ++p) {
      while (rem % p == 0) {
        radices_.push_back(p);
        rem /= p;
      }
    }
    if (rem > 1) radices_.push_back(rem);
    twiddle_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      twiddle_[k] = std::polar(1.0, -2.0 * kPi * static_cast<double>(k) /
                                        static_cast<double>(n));
    }
  }

  std::size_t size() const { return n_; }
  const std::vector<std::size_t>& radices() const { return radices_; }

  /// Complex multiply-adds for one transform: N times the sum of the radices.
  std::uint64_t mac_count() const {
    std::uint64_t sum = 0;
    for (auto p : radices_) sum += p;
    return static_cast<std::uint64_t>(n_) * sum;
  }

  void forward(std::span<const cplx> in, std::span<cplx> out,
               OpCount* ops = nullptr) const {
    check(in, out);
    std::vector<cplx> scratch(n_);
    transform(in.data(), 1, out.data(), n_, 0, scratch.data());
    if (ops) ops->complex_macs += mac_count();
  }

  CVec forward(std::span<const cplx> in, OpCount* ops = nullptr) const {
    CVec out(n_);
    forward(in, out, ops);
    return out;
  }

  void inverse(std::span<const cplx> in, std::span<cplx> out) const {
    check(in, out);
    CVec tmp(in.begin(), in.end());
    for (auto& v : tmp) v = std::conj(v);
    forward(tmp, out);
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& v : out) v = std::conj(v) * scale;
  }

  CVec inverse(std::span<const cplx> in) const {
    CVec out(n_);
    inverse(in, out);
    return out;
  }

 private:
  void check(std::span<const cplx> in, std::span<cplx> out) const {
    if (in.size() != n_ || out.size() != n_)
      throw std::invalid_argument("Dft: buffer size mismatch");
  }

  // Decimation in time: the p interleaved sub-sequences of length m = n/p are
  // transformed into contiguous blocks of `out`, then combined.
  void transform(const cplx* in, std::size_t stride, cplx* out, std::size_t n,
                 std::size_t level, cplx* scratch) const {
    if (n == 1) {
      out[0] = in[0];
      return;
    }
    const std::size_t p = radices_[level];
    const std::size_t m = n / p;
    for (std::size_t r = 0; r < p; ++r) {
      transform(in + r * stride, stride * p, out + r * m, m, level + 1, scratch);
    }
    const std::size_t tw_step = n_ / n;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t km = k % m;
      cplx acc = out[km];
      std::size_t idx = 0;
      for (std::size_t r = 1; r < p; ++r) {
        idx = (idx + k) % n;
        acc += twiddle_[idx * tw_step] * out[r * m + km];
      }
      scratch[k] = acc;
    }
    std::copy(scratch, scratch + n, out);
  }

  std::size_t n_;
  std::vector<std::size_t> radices_;
  CVec twiddle_;
};

/// Rotation factors exp(+j 2 pi k / N) used by the one-sample sliding update.
inline CVec sliding_rotations(std::size_t n) {
  CVec rot(n);
  for (std::size_t k = 0; k < n; ++k) {
    rot[k] = std::polar(1.0, 2.0 * kPi * static_cast<double>(k) /
                                 static_cast<double>(n));
  }
  return rot;
}

/// Advances the DFT of a length-N window by one sample in place:
/// Y'[k] = (Y[k] + y_in - y_out) * exp(+j 2 pi k / N).
inline void sliding_dft_step(std::span<cplx> spectrum, cplx y_in, cplx y_out,
                             std::span<const cplx> rotations,
                             OpCount* ops = nullptr) {
  if (rotations.size() != spectrum.size())
    throw std::invalid_argument("sliding_dft_step: rotation table size mismatch");
  const cplx delta = y_in - y_out;
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    spectrum[k] = (spectrum[k] + delta) * rotations[k];
  }
  if (ops) ops->complex_macs += spectrum.size();
}

inline CVec sliding_dft_step(std::span<const cplx> spectrum, cplx y_in,
                             cplx y_out) {
  CVec out(spectrum.begin(), spectrum.end());
  sliding_dft_step(out, y_in, y_out, sliding_rotations(out.size()));
  return out;
}

}  // namespace subbeam
