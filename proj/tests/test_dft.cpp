#include "catch_amalgamated.hpp"

#include <random>

#include "subbeam/dft.hpp"

using namespace subbeam;

namespace {

CVec naive_dft(const CVec& x) {
  const std::size_t n = x.size();
  CVec y(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t t = 0; t < n; ++t)
      y[k] += x[t] * std::polar(1.0, -2.0 * kPi * static_cast<double>((k * t) % n) /
                                         static_cast<double>(n));
  return y;
}

CVec random_signal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CVec x(n);
  for (auto& v : x) v = cplx(g(rng), g(rng));
  return x;
}

double max_rel_error(const CVec& a, const CVec& b) {
  double peak = 0.0, err = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    peak = std::max(peak, std::abs(b[i]));
    err = std::max(err, std::abs(a[i] - b[i]));
  }
  return err / peak;
}

}  // namespace

TEST_CASE("mixed-radix DFT matches the naive sum") {
  std::mt19937_64 rng(11);
  for (std::size_t n : {1u, 2u, 3u, 7u, 16u, 30u, 34u, 64u, 97u, 120u, 1024u}) {
    const auto x = random_signal(n, rng);
    const Dft dft(n);
    CHECK(max_rel_error(dft.forward(x), naive_dft(x)) < 1e-10);
  }
}

TEST_CASE("inverse undoes forward") {
  std::mt19937_64 rng(12);
  for (std::size_t n : {5u, 30u, 256u}) {
    const auto x = random_signal(n, rng);
    const Dft dft(n);
    CHECK(max_rel_error(dft.inverse(dft.forward(x)), x) < 1e-12);
  }
}

TEST_CASE("property: Parseval holds") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 8 + static_cast<std::size_t>(t) * 5;
    const auto x = random_signal(n, rng);
    const auto y = Dft(n).forward(x);
    double ex = 0, ey = 0;
    for (auto v : x) ex += std::norm(v);
    for (auto v : y) ey += std::norm(v);
    CHECK(ey == Catch::Approx(ex * static_cast<double>(n)).epsilon(1e-12));
  }
}

TEST_CASE("sliding update matches a fresh DFT over 64 steps") {
  for (std::size_t n : {16u, 30u, 64u}) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed);
      const auto x = random_signal(n + 64, rng);
      const Dft dft(n);
      const CVec rot = sliding_rotations(n);
      CVec spec = dft.forward(std::span<const cplx>(x).first(n));
      for (std::size_t s = 1; s <= 64; ++s) {
        sliding_dft_step(spec, x[s - 1 + n], x[s - 1], rot);
        const CVec ref = naive_dft(CVec(x.begin() + static_cast<long>(s),
                                        x.begin() + static_cast<long>(s + n)));
        worst = std::max(worst, max_rel_error(spec, ref));
      }
    }
    INFO("N' = " << n);
    CHECK(worst < 1e-7);
  }
}

TEST_CASE("MAC counting") {
  const Dft d30(30);
  CHECK(d30.radices() == std::vector<std::size_t>{2, 3, 5});
  CHECK(d30.mac_count() == 30u * 10u);
  OpCount ops;
  CVec x(30, cplx(1.0, 0.0));
  d30.forward(x, &ops);
  CVec spec(30);
  sliding_dft_step(spec, cplx{1.0}, cplx{}, sliding_rotations(30), &ops);
  CHECK(ops.complex_macs == 300u + 30u);
}

TEST_CASE("size errors") {
  CHECK_THROWS_AS(Dft(0), std::invalid_argument);
  const Dft d(8);
  CVec a(7), b(8);
  CHECK_THROWS_AS(d.forward(a, b), std::invalid_argument);
  CVec s(8);
  CHECK_THROWS_AS(sliding_dft_step(s, cplx{}, cplx{}, sliding_rotations(7)), std::invalid_argument);
}
