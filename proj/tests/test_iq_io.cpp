#include "catch_amalgamated.hpp"

#include <random>
#include <sstream>

#include "subbeam/iq_io.hpp"

using namespace subbeam;

TEST_CASE("IQ round trip is exact at float32 precision") {
  Numerology num;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  CVec x(num.slot_length());
  for (auto& v : x) v = cplx(g(rng), g(rng));
  std::stringstream ss;
  write_iq(ss, iq_header_for(num, x.size()), x);
  const auto cap = read_iq(ss);
  CHECK(cap.header.sample_rate == num.sample_rate);
  CHECK(cap.header.fft_size == 1024);
  CHECK(cap.header.cp_length == 72);
  REQUIRE(cap.header.symbol_starts.size() == 14);
  CHECK(cap.header.symbol_starts[3] == 3 * 1096);
  REQUIRE(cap.samples.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(cap.samples[i].real() == static_cast<float>(x[i].real()));
    CHECK(cap.samples[i].imag() == static_cast<float>(x[i].imag()));
  }
}

TEST_CASE("payload is little-endian float32 after the text header") {
  Numerology num;
  num.symbols_per_slot = 1;
  num.dmrs_symbols = {1};
  const CVec x{cplx(1.0, -2.0)};
  std::stringstream ss;
  write_iq(ss, iq_header_for(num, 1), x);
  const std::string s = ss.str();
  const auto body = s.substr(s.find("end_header\n") + 11);
  REQUIRE(body.size() == 8);
  // 1.0f = 0x3f800000, -2.0f = 0xc0000000
  const unsigned char want[8] = {0, 0, 0x80, 0x3f, 0, 0, 0, 0xc0};
  for (int i = 0; i < 8; ++i) CHECK(static_cast<unsigned char>(body[i]) == want[i]);
}

TEST_CASE("bad IQ files are rejected") {
  Numerology num;
  CVec x(10);
  std::stringstream a;
  CHECK_THROWS_AS(write_iq(a, iq_header_for(num, 11), x), std::invalid_argument);
  std::stringstream b("not-iq\n");
  CHECK_THROWS_AS(read_iq(b), std::invalid_argument);
  std::stringstream c;
  write_iq(c, iq_header_for(num, 10), x);
  std::string trunc = c.str();
  trunc.resize(trunc.size() - 3);
  std::stringstream d(trunc);
  CHECK_THROWS_AS(read_iq(d), std::invalid_argument);
  std::stringstream e("subbeam-iq v1\nbogus 1\nend_header\n");
  CHECK_THROWS_AS(read_iq(e), std::invalid_argument);
}
