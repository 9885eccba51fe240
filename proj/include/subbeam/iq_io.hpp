#pragma once

// I/Q capture files: a short text header terminated by "end_header\n",
// followed by interleaved float32 little-endian I/Q pairs.
//
//   subbeam-iq v1
//   sample_rate 122880000
//   fft_size 1024
//   cp_length 72
//   symbols 14
//   symbol_starts 0 1096 ...
//   num_samples 15344
//   end_header

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "subbeam/waveform.hpp"

namespace subbeam {

inline constexpr const char* kIqMagic = "subbeam-iq v1";

struct IqHeader {
  double sample_rate = 0.0;
  std::size_t fft_size = 0;
  std::size_t cp_length = 0;
  std::vector<std::size_t> symbol_starts;
  std::size_t num_samples = 0;
};

struct IqCapture {
  IqHeader header;
  CVec samples;
};

inline IqHeader iq_header_for(const Numerology& num, std::size_t num_samples) {
  IqHeader h;
  h.sample_rate = num.sample_rate;
  h.fft_size = num.fft_size;
  h.cp_length = num.cp_length;
  for (std::size_t s = 0; s < num.symbols_per_slot; ++s) h.symbol_starts.push_back(num.symbol_start(s));
  h.num_samples = num_samples;
  return h;
}

namespace detail {

inline void put_f32le(std::ostream& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(b, 4);
}

inline float get_f32le(const unsigned char* b) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace detail

inline void write_iq(std::ostream& out, const IqHeader& header, std::span<const cplx> samples) {
  if (samples.size() != header.num_samples)
    throw std::invalid_argument("write_iq: num_samples does not match the buffer");
  std::ostringstream h;
  h.precision(17);
  h << kIqMagic << '\n'
    << "sample_rate " << header.sample_rate << '\n'
    << "fft_size " << header.fft_size << '\n'
    << "cp_length " << header.cp_length << '\n'
    << "symbols " << header.symbol_starts.size() << '\n'
    << "symbol_starts";
  for (auto s : header.symbol_starts) h << ' ' << s;
  h << '\n' << "num_samples " << header.num_samples << '\n' << "end_header\n";
  out << h.str();
  for (const auto& v : samples) {
    detail::put_f32le(out, static_cast<float>(v.real()));
    detail::put_f32le(out, static_cast<float>(v.imag()));
  }
}

inline IqCapture read_iq(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kIqMagic)
    throw std::invalid_argument("read_iq: missing or unsupported header");
  IqCapture cap;
  auto& h = cap.header;
  std::size_t symbols = 0;
  bool done = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      done = true;
      break;
    }
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "sample_rate") ss >> h.sample_rate;
    else if (key == "fft_size") ss >> h.fft_size;
    else if (key == "cp_length") ss >> h.cp_length;
    else if (key == "symbols") ss >> symbols;
    else if (key == "num_samples") ss >> h.num_samples;
    else if (key == "symbol_starts") {
      std::size_t v;
      while (ss >> v) h.symbol_starts.push_back(v);
    } else {
      throw std::invalid_argument("read_iq: unknown header key '" + key + "'");
    }
    if (ss.fail() && !ss.eof())
      throw std::invalid_argument("read_iq: bad value for '" + key + "'");
  }
  if (!done) throw std::invalid_argument("read_iq: header not terminated");
  if (symbols != h.symbol_starts.size())
    throw std::invalid_argument("read_iq: symbol count does not match symbol_starts");
  std::vector<unsigned char> raw(h.num_samples * 8);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw std::invalid_argument("read_iq: truncated sample data");
  cap.samples.resize(h.num_samples);
  for (std::size_t i = 0; i < h.num_samples; ++i) {
    cap.samples[i] = cplx(detail::get_f32le(&raw[8 * i]), detail::get_f32le(&raw[8 * i + 4]));
  }
  return cap;
}

inline void save_iq(const std::string& path, const IqHeader& header, std::span<const cplx> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_iq(out, header, samples);
}

inline IqCapture load_iq(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return read_iq(in);
}

}  // namespace subbeam
