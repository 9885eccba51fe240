#pragma once

// Versioned plain-text codebook files.
//
//   # subbeam-codebook v1
//   geometry ula|planar <rows> <cols> <spacing>
//   epsilon <eps>
//   users <U>
//   user <angle_deg> <base_snr>          (U lines)
//   entries <M>
//   entry <az_deg> <el_deg|-> <gamma_min_db|inf> <status> <iterations>
//   w <re> <im>                          (N lines per entry)
//
// Reals are written with 17 significant digits so weights round-trip exactly.

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "subbeam/optimizer.hpp"

namespace subbeam {

inline constexpr const char* kCodebookMagic = "# subbeam-codebook v1";

namespace detail {

inline std::string fmt17(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_real(const std::string& tok, const char* what) {
  if (tok == "inf") return std::numeric_limits<double>::infinity();
  if (tok == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("codebook: bad number for ") + what +
                                ": '" + tok + "'");
  }
}

inline SolveStatus parse_status(const std::string& s) {
  if (s == "converged") return SolveStatus::Converged;
  if (s == "max-iterations") return SolveStatus::MaxIterations;
  if (s == "no-improvement") return SolveStatus::NoImprovement;
  throw std::invalid_argument("codebook: unknown status '" + s + "'");
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream next(const std::string& keyword) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      std::string key;
      ss >> key;
      if (key != keyword)
        throw std::invalid_argument("codebook: line " + std::to_string(line_no_) +
                                    ": expected '" + keyword + "', got '" + key + "'");
      return ss;
    }
    throw std::invalid_argument("codebook: unexpected end of file, expected '" +
                                keyword + "'");
  }

 private:
  std::istream& in_;
  int line_no_ = 0;
};

inline std::string token(std::istringstream& ss, const char* what) {
  std::string t;
  if (!(ss >> t)) throw std::invalid_argument(std::string("codebook: missing ") + what);
  return t;
}

}  // namespace detail

inline void write_codebook(std::ostream& out, const Codebook& book) {
  using detail::fmt17;
  const auto& g = book.geometry;
  out << kCodebookMagic << '\n';
  out << "geometry " << (g.layout() == Layout::Ula ? "ula" : "planar") << ' '
      << g.rows() << ' ' << g.cols() << ' ' << fmt17(g.spacing()) << '\n';
  out << "epsilon " << fmt17(book.epsilon) << '\n';
  out << "users " << book.users.size() << '\n';
  for (const auto& u : book.users)
    out << "user " << fmt17(rad2deg(u.angle)) << ' ' << fmt17(u.base_snr) << '\n';
  out << "entries " << book.entries.size() << '\n';
  for (const auto& e : book.entries) {
    out << "entry " << fmt17(rad2deg(e.sensing.azimuth)) << ' '
        << (e.sensing.elevation ? fmt17(rad2deg(*e.sensing.elevation)) : "-") << ' '
        << fmt17(lin2db(e.gamma_min)) << ' ' << to_string(e.status) << ' '
        << e.iterations << '\n';
    for (const auto& w : e.weights.weights())
      out << "w " << fmt17(w.real()) << ' ' << fmt17(w.imag()) << '\n';
  }
}

inline std::string codebook_to_string(const Codebook& book) {
  std::ostringstream ss;
  write_codebook(ss, book);
  return ss.str();
}

inline Codebook read_codebook(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != kCodebookMagic)
    throw std::invalid_argument("codebook: missing or unsupported version header");
  detail::LineReader rd(in);
  using detail::parse_real;
  using detail::token;

  auto gs = rd.next("geometry");
  const std::string layout = token(gs, "layout");
  const auto rows = std::stoul(token(gs, "rows"));
  const auto cols = std::stoul(token(gs, "cols"));
  const double spacing = parse_real(token(gs, "spacing"), "spacing");
  Codebook book;
  if (layout == "ula") {
    if (rows != 1) throw std::invalid_argument("codebook: ula geometry must have 1 row");
    book.geometry = ArrayGeometry::ula(cols, spacing);
  } else if (layout == "planar") {
    book.geometry = ArrayGeometry::planar(rows, cols, spacing);
  } else {
    throw std::invalid_argument("codebook: unknown layout '" + layout + "'");
  }
  auto es = rd.next("epsilon");
  book.epsilon = parse_real(token(es, "epsilon"), "epsilon");

  auto us = rd.next("users");
  const auto num_users = std::stoul(token(us, "user count"));
  for (std::size_t i = 0; i < num_users; ++i) {
    auto ls = rd.next("user");
    UserLink u;
    u.angle = deg2rad(parse_real(token(ls, "user angle"), "user angle"));
    u.base_snr = parse_real(token(ls, "user snr"), "user snr");
    book.users.push_back(u);
  }
  auto ns = rd.next("entries");
  const auto num_entries = std::stoul(token(ns, "entry count"));
  const std::size_t n = book.geometry.num_elements();
  for (std::size_t m = 0; m < num_entries; ++m) {
    auto ls = rd.next("entry");
    CodebookEntry e;
    e.sensing.azimuth = deg2rad(parse_real(token(ls, "azimuth"), "azimuth"));
    const std::string el = token(ls, "elevation");
    if (el != "-") e.sensing.elevation = deg2rad(parse_real(el, "elevation"));
    e.gamma_min = db2lin(parse_real(token(ls, "gamma_min"), "gamma_min"));
    e.status = detail::parse_status(token(ls, "status"));
    e.converged = e.status == SolveStatus::Converged;
    e.iterations = std::stoi(token(ls, "iterations"));
    CVec w(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto ws = rd.next("w");
      const double re = parse_real(token(ws, "re"), "weight");
      const double im = parse_real(token(ws, "im"), "weight");
      w[i] = cplx(re, im);
    }
    e.weights = Beamformer(std::move(w));
    book.entries.push_back(std::move(e));
  }
  return book;
}

inline Codebook codebook_from_string(const std::string& text) {
  std::istringstream ss(text);
  return read_codebook(ss);
}

inline void save_codebook(const std::string& path, const Codebook& book) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_codebook(out, book);
}

inline Codebook load_codebook(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return read_codebook(in);
}

}  // namespace subbeam
