#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "momsos/error.hpp"
#include "momsos/sdp.hpp"

namespace momsos {

// SDPA sparse files, written literally from SdpProblem:
//
//   m
//   nblocks
//   s_1 ... s_nblocks        (negative for diagonal blocks)
//   b_1 ... b_m
//   k blk i j v              (1-based, i <= j, k = 0 for C)
//
// Note the sign convention: SDPA's own primal reads the data as
// min b.x s.t. sum x_k A_k - C PSD, so a solver fed this file solves our
// program with C negated. Round trips through this module are exact.

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Drops the punctuation SDPA writers sprinkle around numbers.
inline std::vector<std::string> sdpa_tokens(const std::string& line) {
  std::string clean = line;
  for (char& ch : clean) {
    if (ch == '{' || ch == '}' || ch == '(' || ch == ')' || ch == ',') ch = ' ';
  }
  std::istringstream in(clean);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

inline long parse_long(const std::string& tok, std::size_t line) {
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (tok.empty() || *end != '\0') {
    throw FormatError("line " + std::to_string(line) + ": expected an integer, got '" + tok + "'");
  }
  return v;
}

inline double parse_real(const std::string& tok, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (tok.empty() || *end != '\0') {
    throw FormatError("line " + std::to_string(line) + ": expected a number, got '" + tok + "'");
  }
  return v;
}

}  // namespace detail

inline void write_sdpa(const SdpProblem& p, std::ostream& out) {
  p.validate();
  out << p.num_vars() << '\n' << p.num_blocks() << '\n';
  for (std::size_t b = 0; b < p.num_blocks(); ++b) {
    if (b) out << ' ';
    out << (p.is_diagonal(b) ? "-" : "") << p.block_sizes[b];
  }
  out << '\n';
  for (std::size_t k = 0; k < p.num_vars(); ++k) {
    if (k) out << ' ';
    out << detail::format_double(p.b[k]);
  }
  out << '\n';
  auto emit = [&](std::size_t k, const BlockMatrix& m) {
    for (const auto& e : m.entries()) {
      out << k << ' ' << e.block + 1 << ' ' << e.row + 1 << ' ' << e.col + 1 << ' '
          << detail::format_double(e.value) << '\n';
    }
  };
  emit(0, p.c);
  for (std::size_t k = 0; k < p.num_vars(); ++k) emit(k + 1, p.a[k]);
}

inline std::string to_sdpa(const SdpProblem& p) {
  std::ostringstream s;
  write_sdpa(p, s);
  return s.str();
}

inline void export_sdpa(const SdpProblem& p, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  write_sdpa(p, f);
  if (!f) throw Error("write to '" + path + "' failed");
}

/// Leading lines starting with '"' or '*' are comments. Header lines may
/// carry trailing words after their counts (e.g. "3 = mDIM").
inline SdpProblem read_sdpa(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::size_t no = 0;
  bool header_started = false;
  for (std::string line; std::getline(in, line);) {
    ++no;
    if (!header_started && !line.empty() && (line[0] == '"' || line[0] == '*')) continue;
    if (detail::sdpa_tokens(line).empty()) continue;
    header_started = true;
    lines.emplace_back(no, line);
  }
  std::size_t pos = 0;
  auto need = [&](const char* what) -> const std::pair<std::size_t, std::string>& {
    if (pos >= lines.size()) throw FormatError(std::string("unexpected end of file, expected ") + what);
    return lines[pos++];
  };

  SdpProblem p;
  const auto& l1 = need("variable count");
  const long m = detail::parse_long(detail::sdpa_tokens(l1.second)[0], l1.first);
  const auto& l2 = need("block count");
  const long nb = detail::parse_long(detail::sdpa_tokens(l2.second)[0], l2.first);
  if (m < 0) throw FormatError("line " + std::to_string(l1.first) + ": negative variable count");
  if (nb < 1) throw FormatError("line " + std::to_string(l2.first) + ": need at least one block");

  // Block sizes and b may each span several lines.
  auto read_list = [&](std::size_t count, const char* what) {
    std::vector<std::pair<std::size_t, std::string>> vals;
    while (vals.size() < count) {
      const auto& l = need(what);
      for (const auto& t : detail::sdpa_tokens(l.second)) {
        if (vals.size() == count) {
          throw FormatError("line " + std::to_string(l.first) + ": too many " + what);
        }
        vals.emplace_back(l.first, t);
      }
    }
    return vals;
  };
  for (const auto& [ln, t] : read_list(static_cast<std::size_t>(nb), "block sizes")) {
    const long s = detail::parse_long(t, ln);
    if (s == 0) throw FormatError("line " + std::to_string(ln) + ": block of size zero");
    p.block_sizes.push_back(static_cast<std::size_t>(s < 0 ? -s : s));
    p.diagonal.push_back(s < 0);
  }
  for (const auto& [ln, t] : read_list(static_cast<std::size_t>(m), "objective entries")) {
    p.b.push_back(detail::parse_real(t, ln));
  }
  p.a.resize(static_cast<std::size_t>(m));

  std::map<std::tuple<long, long, long, long>, double> seen;
  while (pos < lines.size()) {
    const auto& [ln, text] = lines[pos++];
    const auto tok = detail::sdpa_tokens(text);
    const std::string where = "line " + std::to_string(ln) + ": ";
    if (tok.size() != 5) throw FormatError(where + "expected 'k block i j value'");
    const long k = detail::parse_long(tok[0], ln);
    const long blk = detail::parse_long(tok[1], ln);
    long i = detail::parse_long(tok[2], ln);
    long j = detail::parse_long(tok[3], ln);
    const double v = detail::parse_real(tok[4], ln);
    if (k < 0 || k > m) throw FormatError(where + "matrix index " + tok[0] + " out of range");
    if (blk < 1 || blk > nb) throw FormatError(where + "block index " + tok[1] + " out of range");
    const auto n = static_cast<long>(p.block_sizes[static_cast<std::size_t>(blk - 1)]);
    if (i < 1 || i > n || j < 1 || j > n) {
      throw FormatError(where + "entry (" + tok[2] + ", " + tok[3] + ") outside block of size " +
                        std::to_string(n));
    }
    if (i > j) std::swap(i, j);
    if (p.diagonal[static_cast<std::size_t>(blk - 1)] && i != j) {
      throw FormatError(where + "off-diagonal entry in a diagonal block");
    }
    if (!std::isfinite(v)) throw FormatError(where + "non-finite value");
    const auto [it, fresh] = seen.try_emplace({k, blk, i, j}, v);
    if (!fresh) {
      if (it->second != v) throw FormatError(where + "conflicting duplicate entry");
      continue;
    }
    BlockMatrix& target = k == 0 ? p.c : p.a[static_cast<std::size_t>(k - 1)];
    target.add(static_cast<std::size_t>(blk - 1), static_cast<std::size_t>(i - 1),
               static_cast<std::size_t>(j - 1), v);
  }
  return p;
}

inline SdpProblem from_sdpa(const std::string& text) {
  std::istringstream s(text);
  return read_sdpa(s);
}

inline SdpProblem import_sdpa(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path + "'");
  return read_sdpa(f);
}

}  // namespace momsos
