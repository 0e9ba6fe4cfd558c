#pragma once

// Shared helpers for the line-oriented text formats (scenario, rhythm, plan,
// reports).  Internal to the library sources.

#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "rch/errors.hpp"

namespace rch::text {

// Shortest round-trip decimal; integers get no trailing ".0".
inline std::string num(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(v));
    return std::string(buf, r.ptr);
  }
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Line iterator that strips comments and blanks and tracks position.
struct Cursor {
  std::istream& in;
  int lineno = 0;

  bool next(std::string& out) {
    std::string raw;
    while (std::getline(in, raw)) {
      ++lineno;
      auto hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      size_t b = raw.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      size_t e = raw.find_last_not_of(" \t\r");
      out = raw.substr(b, e - b + 1);
      return true;
    }
    return false;
  }

  [[noreturn]] void die(const std::string& what) const {
    throw ParseError("line " + std::to_string(lineno) + ": " + what);
  }
};

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

// Plain decimal or a/b fraction.
inline double parse_num(const Cursor& c, const std::string& tok) {
  auto slash = tok.find('/');
  if (slash != std::string::npos) {
    double a = parse_num(c, tok.substr(0, slash));
    double b = parse_num(c, tok.substr(slash + 1));
    if (b == 0) c.die("division by zero in '" + tok + "'");
    return a / b;
  }
  double v = 0;
  auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (r.ec != std::errc() || r.ptr != tok.data() + tok.size())
    c.die("expected a number, got '" + tok + "'");
  return v;
}

inline int parse_int(const Cursor& c, const std::string& tok) {
  int v = 0;
  auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (r.ec != std::errc() || r.ptr != tok.data() + tok.size())
    c.die("expected an integer, got '" + tok + "'");
  return v;
}

inline std::vector<int> parse_int_list(const Cursor& c, const std::string& tok) {
  std::vector<int> out;
  size_t pos = 0;
  while (pos < tok.size()) {
    size_t comma = tok.find(',', pos);
    if (comma == std::string::npos) comma = tok.size();
    out.push_back(parse_int(c, tok.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

}  // namespace rch::text
