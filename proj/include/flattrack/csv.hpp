#pragma once

#include <charconv>
#include <string>
#include <vector>

namespace flattrack::csv {

/// Shortest decimal text that parses back to the same double.
inline std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string num(int v) { return std::to_string(v); }

/// Comma split without quoting; fields here never contain commas.
inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

template <class... T>
std::string row(const T&... fields) {
  std::string out;
  ((out += (out.empty() ? "" : ","), out += fields), ...);
  return out + "\n";
}

}  // namespace flattrack::csv
