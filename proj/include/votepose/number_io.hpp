#pragma once

// Lossless text formatting for doubles. Every file format in this library
// writes numbers through format_double so that a value survives a
// save/load round trip bit-for-bit: std::to_chars emits the shortest
// decimal string that parses back to the identical double.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>

#include "votepose/errors.hpp"

namespace votepose {

inline std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline std::string format_index(std::uint64_t value) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

/// Parses a whole token as a double. Returns false on any trailing junk,
/// empty input, or malformed number. "inf"/"nan" are accepted so that
/// sentinel metric values survive a CSV round trip.
inline bool parse_double(std::string_view token, double& out) {
  if (token.empty()) return false;
  auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

inline bool parse_int64(std::string_view token, std::int64_t& out) {
  if (token.empty()) return false;
  auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

inline bool parse_uint64(std::string_view token, std::uint64_t& out) {
  if (token.empty()) return false;
  auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

}  // namespace votepose
