#include "nixie/units.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

#include "nixie/errors.hpp"

namespace nixie {

const char* err_name(Err code) {
  switch (code) {
    case Err::CapacityExceeded: return "CapacityExceeded";
    case Err::UnknownChunk: return "UnknownChunk";
    case Err::UnknownApp: return "UnknownApp";
    case Err::ChunkBusy: return "ChunkBusy";
    case Err::NotInFlight: return "NotInFlight";
    case Err::AppTooLarge: return "AppTooLarge";
    case Err::InsufficientEvictable: return "InsufficientEvictable";
    case Err::InvalidScenario: return "InvalidScenario";
    case Err::ParseError: return "ParseError";
    case Err::ValidationError: return "ValidationError";
    case Err::IoError: return "IoError";
    case Err::InvalidState: return "InvalidState";
  }
  return "Error";
}

namespace {

struct Suffix {
  const char* text;
  double factor;
};

// Longest match first.
constexpr Suffix kSuffixes[] = {
    {"KiB", 1024.0},
    {"MiB", 1048576.0},
    {"GiB", 1073741824.0},
    {"TiB", 1099511627776.0},
    {"KB", 1e3},
    {"MB", 1e6},
    {"GB", 1e9},
    {"TB", 1e12},
    {"B", 1.0},
};

double parse_sized(const std::string& text, bool* ok) {
  std::string s = text;
  // strip whitespace
  std::string t;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(c);
  if (t.empty()) {
    *ok = false;
    return 0;
  }
  double factor = 1.0;
  for (const Suffix& suf : kSuffixes) {
    std::string sx(suf.text);
    if (t.size() > sx.size() && t.compare(t.size() - sx.size(), sx.size(), sx) == 0) {
      factor = suf.factor;
      t = t.substr(0, t.size() - sx.size());
      break;
    }
  }
  std::size_t pos = 0;
  double value = 0;
  try {
    value = std::stod(t, &pos);
  } catch (const std::exception&) {
    *ok = false;
    return 0;
  }
  if (pos != t.size()) {
    *ok = false;
    return 0;
  }
  *ok = true;
  return value * factor;
}

}  // namespace

Bytes parse_bytes(const std::string& text) {
  if (text == "unbounded") return kUnbounded;
  bool ok = false;
  double v = parse_sized(text, &ok);
  if (!ok || v < 0) throw SimError(Err::ParseError, "bad byte quantity '" + text + "'");
  return static_cast<Bytes>(std::llround(v));
}

Bandwidth parse_bandwidth(const std::string& text) {
  std::string t = text;
  if (t.size() > 2 && t.compare(t.size() - 2, 2, "/s") == 0) t = t.substr(0, t.size() - 2);
  bool ok = false;
  double v = parse_sized(t, &ok);
  if (!ok || v <= 0) throw SimError(Err::ParseError, "bad bandwidth '" + text + "'");
  return v;
}

std::string format_bytes(Bytes value) {
  if (value == kUnbounded) return "unbounded";
  if (value % kGiB == 0) return std::to_string(value / kGiB) + "GiB";
  if (value % kMiB == 0) return std::to_string(value / kMiB) + "MiB";
  if (value % kKiB == 0) return std::to_string(value / kKiB) + "KiB";
  return std::to_string(value) + "B";
}

}  // namespace nixie
