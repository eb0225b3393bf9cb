#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "asal/error.hpp"

namespace asal::binio {

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian hosts");

inline void write_magic(std::ostream& out, const char* magic, std::uint16_t version) {
  out.write(magic, static_cast<std::streamsize>(std::strlen(magic)));
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
}

inline void read_magic(std::istream& in, const char* magic, std::uint16_t version) {
  std::string found(std::strlen(magic), '\0');
  in.read(found.data(), static_cast<std::streamsize>(found.size()));
  if (!in || found != magic) throw ParseError(std::string("bad magic, expected ") + magic);
  std::uint16_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ParseError("truncated header");
  if (v != version) throw ParseError("unsupported version " + std::to_string(v));
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ParseError("truncated file");
  return v;
}

inline void write_f64s(std::ostream& out, std::span<const double> values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

inline void read_f64s(std::istream& in, std::span<double> values) {
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw ParseError("truncated file");
}

}  // namespace asal::binio
