#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "antibunch/core.hpp"

namespace antibunch {

// .ttg layout, little-endian:
//   "TTG1" | version u16 | resolution_ps u32 | duration_ps u64 | count u64
//   then `count` records of { channel u8, timestamp_ps u64 }.
inline constexpr std::uint16_t kTtgVersion = 1;
inline constexpr std::size_t kTtgHeaderBytes = 4 + 2 + 4 + 8 + 8;
inline constexpr std::size_t kTtgRecordBytes = 9;

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_ttg(std::ostream& out, const TimeTagStream& stream);
TimeTagStream read_ttg(std::istream& in);

void write_ttg_file(const std::filesystem::path& path, const TimeTagStream& stream);
TimeTagStream read_ttg_file(const std::filesystem::path& path);

}  // namespace antibunch
