#include "antibunch/ttg_io.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <ostream>

namespace antibunch {
namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw FormatError(std::string("truncated .ttg file while reading ") + what);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t{bytes[i]} << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

void write_ttg(std::ostream& out, const TimeTagStream& stream) {
  out.write("TTG1", 4);
  put_le<std::uint16_t>(out, kTtgVersion);
  put_le<std::uint32_t>(out, stream.resolution_ps());
  put_le<std::uint64_t>(out, stream.duration_ps());
  put_le<std::uint64_t>(out, stream.size());
  for (const TimeTag& t : stream.tags()) {
    put_le<std::uint8_t>(out, t.channel);
    put_le<std::uint64_t>(out, t.timestamp);
  }
  if (!out) throw FormatError("failed writing .ttg stream");
}

TimeTagStream read_ttg(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || std::string(magic.data(), 4) != "TTG1")
    throw FormatError("bad magic: not a .ttg file");
  const auto version = get_le<std::uint16_t>(in, "version");
  if (version != kTtgVersion)
    throw FormatError("unsupported .ttg version " + std::to_string(version));
  const auto resolution = get_le<std::uint32_t>(in, "resolution");
  if (resolution != 1)
    throw FormatError("unsupported .ttg resolution " + std::to_string(resolution) + " ps");
  const auto duration = get_le<std::uint64_t>(in, "duration");
  const auto count = get_le<std::uint64_t>(in, "record count");

  std::vector<TimeTag> tags;
  tags.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
  for (std::uint64_t i = 0; i < count; ++i) {
    TimeTag t;
    t.channel = get_le<std::uint8_t>(in, "record");
    t.timestamp = get_le<std::uint64_t>(in, "record");
    if (t.channel > 1) throw FormatError("record " + std::to_string(i) + ": channel > 1");
    if (t.timestamp > duration)
      throw FormatError("record " + std::to_string(i) + ": timestamp beyond duration");
    if (!tags.empty() && tag_before(t, tags.back()))
      throw FormatError("record " + std::to_string(i) + ": records not sorted");
    tags.push_back(t);
  }
  return TimeTagStream(std::move(tags), duration);
}

void write_ttg_file(const std::filesystem::path& path, const TimeTagStream& stream) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_ttg(out, stream);
}

TimeTagStream read_ttg_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  try {
    return read_ttg(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace antibunch
