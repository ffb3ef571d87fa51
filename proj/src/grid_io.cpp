#include "pixie/grid_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <system_error>

namespace pixie {

namespace {

constexpr char kGridMagic[8] = {'P', 'X', 'G', 'R', 'I', 'D', '1', '\0'};
constexpr std::size_t kHeaderSize = 8 + 4 + 4 + 1 + 7;

template <class T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  v = byteswap_if_big(v);
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

template <class T>
T get(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return byteswap_if_big(v);
}

RawGrid expect(RawGrid raw, ElementKind kind, int d, const std::filesystem::path& path) {
  if (raw.kind != kind) {
    throw Error(ErrorCode::FormatError, path.string() + ": unexpected element kind " +
                                            std::to_string(static_cast<int>(raw.kind)));
  }
  if (d > 0 && raw.dims.d != d) {
    throw Error(ErrorCode::DimensionMismatch,
                path.string() + ": expected d = " + std::to_string(d) + ", got " + std::to_string(raw.dims.d));
  }
  return raw;
}

}  // namespace

namespace le {
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) { put(out, v); }
void put_f32(std::vector<std::uint8_t>& out, float v) { put(out, v); }
void put_f64(std::vector<std::uint8_t>& out, double v) { put(out, v); }
std::uint32_t get_u32(const std::uint8_t* p) { return get<std::uint32_t>(p); }
float get_f32(const std::uint8_t* p) { return get<float>(p); }
double get_f64(const std::uint8_t* p) { return get<double>(p); }
}  // namespace le

std::vector<std::uint8_t> encode_grid(const RawGrid& grid) {
  const std::size_t count = grid.dims.element_count();
  std::vector<std::uint8_t> out(std::begin(kGridMagic), std::end(kGridMagic));
  out.reserve(kHeaderSize + count * (grid.kind == ElementKind::F32 ? 4 : 1));
  le::put_u32(out, static_cast<std::uint32_t>(grid.dims.n));
  le::put_u32(out, static_cast<std::uint32_t>(grid.dims.d));
  out.push_back(static_cast<std::uint8_t>(grid.kind));
  out.insert(out.end(), 7, 0);
  if (grid.kind == ElementKind::F32) {
    if (grid.f32.size() != count) throw Error(ErrorCode::DimensionMismatch, "encode_grid: payload size");
    for (float f : grid.f32) le::put_f32(out, f);
  } else {
    if (grid.u8.size() != count) throw Error(ErrorCode::DimensionMismatch, "encode_grid: payload size");
    out.insert(out.end(), grid.u8.begin(), grid.u8.end());
  }
  return out;
}

RawGrid decode_grid(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kGridMagic, 8) != 0) {
    throw Error(ErrorCode::MagicMismatch, "not a PXGRID1 file");
  }
  const std::uint32_t n = le::get_u32(bytes.data() + 8);
  const std::uint32_t d = le::get_u32(bytes.data() + 12);
  const std::uint8_t kind = bytes[16];
  if (kind > 2) throw Error(ErrorCode::FormatError, "PXGRID1: unknown element kind " + std::to_string(kind));
  for (std::size_t i = 17; i < kHeaderSize; ++i) {
    if (bytes[i] != 0) throw Error(ErrorCode::FormatError, "PXGRID1: reserved header bytes must be zero");
  }
  if (n == 0 || d == 0 || n > (1u << 16) || d > (1u << 20)) {
    throw Error(ErrorCode::FormatError, "PXGRID1: implausible dims");
  }
  RawGrid raw;
  raw.dims = GridDims(static_cast<int>(n), static_cast<int>(d));
  raw.kind = static_cast<ElementKind>(kind);
  const std::size_t count = raw.dims.element_count();
  const std::size_t width = raw.kind == ElementKind::F32 ? 4 : 1;
  if (bytes.size() != kHeaderSize + count * width) {
    throw Error(ErrorCode::FormatError, "PXGRID1: payload length does not match header");
  }
  const std::uint8_t* payload = bytes.data() + kHeaderSize;
  if (raw.kind == ElementKind::F32) {
    raw.f32.resize(count);
    for (std::size_t i = 0; i < count; ++i) raw.f32[i] = le::get_f32(payload + 4 * i);
  } else {
    raw.u8.assign(payload, payload + count);
    if (raw.kind == ElementKind::Bool) {
      for (auto b : raw.u8) {
        if (b > 1) throw Error(ErrorCode::FormatError, "PXGRID1: bool payload byte other than 0/1");
      }
    }
  }
  return raw;
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot rename into " + path.string());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_raw_grid(const std::filesystem::path& path, const RawGrid& grid) {
  write_file_atomic(path, encode_grid(grid));
}

RawGrid read_raw_grid(const std::filesystem::path& path) {
  try {
    return decode_grid(read_file_bytes(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_grid(const std::filesystem::path& path, const FeatureGrid& grid) {
  write_raw_grid(path, RawGrid{grid.dims(), ElementKind::F32, grid.data(), {}});
}

void write_grid(const std::filesystem::path& path, const DensityGrid& grid) {
  write_raw_grid(path, RawGrid{grid.dims(), ElementKind::F32, grid.data(), {}});
}

void write_grid(const std::filesystem::path& path, const OccupancyMask& grid) {
  RawGrid raw{grid.dims(), ElementKind::Bool, {}, grid.data()};
  for (auto& b : raw.u8) b = b != 0;
  write_raw_grid(path, raw);
}

void write_grid(const std::filesystem::path& path, const PartLabelGrid& grid) {
  write_raw_grid(path, RawGrid{grid.dims(), ElementKind::U8, {}, grid.data()});
}

FeatureGrid read_feature_grid(const std::filesystem::path& path) {
  auto raw = expect(read_raw_grid(path), ElementKind::F32, 0, path);
  FeatureGrid g(raw.dims, std::move(raw.f32));
  g.validate();
  return g;
}

DensityGrid read_density_grid(const std::filesystem::path& path) {
  auto raw = expect(read_raw_grid(path), ElementKind::F32, 1, path);
  DensityGrid g(raw.dims.n, std::move(raw.f32));
  g.validate();
  return g;
}

OccupancyMask read_occupancy_mask(const std::filesystem::path& path) {
  auto raw = expect(read_raw_grid(path), ElementKind::Bool, 1, path);
  return OccupancyMask(raw.dims.n, std::move(raw.u8));
}

PartLabelGrid read_part_label_grid(const std::filesystem::path& path) {
  auto raw = expect(read_raw_grid(path), ElementKind::U8, 1, path);
  return PartLabelGrid(raw.dims.n, std::move(raw.u8));
}

}  // namespace pixie
