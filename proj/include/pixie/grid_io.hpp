#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pixie/grid.hpp"

namespace pixie {

// PXGRID1 layout: "PXGRID1\0", u32 n, u32 d, u8 kind, 7 zero bytes, payload.
// All multi-byte values little-endian.
enum class ElementKind : std::uint8_t { F32 = 0, U8 = 1, Bool = 2 };

struct RawGrid {
  GridDims dims;
  ElementKind kind = ElementKind::F32;
  std::vector<float> f32;       // populated for F32
  std::vector<std::uint8_t> u8;  // populated for U8 and Bool
};

std::vector<std::uint8_t> encode_grid(const RawGrid& grid);
RawGrid decode_grid(const std::vector<std::uint8_t>& bytes);

void write_raw_grid(const std::filesystem::path& path, const RawGrid& grid);
RawGrid read_raw_grid(const std::filesystem::path& path);

void write_grid(const std::filesystem::path& path, const FeatureGrid& grid);
void write_grid(const std::filesystem::path& path, const DensityGrid& grid);
void write_grid(const std::filesystem::path& path, const OccupancyMask& grid);
void write_grid(const std::filesystem::path& path, const PartLabelGrid& grid);

FeatureGrid read_feature_grid(const std::filesystem::path& path);
DensityGrid read_density_grid(const std::filesystem::path& path);
OccupancyMask read_occupancy_mask(const std::filesystem::path& path);
PartLabelGrid read_part_label_grid(const std::filesystem::path& path);

// Writes to a sibling temporary and renames over the target, so readers never
// observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

// Little-endian helpers shared by the binary formats.
namespace le {
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
void put_f64(std::vector<std::uint8_t>& out, double v);
std::uint32_t get_u32(const std::uint8_t* p);
float get_f32(const std::uint8_t* p);
double get_f64(const std::uint8_t* p);
}  // namespace le

}  // namespace pixie
