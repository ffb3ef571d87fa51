#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pixie/mpm.hpp"

namespace pixie {

// A trajectory file is a sequence of PXFRAME1 records, one per frame:
// "PXFRAME1", u32 particle count, then f32 x, y, z per particle (little-endian).
std::vector<std::uint8_t> encode_trajectory(const mpm::Trajectory& traj);
mpm::Trajectory decode_trajectory(const std::vector<std::uint8_t>& bytes);

void write_trajectory(const std::filesystem::path& path, const mpm::Trajectory& traj);
mpm::Trajectory read_trajectory(const std::filesystem::path& path);

// Rows "frame,id,x,y,z".
void write_trajectory_csv(const std::filesystem::path& path, const mpm::Trajectory& traj);
// ASCII PLY point clouds named <stem>_0000.ply, <stem>_0001.ply, ... in dir.
void write_trajectory_ply(const std::filesystem::path& dir, const std::string& stem, const mpm::Trajectory& traj);

}  // namespace pixie
