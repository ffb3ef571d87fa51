#include "pixie/trajectory_io.hpp"

#include <cstdio>
#include <cstring>
#include <string>

#include "pixie/grid_io.hpp"

namespace pixie {

namespace {

constexpr char kMagic[8] = {'P', 'X', 'F', 'R', 'A', 'M', 'E', '1'};

std::string format_float(float v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return std::string(buf, static_cast<std::size_t>(len));
}

}  // namespace

std::vector<std::uint8_t> encode_trajectory(const mpm::Trajectory& traj) {
  std::vector<std::uint8_t> out;
  for (const auto& frame : traj.positions) {
    out.insert(out.end(), kMagic, kMagic + 8);
    le::put_u32(out, static_cast<std::uint32_t>(frame.size()));
    for (const Vec3& x : frame) {
      for (int a = 0; a < 3; ++a) le::put_f32(out, static_cast<float>(x[a]));
    }
  }
  return out;
}

mpm::Trajectory decode_trajectory(const std::vector<std::uint8_t>& bytes) {
  mpm::Trajectory traj;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 12) throw Error(ErrorCode::FormatError, "truncated PXFRAME1 header");
    if (std::memcmp(bytes.data() + pos, kMagic, 8) != 0) {
      throw Error(ErrorCode::MagicMismatch, "expected PXFRAME1 magic at byte " + std::to_string(pos));
    }
    const std::uint32_t count = le::get_u32(bytes.data() + pos + 8);
    pos += 12;
    const std::size_t payload = static_cast<std::size_t>(count) * 12;
    if (bytes.size() - pos < payload) throw Error(ErrorCode::FormatError, "truncated PXFRAME1 payload");
    if (!traj.positions.empty() && traj.positions.front().size() != count) {
      throw Error(ErrorCode::DimensionMismatch, "particle count changes between frames");
    }
    std::vector<Vec3> frame(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint8_t* p = bytes.data() + pos + 12 * static_cast<std::size_t>(i);
      frame[i] = Vec3(le::get_f32(p), le::get_f32(p + 4), le::get_f32(p + 8));
    }
    pos += payload;
    traj.positions.push_back(std::move(frame));
  }
  return traj;
}

void write_trajectory(const std::filesystem::path& path, const mpm::Trajectory& traj) {
  write_file_atomic(path, encode_trajectory(traj));
}

mpm::Trajectory read_trajectory(const std::filesystem::path& path) { return decode_trajectory(read_file_bytes(path)); }

void write_trajectory_csv(const std::filesystem::path& path, const mpm::Trajectory& traj) {
  std::string text = "frame,id,x,y,z\n";
  for (std::size_t f = 0; f < traj.positions.size(); ++f) {
    const auto& frame = traj.positions[f];
    for (std::size_t i = 0; i < frame.size(); ++i) {
      text += std::to_string(f) + ',' + std::to_string(i);
      for (int a = 0; a < 3; ++a) text += ',' + format_float(static_cast<float>(frame[i][a]));
      text += '\n';
    }
  }
  write_file_atomic(path, text);
}

void write_trajectory_ply(const std::filesystem::path& dir, const std::string& stem, const mpm::Trajectory& traj) {
  std::filesystem::create_directories(dir);
  for (std::size_t f = 0; f < traj.positions.size(); ++f) {
    const auto& frame = traj.positions[f];
    std::string text = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(frame.size()) +
                       "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
    for (const Vec3& x : frame) {
      text += format_float(static_cast<float>(x[0])) + ' ' + format_float(static_cast<float>(x[1])) + ' ' +
              format_float(static_cast<float>(x[2])) + '\n';
    }
    char name[32];
    std::snprintf(name, sizeof name, "_%04zu.ply", f);
    write_file_atomic(dir / (stem + name), text);
  }
}

}  // namespace pixie
