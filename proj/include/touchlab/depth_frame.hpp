#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "touchlab/common.hpp"

namespace touchlab {

inline constexpr std::uint16_t kInvalidDepth = 0;
inline constexpr std::uint16_t kMaxDepthMm = 10000;

/// Range image in integer millimeters; 0 marks an invalid sample.
struct DepthFrame {
    Image<std::uint16_t> depth;
    std::uint64_t frame_id = 0;
    std::int64_t timestamp_ms = 0;
    double mm_per_px = 1.5;

    DepthFrame() = default;
    DepthFrame(int width, int height, std::uint16_t fill = kInvalidDepth) : depth(width, height, fill) {}

    int width() const { return depth.width(); }
    int height() const { return depth.height(); }
    bool valid(int x, int y) const { return depth(x, y) != kInvalidDepth; }
};

// Binary PGM (P5). 16-bit images are written big-endian with maxval 65535.
void write_pgm16(const std::filesystem::path& path, const Image<std::uint16_t>& img);
Image<std::uint16_t> read_pgm16(const std::filesystem::path& path);
void write_pgm8(const std::filesystem::path& path, const Mask& img);
Mask read_pgm8(const std::filesystem::path& path);

/// Writes `<stem>.pgm` and the sidecar `<stem>.json` {frame_id, timestamp, mm_per_px}.
void save_frame(const std::filesystem::path& pgm_path, const DepthFrame& frame);
DepthFrame load_frame(const std::filesystem::path& pgm_path);

std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path);

}  // namespace touchlab
