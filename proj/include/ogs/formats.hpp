#pragma once

#include "ogs/core.hpp"
#include "ogs/eval.hpp"
#include "ogs/image.hpp"

#include <filesystem>
#include <string>

namespace ogs {

/// IO failure (missing file, parse error, truncated payload). CLI maps this
/// family to exit code 2.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Scene container "OGS v1": 16-byte magic+version, u32 K, u64 count, then per
// primitive little-endian f32 fields mu(3) rot(4) scale(3) opacity(1)
// color(3) lang(K) confidence(1). Byte layout documented in README.md;
// write -> read -> write is bit-exact.

void write_scene(const std::filesystem::path& path, const GaussianScene& scene);
GaussianScene read_scene(const std::filesystem::path& path, double voxel_size = 0.05);

// ---------------------------------------------------------------------------
// Images. PPM P6 / PGM P5, maxval 255, row-major. Values are clamped to
// [0,1] and quantized round-to-nearest.

void write_ppm(const std::filesystem::path& path, const Image& rgb);
Image read_ppm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& gray);
Image read_pgm(const std::filesystem::path& path);

/// Convenience PNG export (8-bit RGB or grayscale); not used by golden tests.
void write_png(const std::filesystem::path& path, const Image& img);

// ---------------------------------------------------------------------------
// Raw feature planes: text header "OGSF1 H W K\n" followed by H*W*K
// little-endian f32, pixel-major (all K values of a pixel contiguous).

void write_feature_planes(const std::filesystem::path& path, const Image& feature);
Image read_feature_planes(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// TUM trajectories: one line per frame, "index tx ty tz qx qy qz qw".

void write_tum(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_tum(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// Shortest decimal form that round-trips a double exactly.
std::string format_double(double v);

}  // namespace ogs
