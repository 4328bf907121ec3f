#pragma once

#include "ogs/render.hpp"

#include <cstddef>
#include <vector>

namespace ogs::detail {

// One visible (non-culled) splat prepared for compositing. `conic` is the
// inverse of the regularized 2D covariance.
struct SplatWork {
    std::size_t prim_index;
    Vec2 mean2d;
    Mat2 cov2d;   // raw EWA covariance
    Mat2 conic;
    double depth;
    double opacity;
    double rx, ry;  // half-extents of the support AABB, pixels
};

// Projects every primitive, drops culled ones and sorts front-to-back by
// (depth, primitive index).
std::vector<SplatWork> build_work(const GaussianScene& scene, const CameraPose& cam,
                                  const Intrinsics& intr, const RenderOptions& opts);

struct TileGrid {
    int tiles_x = 0, tiles_y = 0, tile_size = 16;
    // Per tile: indices into the sorted work vector, depth order preserved.
    std::vector<std::vector<std::uint32_t>> bins;
};

TileGrid bin_tiles(const std::vector<SplatWork>& work, const Intrinsics& intr,
                   const RenderOptions& opts);

}  // namespace ogs::detail
