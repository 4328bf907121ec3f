#pragma once

#include "ogs/core.hpp"
#include "ogs/image.hpp"

#include <optional>
#include <vector>

namespace ogs {

/// Per-pixel output buffers of one render: color C(v), language feature L(v),
/// alpha-blended expected depth (not renormalized) and accumulated opacity.
struct RenderTarget {
    Image color;    // H x W x 3, in [0,1]
    Image feature;  // H x W x K
    Image depth;    // H x W x 1
    Image alpha;    // H x W x 1, in [0,1]

    RenderTarget() = default;
    RenderTarget(int h, int w, int K)
        : color(h, w, 3), feature(h, w, K), depth(h, w, 1), alpha(h, w, 1) {}

    /// Expected depth renormalized by accumulated alpha (0 where alpha ~ 0).
    Image renormalized_depth(double eps = 1e-12) const;
};

/// Screen-space footprint of one projected Gaussian. cov2d is the raw
/// EWA projection J W Sigma W^T J^T; the 0.3*I low-pass is added at
/// evaluation time (see RenderOptions::cov_regularization).
struct ProjectedGaussian {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    double depth = 0;         // camera-frame z
    double base_opacity = 0;
};

struct RenderOptions {
    double near_plane = 0.01;
    double cov_regularization = 0.3;  // pixels^2, added to cov2d before inversion
    double alpha_clamp = 0.999;
    // Front-to-back compositing stops once transmittance drops below this.
    // The residual error of a render is bounded by the threshold itself;
    // 0 disables the stop and makes rasterize bitwise-equal to the oracle.
    double stop_transmittance = 1e-7;
    double support_sigma = 3.0;  // per-pixel support cutoff, in sigmas
    int tile_size = 16;
    bool with_feature = true;   // language-feature plane can be skipped for speed
};

/// Per-primitive partials of a scalar loss. Culled primitives carry
/// exactly-zero rows.
struct RenderGradients {
    std::vector<Vec3> d_mu;
    std::vector<Vec4> d_rot;
    std::vector<Vec3> d_scale;
    std::vector<double> d_opacity;
    std::vector<Vec3> d_color;
    std::vector<VecX> d_lang;

    explicit RenderGradients(std::size_t n = 0, int K = 0);
};

/// Per-pixel upstream partials of the loss w.r.t. the render target.
/// Any plane may be empty (treated as zero).
struct RenderUpstream {
    Image d_color;    // H x W x 3
    Image d_feature;  // H x W x K
    Image d_alpha;    // H x W x 1
    Image d_depth;    // H x W x 1
};

/// EWA projection of one primitive. Returns nullopt when culled: camera-frame
/// z <= near plane, or the 3-sigma ellipse misses the viewport.
std::optional<ProjectedGaussian> project_gaussian(const GaussianPrimitive& g,
                                                  const CameraPose& cam,
                                                  const Intrinsics& intr,
                                                  const RenderOptions& opts = {});

/// Tile-based forward rasterization of the joint color/feature blending.
RenderTarget rasterize(const GaussianScene& scene, const CameraPose& cam,
                       const Intrinsics& intr, const RenderOptions& opts = {});

/// Test oracle: per-pixel evaluation over all primitives with a global depth
/// sort, no tiling and no transmittance cutoff. Same projection, support and
/// clamping rules as rasterize.
RenderTarget brute_force_render(const GaussianScene& scene, const CameraPose& cam,
                                const Intrinsics& intr, const RenderOptions& opts = {});

/// Analytic backward pass of the compositing chain, through effective opacity
/// into opacity/cov2d/mean2d and through the projection into mu/rot/scale.
RenderGradients rasterize_backward(const GaussianScene& scene, const CameraPose& cam,
                                   const Intrinsics& intr, const RenderUpstream& upstream,
                                   const RenderOptions& opts = {});

}  // namespace ogs
