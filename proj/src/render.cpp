#include "ogs/render.hpp"

#include "render_detail.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ogs {

Image RenderTarget::renormalized_depth(double eps) const {
    Image out(depth.height, depth.width, 1);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double a = alpha.data[i];
        out.data[i] = a > eps ? depth.data[i] / a : 0.0;
    }
    return out;
}

RenderGradients::RenderGradients(std::size_t n, int K)
    : d_mu(n, Vec3::Zero()),
      d_rot(n, Vec4::Zero()),
      d_scale(n, Vec3::Zero()),
      d_opacity(n, 0.0),
      d_color(n, Vec3::Zero()),
      d_lang(n, VecX::Zero(K)) {}

std::optional<ProjectedGaussian> project_gaussian(const GaussianPrimitive& g,
                                                  const CameraPose& cam,
                                                  const Intrinsics& intr,
                                                  const RenderOptions& opts) {
    const Mat3 W = cam.rotation.transpose();  // world -> camera
    const Vec3 xc = W * (g.mu - cam.translation);
    if (xc.z() <= opts.near_plane) return std::nullopt;

    const double x = xc.x(), y = xc.y(), z = xc.z();
    ProjectedGaussian p;
    p.depth = z;
    p.base_opacity = g.opacity;
    p.mean2d = Vec2(intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy);

    Eigen::Matrix<double, 2, 3> J;
    J << intr.fx / z, 0, -intr.fx * x / (z * z),
         0, intr.fy / z, -intr.fy * y / (z * z);
    const Mat3 Sigma = covariance_from_rs(quat_normalized(g.rot), g.scale);
    p.cov2d = J * (W * Sigma * W.transpose()) * J.transpose();

    // Support AABB from the regularized footprint; the box of the s-sigma
    // ellipse is exactly +- s*sqrt(diag).
    const double reg = opts.cov_regularization;
    const double rx = opts.support_sigma * std::sqrt(p.cov2d(0, 0) + reg);
    const double ry = opts.support_sigma * std::sqrt(p.cov2d(1, 1) + reg);
    if (p.mean2d.x() + rx < 0 || p.mean2d.x() - rx > intr.width - 1 ||
        p.mean2d.y() + ry < 0 || p.mean2d.y() - ry > intr.height - 1) {
        return std::nullopt;
    }
    return p;
}

namespace detail {

std::vector<SplatWork> build_work(const GaussianScene& scene, const CameraPose& cam,
                                  const Intrinsics& intr, const RenderOptions& opts) {
    intr.validate();
    std::vector<SplatWork> work;
    work.reserve(scene.primitives.size());
    const double reg = opts.cov_regularization;
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        auto proj = project_gaussian(scene.primitives[i], cam, intr, opts);
        if (!proj) continue;
        SplatWork w;
        w.prim_index = i;
        w.mean2d = proj->mean2d;
        w.cov2d = proj->cov2d;
        Mat2 C = proj->cov2d;
        C(0, 0) += reg;
        C(1, 1) += reg;
        const double det = C(0, 0) * C(1, 1) - C(0, 1) * C(1, 0);
        w.conic << C(1, 1) / det, -C(0, 1) / det, -C(1, 0) / det, C(0, 0) / det;
        w.depth = proj->depth;
        w.opacity = proj->base_opacity;
        w.rx = opts.support_sigma * std::sqrt(C(0, 0));
        w.ry = opts.support_sigma * std::sqrt(C(1, 1));
        work.push_back(w);
    }
    std::sort(work.begin(), work.end(), [](const SplatWork& a, const SplatWork& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.prim_index < b.prim_index;
    });
    return work;
}

TileGrid bin_tiles(const std::vector<SplatWork>& work, const Intrinsics& intr,
                   const RenderOptions& opts) {
    TileGrid grid;
    grid.tile_size = opts.tile_size;
    grid.tiles_x = (intr.width + opts.tile_size - 1) / opts.tile_size;
    grid.tiles_y = (intr.height + opts.tile_size - 1) / opts.tile_size;
    grid.bins.resize(static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y);
    const double ts = opts.tile_size;
    for (std::uint32_t wi = 0; wi < work.size(); ++wi) {
        const SplatWork& w = work[wi];
        int tx0 = std::max(0, static_cast<int>(std::floor((w.mean2d.x() - w.rx) / ts)));
        int tx1 = std::min(grid.tiles_x - 1, static_cast<int>(std::floor((w.mean2d.x() + w.rx) / ts)));
        int ty0 = std::max(0, static_cast<int>(std::floor((w.mean2d.y() - w.ry) / ts)));
        int ty1 = std::min(grid.tiles_y - 1, static_cast<int>(std::floor((w.mean2d.y() + w.ry) / ts)));
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                grid.bins[static_cast<std::size_t>(ty) * grid.tiles_x + tx].push_back(wi);
    }
    return grid;
}

namespace {

// Front-to-back compositing of one pixel over a depth-ordered splat list.
// Identical arithmetic is used by the tiled path and the oracle; the oracle
// passes stop = 0.
template <typename Indexable>
void composite_pixel(int px, int py, const Indexable& list, std::size_t count,
                     const std::vector<SplatWork>& work, const GaussianScene& scene,
                     const RenderOptions& opts, double stop, RenderTarget& out) {
    const double cutoff = opts.support_sigma * opts.support_sigma;
    double T = 1.0;
    const int K = scene.K;
    const std::size_t pix = static_cast<std::size_t>(py) * out.color.width + px;
    double* c_out = &out.color.data[pix * 3];
    double* f_out = opts.with_feature ? &out.feature.data[pix * K] : nullptr;
    for (std::size_t k = 0; k < count; ++k) {
        const SplatWork& w = work[list[k]];
        const double dx = px - w.mean2d.x();
        const double dy = py - w.mean2d.y();
        const double m = w.conic(0, 0) * dx * dx + 2.0 * w.conic(0, 1) * dx * dy +
                         w.conic(1, 1) * dy * dy;
        if (m > cutoff) continue;
        const double a = std::min(w.opacity * std::exp(-0.5 * m), opts.alpha_clamp);
        const double wgt = T * a;
        const GaussianPrimitive& g = scene.primitives[w.prim_index];
        c_out[0] += wgt * g.color[0];
        c_out[1] += wgt * g.color[1];
        c_out[2] += wgt * g.color[2];
        if (f_out) {
            for (int j = 0; j < K; ++j) f_out[j] += wgt * g.lang[j];
        }
        out.depth.data[pix] += wgt * w.depth;
        out.alpha.data[pix] += wgt;
        T *= (1.0 - a);
        if (T < stop) break;
    }
}

struct IdentityList {
    std::size_t operator[](std::size_t i) const { return i; }
};

}  // namespace
}  // namespace detail

RenderTarget rasterize(const GaussianScene& scene, const CameraPose& cam,
                       const Intrinsics& intr, const RenderOptions& opts) {
    intr.validate();
    RenderTarget out(intr.height, intr.width, scene.K);
    const auto work = detail::build_work(scene, cam, intr, opts);
    if (work.empty()) return out;
    const auto grid = detail::bin_tiles(work, intr, opts);
    for (int ty = 0; ty < grid.tiles_y; ++ty) {
        for (int tx = 0; tx < grid.tiles_x; ++tx) {
            const auto& bin = grid.bins[static_cast<std::size_t>(ty) * grid.tiles_x + tx];
            if (bin.empty()) continue;
            const int x0 = tx * grid.tile_size, x1 = std::min(intr.width, x0 + grid.tile_size);
            const int y0 = ty * grid.tile_size, y1 = std::min(intr.height, y0 + grid.tile_size);
            for (int py = y0; py < y1; ++py)
                for (int px = x0; px < x1; ++px)
                    detail::composite_pixel(px, py, bin, bin.size(), work, scene, opts,
                                            opts.stop_transmittance, out);
        }
    }
    return out;
}

RenderTarget brute_force_render(const GaussianScene& scene, const CameraPose& cam,
                                const Intrinsics& intr, const RenderOptions& opts) {
    intr.validate();
    RenderTarget out(intr.height, intr.width, scene.K);
    const auto work = detail::build_work(scene, cam, intr, opts);
    if (work.empty()) return out;
    for (int py = 0; py < intr.height; ++py)
        for (int px = 0; px < intr.width; ++px)
            detail::composite_pixel(px, py, detail::IdentityList{}, work.size(), work, scene,
                                    opts, 0.0, out);
    return out;
}

}  // namespace ogs
