#include "ogs/render.hpp"

#include "render_detail.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ogs {

namespace {

using detail::SplatWork;

struct Contribution {
    std::uint32_t work_index;
    double gauss;   // exp(-m/2)
    double alpha;   // clamped effective opacity
    bool clamped;
    double transmittance;  // T before this splat
};

// d(rotation matrix)/d(quaternion component), unit-quaternion formula.
void rotmat_quat_jacobians(const Vec4& q, Mat3 dR[4]) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    dR[0] << 0, -z, y,
             z, 0, -x,
             -y, x, 0;
    dR[1] << 0, y, z,
             y, -2 * x, -w,
             z, w, -2 * x;
    dR[2] << -2 * y, x, w,
             x, 0, z,
             -w, z, -2 * y;
    dR[3] << -2 * z, -w, x,
             w, -2 * z, y,
             x, y, 0;
    for (int i = 0; i < 4; ++i) dR[i] *= 2.0;
}

void check_plane(const Image& img, int h, int w, int c, const char* name) {
    if (img.size() == 0) return;
    if (img.height != h || img.width != w || img.channels != c) {
        throw std::invalid_argument(std::string("rasterize_backward: upstream plane ") + name +
                                    " does not match the render target shape");
    }
}

}  // namespace

RenderGradients rasterize_backward(const GaussianScene& scene, const CameraPose& cam,
                                   const Intrinsics& intr, const RenderUpstream& upstream,
                                   const RenderOptions& opts) {
    intr.validate();
    const int H = intr.height, W = intr.width, K = scene.K;
    check_plane(upstream.d_color, H, W, 3, "d_color");
    check_plane(upstream.d_feature, H, W, K, "d_feature");
    check_plane(upstream.d_alpha, H, W, 1, "d_alpha");
    check_plane(upstream.d_depth, H, W, 1, "d_depth");
    const bool has_c = upstream.d_color.size() > 0;
    const bool has_f = upstream.d_feature.size() > 0;
    const bool has_a = upstream.d_alpha.size() > 0;
    const bool has_d = upstream.d_depth.size() > 0;

    RenderGradients grads(scene.size(), K);
    const auto work = detail::build_work(scene, cam, intr, opts);
    if (work.empty()) return grads;
    const auto grid = detail::bin_tiles(work, intr, opts);

    // Screen-space accumulators per visible splat.
    std::vector<Vec2> d_mean(work.size(), Vec2::Zero());
    std::vector<Mat2> d_cov(work.size(), Mat2::Zero());
    std::vector<double> d_z(work.size(), 0.0);
    std::vector<double> d_op(work.size(), 0.0);
    std::vector<Vec3> d_col(work.size(), Vec3::Zero());
    std::vector<VecX> d_lang(has_f ? work.size() : 0, VecX::Zero(K));

    const double cutoff = opts.support_sigma * opts.support_sigma;
    std::vector<Contribution> contribs;
    VecX suffix_f = VecX::Zero(K);
    VecX up_f = VecX::Zero(K);

    for (int py = 0; py < H; ++py) {
        for (int px = 0; px < W; ++px) {
            const auto& bin =
                grid.bins[static_cast<std::size_t>(py / grid.tile_size) * grid.tiles_x +
                          (px / grid.tile_size)];
            if (bin.empty()) continue;
            const std::size_t pix = static_cast<std::size_t>(py) * W + px;
            Vec3 up_c = Vec3::Zero();
            if (has_c) up_c = Vec3(&upstream.d_color.data[pix * 3]);
            if (has_f)
                up_f = Eigen::Map<const VecX>(&upstream.d_feature.data[pix * K], K);
            const double up_a = has_a ? upstream.d_alpha.data[pix] : 0.0;
            const double up_d = has_d ? upstream.d_depth.data[pix] : 0.0;
            if (!has_f && up_c.isZero(0) && up_a == 0.0 && up_d == 0.0) continue;

            // Replay the forward compositing for this pixel.
            contribs.clear();
            double T = 1.0;
            for (std::uint32_t li : bin) {
                const SplatWork& w = work[li];
                const double dx = px - w.mean2d.x();
                const double dy = py - w.mean2d.y();
                const double m = w.conic(0, 0) * dx * dx + 2.0 * w.conic(0, 1) * dx * dy +
                                 w.conic(1, 1) * dy * dy;
                if (m > cutoff) continue;
                const double g = std::exp(-0.5 * m);
                const double raw = w.opacity * g;
                const bool clamped = raw > opts.alpha_clamp;
                const double a = clamped ? opts.alpha_clamp : raw;
                contribs.push_back({li, g, a, clamped, T});
                T *= (1.0 - a);
                if (T < opts.stop_transmittance) break;
            }

            // Back-to-front: suffix sums of the contributions behind splat i.
            Vec3 suffix_c = Vec3::Zero();
            suffix_f.setZero();
            double suffix_d = 0.0, suffix_a = 0.0;
            for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
                const SplatWork& w = work[it->work_index];
                const GaussianPrimitive& g = scene.primitives[w.prim_index];
                const double Ti = it->transmittance;
                const double wgt = Ti * it->alpha;
                const double om = 1.0 - it->alpha;

                double dL_da = up_c.dot(g.color * Ti - suffix_c / om);
                if (has_f) dL_da += up_f.dot(g.lang * Ti - suffix_f / om);
                dL_da += up_d * (w.depth * Ti - suffix_d / om);
                dL_da += up_a * (Ti - suffix_a / om);

                d_col[it->work_index] += wgt * up_c;
                if (has_f) d_lang[it->work_index] += wgt * up_f;
                d_z[it->work_index] += wgt * up_d;

                if (!it->clamped) {
                    // a = opacity * G,  G = exp(-m/2),  m = d^T conic d
                    const double dL_dG = dL_da * w.opacity;
                    d_op[it->work_index] += dL_da * it->gauss;
                    const Vec2 d(px - w.mean2d.x(), py - w.mean2d.y());
                    const Vec2 cd = w.conic * d;
                    const double dL_dm = -0.5 * it->gauss * dL_dG;
                    d_mean[it->work_index] += -2.0 * dL_dm * cd;  // dm/dmean = -2*conic*d
                    // dL/dSigma_reg = -conic * (dL_dm * d d^T) * conic
                    d_cov[it->work_index] += -dL_dm * (cd * cd.transpose());
                }

                suffix_c += wgt * g.color;
                if (has_f) suffix_f += wgt * g.lang;
                suffix_d += wgt * w.depth;
                suffix_a += wgt;
            }
        }
    }

    // Chain each visible splat's screen-space gradients through the
    // projection into the primitive parameters.
    const Mat3 Wr = cam.rotation.transpose();
    for (std::size_t wi = 0; wi < work.size(); ++wi) {
        const SplatWork& w = work[wi];
        const std::size_t pi = w.prim_index;
        const GaussianPrimitive& g = scene.primitives[pi];

        grads.d_color[pi] += d_col[wi];
        if (has_f) grads.d_lang[pi] += d_lang[wi];
        grads.d_opacity[pi] += d_op[wi];

        const Vec3 xc = Wr * (g.mu - cam.translation);
        const double x = xc.x(), y = xc.y(), z = xc.z();
        Eigen::Matrix<double, 2, 3> J;
        J << intr.fx / z, 0, -intr.fx * x / (z * z),
             0, intr.fy / z, -intr.fy * y / (z * z);

        const double qn = g.rot.norm();
        const Vec4 qu = g.rot / qn;
        const Mat3 R = quat_to_rotmat(qu, 1e-3);
        const Vec3 s2 = g.scale.array().square();
        const Mat3 Sigma = R * s2.asDiagonal() * R.transpose();
        const Mat3 M = Wr * Sigma * Wr.transpose();

        const Mat2 G2 = 0.5 * (d_cov[wi] + d_cov[wi].transpose());

        // cov2d = J M J^T
        const Eigen::Matrix<double, 2, 3> dL_dJ = 2.0 * G2 * J * M;
        const Mat3 dL_dM = J.transpose() * G2 * J;

        Vec3 dL_dxc = J.transpose() * d_mean[wi];
        dL_dxc.z() += d_z[wi];
        const double z2 = z * z, z3 = z2 * z;
        dL_dxc.x() += dL_dJ(0, 2) * (-intr.fx / z2);
        dL_dxc.y() += dL_dJ(1, 2) * (-intr.fy / z2);
        dL_dxc.z() += dL_dJ(0, 0) * (-intr.fx / z2) + dL_dJ(0, 2) * (2.0 * intr.fx * x / z3) +
                      dL_dJ(1, 1) * (-intr.fy / z2) + dL_dJ(1, 2) * (2.0 * intr.fy * y / z3);
        grads.d_mu[pi] += Wr.transpose() * dL_dxc;

        const Mat3 H = Wr.transpose() * dL_dM * Wr;  // dL/dSigma, symmetric
        for (int k = 0; k < 3; ++k) {
            const Vec3 rk = R.col(k);
            grads.d_scale[pi][k] += 2.0 * g.scale[k] * rk.dot(H * rk);
        }
        const Mat3 dL_dR = 2.0 * H * R * s2.asDiagonal();
        Mat3 dRdq[4];
        rotmat_quat_jacobians(qu, dRdq);
        Vec4 dL_dqu;
        for (int k = 0; k < 4; ++k) dL_dqu[k] = dL_dR.cwiseProduct(dRdq[k]).sum();
        // Through the internal normalization q_hat = q / |q|.
        grads.d_rot[pi] += (dL_dqu - qu * qu.dot(dL_dqu)) / qn;
    }
    return grads;
}

}  // namespace ogs
