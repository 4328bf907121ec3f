#include "ogs/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ogs {

void LossWeights::validate() const {
    if (lambda_aux < 0 || lambda1 < 0 || lambda2 < 0 || lambda3 < 0) {
        throw std::invalid_argument("LossWeights: weights must be nonnegative");
    }
}

double loss_pose(const CameraPose& pred, const CameraPose& gt) {
    const Vec4 qg = rotmat_to_quat(gt.rotation);  // canonical w >= 0
    Vec4 qp = rotmat_to_quat(pred.rotation);
    if (qp.dot(qg) < 0) qp = -qp;  // double cover: sign-align to gt
    return (qp - qg).squaredNorm() + (pred.translation - gt.translation).squaredNorm();
}

double loss_mse(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("loss_mse: shape mismatch");
    if (a.size() == 0) throw std::invalid_argument("loss_mse: empty images");
    double s = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.data.size());
}

double loss_render(const RenderTarget& rendered, const Image& gt_image) {
    return loss_mse(rendered.color, gt_image);
}

double loss_lang(const Image& rendered_feature, const Image& gt_feature) {
    if (!rendered_feature.same_shape(gt_feature)) {
        throw std::invalid_argument("loss_lang: shape mismatch");
    }
    const int K = gt_feature.channels;
    double sum = 0;
    std::size_t used = 0;
    for (int y = 0; y < gt_feature.height; ++y) {
        for (int x = 0; x < gt_feature.width; ++x) {
            double gn2 = 0, rn2 = 0, dot = 0;
            for (int c = 0; c < K; ++c) {
                const double g = gt_feature.at(y, x, c);
                const double r = rendered_feature.at(y, x, c);
                gn2 += g * g;
                rn2 += r * r;
                dot += r * g;
            }
            if (std::sqrt(gn2) < 1e-8) continue;  // masked gt pixel
            ++used;
            if (rn2 < 1e-24) continue;  // empty render contributes zero
            sum += -dot / std::sqrt(rn2 * gn2);
        }
    }
    if (used == 0) throw std::invalid_argument("loss_lang: every gt pixel is masked");
    return sum / static_cast<double>(used);
}

double loss_stage(const StageLosses& t, const LossWeights& w) {
    return w.lambda1 * t.pose + w.lambda2 * t.render + w.lambda3 * t.lang;
}

double loss_total(const StageLosses& global_terms, const StageLosses& relative_terms,
                  const LossWeights& w) {
    return loss_stage(global_terms, w) + w.lambda_aux * loss_stage(relative_terms, w);
}

RenderObjective mse_objective(const Image& gt_image) {
    RenderObjective obj;
    obj.value = [gt_image](const RenderTarget& rt) { return loss_mse(rt.color, gt_image); };
    obj.upstream = [gt_image](const RenderTarget& rt) {
        RenderUpstream up;
        up.d_color = Image(gt_image.height, gt_image.width, 3);
        const double n = static_cast<double>(gt_image.data.size());
        for (std::size_t i = 0; i < gt_image.data.size(); ++i) {
            up.d_color.data[i] = 2.0 * (rt.color.data[i] - gt_image.data[i]) / n;
        }
        return up;
    };
    return obj;
}

RenderObjective lang_cosine_objective(const Image& gt_feature) {
    RenderObjective obj;
    obj.value = [gt_feature](const RenderTarget& rt) { return loss_lang(rt.feature, gt_feature); };
    obj.upstream = [gt_feature](const RenderTarget& rt) {
        const int K = gt_feature.channels;
        RenderUpstream up;
        up.d_feature = Image(gt_feature.height, gt_feature.width, K);
        // count unmasked pixels first (the mean's denominator)
        std::size_t used = 0;
        for (int y = 0; y < gt_feature.height; ++y)
            for (int x = 0; x < gt_feature.width; ++x) {
                double gn2 = 0;
                for (int c = 0; c < K; ++c) gn2 += gt_feature.at(y, x, c) * gt_feature.at(y, x, c);
                if (std::sqrt(gn2) >= 1e-8) ++used;
            }
        if (used == 0) throw std::invalid_argument("lang_cosine_objective: all gt pixels masked");
        for (int y = 0; y < gt_feature.height; ++y) {
            for (int x = 0; x < gt_feature.width; ++x) {
                double gn2 = 0, rn2 = 0, dot = 0;
                for (int c = 0; c < K; ++c) {
                    const double g = gt_feature.at(y, x, c);
                    const double r = rt.feature.at(y, x, c);
                    gn2 += g * g;
                    rn2 += r * r;
                    dot += r * g;
                }
                const double gn = std::sqrt(gn2);
                if (gn < 1e-8 || rn2 < 1e-24) continue;
                const double rn = std::sqrt(rn2);
                const double cos = dot / (rn * gn);
                for (int c = 0; c < K; ++c) {
                    const double g = gt_feature.at(y, x, c);
                    const double r = rt.feature.at(y, x, c);
                    // d(-cos)/dr = -(g/(|r||g|) - cos * r/|r|^2)
                    up.d_feature.at(y, x, c) =
                        -(g / (rn * gn) - cos * r / rn2) / static_cast<double>(used);
                }
            }
        }
        return up;
    };
    return obj;
}

RenderObjective combine_objectives(std::vector<std::pair<double, RenderObjective>> parts) {
    RenderObjective obj;
    obj.value = [parts](const RenderTarget& rt) {
        double s = 0;
        for (const auto& [w, o] : parts) s += w * o.value(rt);
        return s;
    };
    obj.upstream = [parts](const RenderTarget& rt) {
        RenderUpstream acc;
        auto add_plane = [](Image& dst, const Image& src, double w) {
            if (src.size() == 0) return;
            if (dst.size() == 0) {
                dst = Image(src.height, src.width, src.channels);
            }
            for (std::size_t i = 0; i < src.data.size(); ++i) dst.data[i] += w * src.data[i];
        };
        for (const auto& [w, o] : parts) {
            const RenderUpstream up = o.upstream(rt);
            add_plane(acc.d_color, up.d_color, w);
            add_plane(acc.d_feature, up.d_feature, w);
            add_plane(acc.d_alpha, up.d_alpha, w);
            add_plane(acc.d_depth, up.d_depth, w);
        }
        return acc;
    };
    return obj;
}

// --- optimize_scene -----------------------------------------------------------

namespace {

// Fixed relative step sizes per parameter group (positions and shape
// parameters need smaller moves than appearance).
struct GroupScales {
    double mu = 0.1;
    double rot = 0.3;
    double scale = 0.3;
    double opacity = 5.0;
    double color = 1.0;
    double lang = 1.0;
};

struct SceneGradients {
    RenderGradients g;
    explicit SceneGradients(std::size_t n, int K) : g(n, K) {}

    void accumulate(const RenderGradients& other, double w) {
        for (std::size_t i = 0; i < g.d_mu.size(); ++i) {
            g.d_mu[i] += w * other.d_mu[i];
            g.d_rot[i] += w * other.d_rot[i];
            g.d_scale[i] += w * other.d_scale[i];
            g.d_opacity[i] += w * other.d_opacity[i];
            g.d_color[i] += w * other.d_color[i];
            g.d_lang[i] += w * other.d_lang[i];
        }
    }
};

double scene_loss(const GaussianScene& scene, const std::vector<OptimizeView>& views,
                  const OptimizeOptions& opts) {
    double total = 0;
    for (const auto& v : views) {
        RenderOptions ro = opts.render;
        ro.with_feature = v.feature.has_value();
        const RenderTarget rt = rasterize(scene, v.camera, v.intrinsics, ro);
        total += opts.lambda2 * loss_mse(rt.color, v.image);
        if (v.feature) total += opts.lambda3 * loss_lang(rt.feature, *v.feature);
    }
    return total / static_cast<double>(views.size());
}

void apply_step(GaussianScene& scene, const RenderGradients& g, double lr,
                const GroupScales& s) {
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        auto& p = scene.primitives[i];
        p.mu -= lr * s.mu * g.d_mu[i];
        p.rot -= lr * s.rot * g.d_rot[i];
        p.scale -= lr * s.scale * g.d_scale[i];
        p.opacity -= lr * s.opacity * g.d_opacity[i];
        p.color -= lr * s.color * g.d_color[i];
        p.lang -= lr * s.lang * g.d_lang[i];

        // project back onto the valid domain
        const double qn = p.rot.norm();
        p.rot = qn > 1e-12 ? Vec4(p.rot / qn) : Vec4(1, 0, 0, 0);
        if (p.rot[0] < 0) p.rot = -p.rot;
        p.scale = p.scale.cwiseMax(1e-6);
        p.opacity = std::clamp(p.opacity, 0.0, 1.0);
        p.color = p.color.cwiseMax(0.0).cwiseMin(1.0);
    }
    scene.rebuild_index();
}

}  // namespace

OptimizeResult optimize_scene(GaussianScene& scene, const std::vector<OptimizeView>& views,
                              const OptimizeOptions& opts) {
    if (views.empty()) throw std::invalid_argument("optimize_scene: needs at least one view");
    if (scene.empty()) throw std::invalid_argument("optimize_scene: empty scene");

    const GroupScales scales;
    OptimizeResult result;
    double lr = opts.lr;
    double current = scene_loss(scene, views, opts);
    if (!std::isfinite(current)) throw std::runtime_error("optimize_scene: initial loss is not finite");
    result.loss_curve.push_back(current);

    const double view_w = 1.0 / static_cast<double>(views.size());
    for (int step = 0; step < opts.steps; ++step) {
        SceneGradients grads(scene.size(), scene.K);
        for (const auto& v : views) {
            RenderOptions ro = opts.render;
            ro.with_feature = v.feature.has_value();
            const RenderTarget rt = rasterize(scene, v.camera, v.intrinsics, ro);
            std::vector<std::pair<double, RenderObjective>> parts;
            parts.emplace_back(opts.lambda2, mse_objective(v.image));
            if (v.feature) parts.emplace_back(opts.lambda3, lang_cosine_objective(*v.feature));
            const RenderUpstream up = combine_objectives(std::move(parts)).upstream(rt);
            grads.accumulate(rasterize_backward(scene, v.camera, v.intrinsics, up, ro), view_w);
        }

        // backtracking line search: accept the first non-increasing step
        bool accepted = false;
        lr *= 2.0;  // optimistic growth, halved below as needed
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            GaussianScene candidate = scene;
            apply_step(candidate, grads.g, lr, scales);
            const double cand_loss = scene_loss(candidate, views, opts);
            if (std::isnan(cand_loss)) {
                throw std::runtime_error("optimize_scene: diverged (loss is NaN) at step " +
                                         std::to_string(step));
            }
            if (cand_loss <= current) {
                scene = std::move(candidate);
                current = cand_loss;
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if (!accepted) {
            result.converged = true;
            break;
        }
        result.loss_curve.push_back(current);
        result.steps_taken = step + 1;
    }
    return result;
}

// --- finite differences ---------------------------------------------------------

double FiniteDiffReport::worst_rel() const {
    double m = 0;
    for (const auto& [k, v] : max_rel) m = std::max(m, v);
    return m;
}

double FiniteDiffReport::worst_abs_small() const {
    double m = 0;
    for (const auto& [k, v] : max_abs_small) m = std::max(m, v);
    return m;
}

FiniteDiffReport finite_diff_check(const GaussianScene& scene, const CameraPose& camera,
                                   const Intrinsics& intrinsics, const RenderObjective& objective,
                                   double h, const RenderOptions& render_opts) {
    if (!(h > 0)) throw std::invalid_argument("finite_diff_check: h must be positive");

    const RenderTarget rt = rasterize(scene, camera, intrinsics, render_opts);
    const RenderUpstream up = objective.upstream(rt);
    const RenderGradients grads =
        rasterize_backward(scene, camera, intrinsics, up, render_opts);

    GaussianScene probe = scene;
    FiniteDiffReport rep;
    auto record = [&rep](const std::string& group, double analytic, double fd) {
        const double err = std::abs(fd - analytic);
        if (std::abs(analytic) < 1e-2) {
            auto& slot = rep.max_abs_small[group];
            slot = std::max(slot, err);
        } else {
            auto& slot = rep.max_rel[group];
            slot = std::max(slot, err / std::abs(analytic));
        }
    };
    auto fd_eval = [&](double* slot) {
        const double saved = *slot;
        *slot = saved + h;
        const double lp = objective.value(rasterize(probe, camera, intrinsics, render_opts));
        *slot = saved - h;
        const double lm = objective.value(rasterize(probe, camera, intrinsics, render_opts));
        *slot = saved;
        return (lp - lm) / (2 * h);
    };

    for (std::size_t i = 0; i < probe.primitives.size(); ++i) {
        auto& g = probe.primitives[i];
        for (int k = 0; k < 3; ++k) record("mu", grads.d_mu[i][k], fd_eval(&g.mu[k]));
        for (int k = 0; k < 4; ++k) record("rot", grads.d_rot[i][k], fd_eval(&g.rot[k]));
        for (int k = 0; k < 3; ++k) record("scale", grads.d_scale[i][k], fd_eval(&g.scale[k]));
        record("opacity", grads.d_opacity[i], fd_eval(&g.opacity));
        for (int k = 0; k < 3; ++k) record("color", grads.d_color[i][k], fd_eval(&g.color[k]));
        for (int k = 0; k < g.lang.size(); ++k) record("lang", grads.d_lang[i][k], fd_eval(&g.lang[k]));
    }
    return rep;
}

}  // namespace ogs
