#pragma once

#include "ogs/core.hpp"
#include "ogs/image.hpp"
#include "ogs/render.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ogs {

/// Objective weights: total = global + lambda_aux * relative, each stage
/// being lambda1*pose + lambda2*render + lambda3*lang.
struct LossWeights {
    double lambda_aux = 0.8;
    double lambda1 = 1.0;  // pose
    double lambda2 = 1.0;  // render
    double lambda3 = 0.5;  // lang

    void validate() const;  // all weights nonnegative
};

/// Squared L2 over quaternion (double-cover aligned to gt) plus translation.
double loss_pose(const CameraPose& pred, const CameraPose& gt);

/// Mean squared error over color channels and pixels.
double loss_render(const RenderTarget& rendered, const Image& gt_image);
double loss_mse(const Image& a, const Image& b);

/// Mean of negative cosine similarity over pixels whose gt feature norm is
/// >= 1e-8. Throws when every pixel is masked.
double loss_lang(const Image& rendered_feature, const Image& gt_feature);

struct StageLosses {
    double pose = 0, render = 0, lang = 0;
};

double loss_stage(const StageLosses& terms, const LossWeights& w);
double loss_total(const StageLosses& global_terms, const StageLosses& relative_terms,
                  const LossWeights& w);

// --- differentiable-through-the-renderer objectives --------------------------

/// A scalar objective of one render together with its per-pixel partials.
struct RenderObjective {
    std::function<double(const RenderTarget&)> value;
    std::function<RenderUpstream(const RenderTarget&)> upstream;
};

RenderObjective mse_objective(const Image& gt_image);
RenderObjective lang_cosine_objective(const Image& gt_feature);

/// weighted sum of objectives
RenderObjective combine_objectives(std::vector<std::pair<double, RenderObjective>> parts);

// --- direct per-scene optimization --------------------------------------------

struct OptimizeView {
    CameraPose camera;
    Intrinsics intrinsics;
    Image image;                   // H x W x 3 target
    std::optional<Image> feature;  // optional H x W x K target
};

/// Which parameter groups a run is allowed to move.
struct OptimizeGroupMask {
    bool mu = true, rot = true, scale = true, opacity = true, color = true, lang = true;
};

struct OptimizeOptions {
    int steps = 200;
    double lr = 1.0;           // global step scale, adapted by backtracking
    double lambda2 = 1.0;      // render term weight
    double lambda3 = 0.5;      // lang term weight (used when features present)
    int max_backtracks = 40;
    OptimizeGroupMask groups;
    RenderOptions render;
};

struct OptimizeResult {
    std::vector<double> loss_curve;  // loss after step i (front: initial loss)
    int steps_taken = 0;
    bool converged = false;  // stopped early because no step improved
};

/// Backtracking gradient descent on all Gaussian parameters against
/// lambda2*MSE (+ lambda3*lang when features are supplied), averaged over
/// views. Quaternions are renormalized and opacities/colors clamped after
/// every step; the recorded loss curve is non-increasing. Throws on NaN loss.
OptimizeResult optimize_scene(GaussianScene& scene, const std::vector<OptimizeView>& views,
                              const OptimizeOptions& opts);

// --- finite-difference harness -------------------------------------------------

struct FiniteDiffReport {
    // per parameter group: worst relative error among gradients with
    // magnitude >= 1e-2, worst absolute error among the smaller ones
    std::map<std::string, double> max_rel;
    std::map<std::string, double> max_abs_small;

    double worst_rel() const;
    double worst_abs_small() const;
};

/// Central differences per scalar parameter against the analytic backward
/// pass, for an arbitrary render objective.
FiniteDiffReport finite_diff_check(const GaussianScene& scene, const CameraPose& camera,
                                   const Intrinsics& intrinsics, const RenderObjective& objective,
                                   double h, const RenderOptions& render_opts = {});

}  // namespace ogs
