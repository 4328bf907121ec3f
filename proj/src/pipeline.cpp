#include "ogs/pipeline.hpp"

#include <chrono>
#include <stdexcept>

namespace ogs {

std::size_t PipelineState::allocation_bytes() const {
    return sizeof(PipelineState) +
           static_cast<std::size_t>(anchor.tokens.size()) * sizeof(double) +
           static_cast<std::size_t>(prev_tokens.tokens.size()) * sizeof(double) +
           prev_image.data.size() * sizeof(double);
}

RelativeStageOut relative_stage(const Network& net, const Image& frame,
                                const TokenGrid& prev_tokens) {
    if (prev_tokens.tokens.size() == 0) {
        throw std::invalid_argument("relative_stage: no cached previous frame (t must be >= 2)");
    }
    RelativeStageOut out;
    out.f_t = encode_image(net, frame);
    out.dual = dual_decode(net, out.f_t, prev_tokens);

    out.outputs.centers_cur = head_pos(net.head_rel_pos, out.dual.f_cur, out.dual.f_prev, net.cfg);
    out.outputs.attrs_cur = head_gs(net.head_rel_gs, out.dual.f_cur, out.dual.f_prev, net.cfg);
    out.outputs.centers_prev = head_pos(net.head_rel_pos, out.dual.f_prev, out.dual.f_cur, net.cfg);
    out.outputs.attrs_prev = head_gs(net.head_rel_gs, out.dual.f_prev, out.dual.f_cur, net.cfg);
    out.outputs.pose = head_pose(net.head_rel_pose, out.dual.pose_cur);
    return out;
}

GlobalOutputs global_stage(const Network& net, const TokenGrid& f_r, const PoseToken& pose_g) {
    GlobalOutputs out;
    out.centers = head_pos_conditioned(net.head_glob_pos, net.head_glob_pos_cond, f_r, pose_g,
                                       net.cfg);
    out.attrs = head_gs_conditioned(net.head_glob_gs, net.head_glob_gs_cond, f_r, pose_g, net.cfg);
    out.pose = head_pose(net.head_glob_pose, pose_g.vec).pose;
    return out;
}

std::vector<GaussianPrimitive> assemble_gaussians(const CenterMaps& centers,
                                                  const AttributeMaps& attrs) {
    const int H = centers.centers.height, W = centers.centers.width;
    const int K = attrs.lang.channels;
    std::vector<GaussianPrimitive> out;
    out.reserve(static_cast<std::size_t>(H) * W);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            GaussianPrimitive g;
            for (int c = 0; c < 3; ++c) g.mu[c] = centers.centers.at(y, x, c);
            for (int c = 0; c < 4; ++c) g.rot[c] = attrs.rot.at(y, x, c);
            for (int c = 0; c < 3; ++c) g.scale[c] = attrs.scale.at(y, x, c);
            g.opacity = attrs.opacity.at(y, x, 0);
            for (int c = 0; c < 3; ++c) g.color[c] = attrs.color.at(y, x, c);
            g.lang = VecX(K);
            for (int c = 0; c < K; ++c) g.lang[c] = attrs.lang.at(y, x, c);
            g.confidence = centers.confidence.at(y, x, 0);
            out.push_back(std::move(g));
        }
    }
    return out;
}

StepOutputs pipeline_step(const Network& net, const Image& frame, PipelineState& state,
                          GaussianScene& scene) {
    if (scene.K != net.cfg.lang_dim) {
        throw std::invalid_argument("pipeline_step: scene K does not match the network");
    }
    StepOutputs out;
    TokenGrid f_t;

    if (state.frame_index == 0) {
        // First frame: no relative information exists yet. The global heads
        // run on the encoder tokens with the stored initial pose embedding;
        // the global pose is the identity by construction and the anchor
        // state starts from its learnable tokens.
        f_t = encode_image(net, frame);
        state.anchor.tokens = net.anchor_init;
        const PoseToken p_g{net.pose_g_init};
        out.frame.global = global_stage(net, f_t, p_g);
        out.frame.global.pose = CameraPose::identity();
    } else {
        RelativeStageOut rel = relative_stage(net, frame, state.prev_tokens);
        const VecX f_bar = mean_pool(rel.f_t);
        const VecX fr_bar = mean_pool(rel.dual.f_cur);
        const AnchorUpdateOut upd =
            anchor_update(net, f_bar, fr_bar, rel.dual.pose_cur, state.anchor);
        out.frame.global = global_stage(net, rel.dual.f_cur, upd.pose_g);
        out.frame.relative = std::move(rel.outputs);
        state.anchor = upd.state;
        f_t = std::move(rel.f_t);
    }

    out.frame.gaussians_global = assemble_gaussians(out.frame.global.centers, out.frame.global.attrs);
    out.fusion = integrate_frame(scene, out.frame.gaussians_global, net.fusion_mlp);

    state.prev_tokens = std::move(f_t);
    state.prev_image = frame;
    state.frame_index += 1;
    return out;
}

StreamResult run_stream(const Network& net, const std::vector<Image>& frames, double voxel_size) {
    if (frames.empty()) throw std::invalid_argument("run_stream: empty stream");

    StreamResult result;
    result.scene = GaussianScene(net.cfg.lang_dim, voxel_size);
    PipelineState state;

    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto start = std::chrono::steady_clock::now();
        const StepOutputs step = pipeline_step(net, frames[t], state, result.scene);
        const auto stop = std::chrono::steady_clock::now();

        result.trajectory.push_back(static_cast<int>(t) + 1, step.frame.global.pose);

        FrameReport rep;
        rep.frame = static_cast<int>(t) + 1;
        rep.new_primitives = step.fusion.incoming;
        rep.merged = step.fusion.merged;
        rep.absorbed = step.fusion.absorbed;
        rep.scene_primitives = result.scene.size();
        rep.state_bytes = state.allocation_bytes();
        rep.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
        result.reports.push_back(rep);
    }
    return result;
}

}  // namespace ogs
