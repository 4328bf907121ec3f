#pragma once

#include "ogs/core.hpp"
#include "ogs/eval.hpp"
#include "ogs/fuse.hpp"
#include "ogs/image.hpp"
#include "ogs/net.hpp"

#include <optional>
#include <vector>

namespace ogs {

/// Online hidden state h_t: the anchor tokens plus a one-frame cache of the
/// previous frame and its encoder tokens. Size is constant in stream length.
struct PipelineState {
    AnchorState anchor;
    TokenGrid prev_tokens;
    Image prev_image;
    int frame_index = 0;  // frames processed so far

    std::size_t allocation_bytes() const;
};

/// Joint relative prediction for the current and preceding frame, expressed
/// in the preceding frame's coordinates.
struct RelativeOutputs {
    CenterMaps centers_cur, centers_prev;
    AttributeMaps attrs_cur, attrs_prev;
    PoseHeadOut pose;  // relative camera pose of the current frame
};

/// Final globally consistent outputs in the first frame's coordinates.
struct GlobalOutputs {
    CenterMaps centers;
    AttributeMaps attrs;
    CameraPose pose;  // identity at t=1 by construction
};

struct FrameOutputs {
    std::optional<RelativeOutputs> relative;  // absent for the first frame
    GlobalOutputs global;
    std::vector<GaussianPrimitive> gaussians_global;
};

struct RelativeStageOut {
    TokenGrid f_t;  // encoder tokens of the current frame
    DualDecodeOut dual;
    RelativeOutputs outputs;
};

/// Encoder + dual decoder + relative heads. Requires a cached previous frame
/// (t >= 2).
RelativeStageOut relative_stage(const Network& net, const Image& frame,
                                const TokenGrid& prev_tokens);

/// Global heads conditioned on the global pose feature.
GlobalOutputs global_stage(const Network& net, const TokenGrid& f_r, const PoseToken& pose_g);

/// One primitive per pixel from the decoded maps.
std::vector<GaussianPrimitive> assemble_gaussians(const CenterMaps& centers,
                                                  const AttributeMaps& attrs);

struct StepOutputs {
    FrameOutputs frame;
    FusionReport fusion;
};

/// One online step: relative stage (t >= 2), anchor-state update, global
/// stage, Gaussian assembly and fusion into the accumulated scene. The first
/// frame runs the global heads on encoder tokens with the stored initial
/// pose embedding and an identity pose.
StepOutputs pipeline_step(const Network& net, const Image& frame, PipelineState& state,
                          GaussianScene& scene);

struct FrameReport {
    int frame = 0;
    std::size_t new_primitives = 0;
    std::size_t merged = 0;
    std::size_t absorbed = 0;
    std::size_t scene_primitives = 0;
    std::size_t state_bytes = 0;
    double wall_ms = 0;
};

struct StreamResult {
    GaussianScene scene;
    Trajectory trajectory;  // one global pose per frame, 1-based indices
    std::vector<FrameReport> reports;
};

/// Sequential fold of pipeline_step over the frames. Throws on an empty
/// stream.
StreamResult run_stream(const Network& net, const std::vector<Image>& frames,
                        double voxel_size = 0.05);

}  // namespace ogs
