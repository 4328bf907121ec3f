#pragma once

#include "ogs/core.hpp"
#include "ogs/fuse.hpp"
#include "ogs/image.hpp"
#include "ogs/weights.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace ogs {

/// Toy-scale architecture knobs. All sizes are frozen into the weight-file
/// manifest so independently built containers stay interchangeable.
struct NetConfig {
    int d = 64;            // token width
    int patch = 8;         // patch size p
    int enc_blocks = 2;    // encoder self-attention depth
    int dec_blocks = 2;    // dual-decoder depth
    int state_blocks = 2;  // anchor-state decoder depth
    int heads = 2;         // attention heads
    int anchors = 64;      // anchor token count M
    int lang_dim = 16;     // K
    int head_channels = 32;  // DPT-lite tap width
    int up_channels = 16;    // post-upsample width
    int ff_mult = 4;         // feed-forward expansion
    double scale_base = 0.01;

    int fusion_dim() const { return 11 + lang_dim; }
};

/// Flattened patch tokens plus their 2-D grid shape.
struct TokenGrid {
    MatX tokens;  // N x d, N = grid_h * grid_w
    int grid_h = 0, grid_w = 0;
};

struct PoseToken {
    VecX vec;
};

/// Fixed-count recurrent state tokens; the count never changes over a
/// stream — that is the O(1)-memory contract.
struct AnchorState {
    MatX tokens;  // M x d
};

// --- parameter bundles ------------------------------------------------------

struct LayerNormParams {
    VecX gamma, beta;
};

struct AttentionParams {
    MatX wq, wk, wv, wo;  // d x d
    VecX bq, bk, bv, bo;
};

/// Pre-norm transformer block: x + MHA(LN1(x), context) then x + FF(LN2(x)).
struct BlockParams {
    LayerNormParams ln1;
    AttentionParams attn;
    LayerNormParams ln2;
    MatX ff_w1, ff_w2;
    VecX ff_b1, ff_b2;
};

struct Conv3x3Params {
    MatX w;  // out_ch x (in_ch * 9), kernel flattened (in, ky, kx)
    VecX b;
    int in_ch = 0, out_ch = 0;
};

/// Two-tap dense head: token taps are reassembled to the patch grid, fused
/// by a 3x3 conv, expanded to pixels by a learned sub-pixel upsampling, then
/// refined and projected to the output channels.
struct DptHeadParams {
    MatX tap0_w, tap1_w;  // c x d
    VecX tap0_b, tap1_b;
    Conv3x3Params fuse;   // 2c -> c
    MatX up_w;            // (p*p*c2) x c
    VecX up_b;
    Conv3x3Params post;   // c2 -> c2
    MatX out_w;           // ch_out x c2  (1x1 conv)
    VecX out_b;
};

struct PoseHeadParams {
    MatX w1, w2;  // d x d, 7 x d
    VecX b1, b2;
};

/// Full forward-only parameter set, loaded from a WeightContainer.
struct Network {
    NetConfig cfg;

    VecX p0, p1, pose_g_init;
    MatX anchor_init;  // M x d

    MatX patch_w;  // d x 3p^2
    VecX patch_b;

    std::vector<BlockParams> enc;
    LayerNormParams enc_norm;

    std::vector<BlockParams> dec_cur_self, dec_cur_cross, dec_prev_self, dec_prev_cross;
    LayerNormParams dec_cur_norm, dec_prev_norm;

    MatX state_in_w;  // d x 3d
    VecX state_in_b;
    std::vector<BlockParams> state_q_self, state_q_cross, state_s_self, state_s_cross;
    LayerNormParams state_q_norm, state_s_norm;

    DptHeadParams head_rel_pos, head_rel_gs, head_glob_pos, head_glob_gs;
    BlockParams head_glob_pos_cond, head_glob_gs_cond;
    PoseHeadParams head_rel_pose, head_glob_pose;

    FusionMlp fusion_mlp;

    static Network load(const WeightContainer& wc, const NetConfig& cfg);

    /// FNV hash over the encoder parameter bytes actually used by
    /// encode_image; lets callers verify cross-frame weight sharing.
    std::uint64_t encoder_hash() const;
};

// --- weight registry --------------------------------------------------------

/// Visits every section of the configured architecture (single source of
/// truth for names, shapes and init rules).
void for_each_section(const NetConfig& cfg,
                      const std::function<void(const std::string& name, std::vector<int> shape,
                                               InitKind kind, int fan_in)>& fn);

/// Builds a container with every section seeded from `seed`. Metadata about
/// the architecture is carried in "meta.*" sections.
WeightContainer random_weight_container(const NetConfig& cfg, std::uint64_t seed);

/// Reads the architecture recorded by random_weight_container.
NetConfig config_from_container(const WeightContainer& wc);

// --- forward operations -----------------------------------------------------

/// Linear patch projection plus fixed 2-D sinusoidal position embeddings.
/// Throws std::invalid_argument when H or W is not divisible by the patch.
TokenGrid patchify(const Image& image, const MatX& proj, const VecX& bias, int patch);

/// Fixed sinusoidal embedding for a (grid_h x grid_w) token grid.
MatX position_embedding(int grid_h, int grid_w, int d);

/// Row-stochastic attention maps per head (for tests and inspection).
std::vector<MatX> attention_weights(const MatX& queries, const MatX& context,
                                    const AttentionParams& p, int heads);

/// Full multi-head attention (projections, softmax, output projection).
MatX multi_head_attention(const MatX& queries, const MatX& context, const AttentionParams& p,
                          int heads);

/// Pre-norm block: q + MHA(LN1(q), context), then + FF(LN2(.)).
MatX attention_block(const MatX& queries, const MatX& context, const BlockParams& p, int heads);

MatX layer_norm(const MatX& x, const LayerNormParams& p);

/// Shared-weight ViT encoder: patchify then enc_blocks of self-attention,
/// closed by a LayerNorm.
TokenGrid encode_image(const Network& net, const Image& image);

struct DualDecodeOut {
    VecX pose_cur;   // p_t^r
    TokenGrid f_cur;   // f_t^r
    VecX pose_prev;  // computed and discarded by the pipeline
    TokenGrid f_prev;  // f_{t-1}^r
};

/// Weight-distinct two-stream decoder. Per depth, each stream self-attends,
/// then cross-attends to the other stream's post-self tokens; the pose token
/// rides as row 0 of its stream.
DualDecodeOut dual_decode(const Network& net, const TokenGrid& f_cur, const TokenGrid& f_prev);

struct CenterMaps {
    Image centers;     // H x W x 3
    Image confidence;  // H x W x 1, strictly > 1
};

struct AttributeMaps {
    Image rot;      // H x W x 4, unit per pixel
    Image scale;    // H x W x 3, >= 1e-6
    Image opacity;  // H x W x 1, in (0,1)
    Image color;    // H x W x 3, in (0,1)
    Image lang;     // H x W x K
};

CenterMaps head_pos(const DptHeadParams& head, const TokenGrid& f_a, const TokenGrid& f_b,
                    const NetConfig& cfg);
AttributeMaps head_gs(const DptHeadParams& head, const TokenGrid& f_a, const TokenGrid& f_b,
                      const NetConfig& cfg);

/// Global variants: every token of f first cross-attends to the pose token
/// (the implicit transformation); the conditioned and raw tokens are the two
/// taps.
CenterMaps head_pos_conditioned(const DptHeadParams& head, const BlockParams& cond,
                                const TokenGrid& f, const PoseToken& pose, const NetConfig& cfg);
AttributeMaps head_gs_conditioned(const DptHeadParams& head, const BlockParams& cond,
                                  const TokenGrid& f, const PoseToken& pose, const NetConfig& cfg);

struct PoseHeadOut {
    CameraPose pose;
    Eigen::Matrix<double, 7, 1> raw;  // quaternion (w,x,y,z) + translation
};

/// MLP pose head; the raw quaternion is normalized. Throws on a near-zero
/// quaternion norm (< 1e-8).
PoseHeadOut head_pose(const PoseHeadParams& head, const VecX& token);

/// Decodes a raw 7-vector into a pose (shared by head_pose and tests).
CameraPose pose_from_raw7(const Eigen::Matrix<double, 7, 1>& raw);

struct AnchorUpdateOut {
    PoseToken pose_g;   // p_t^g
    AnchorState state;  // s_t, same token count as the input state
};

/// Recurrent anchor-state update: the compact vector [f_bar, fr_bar, p_r]
/// (projected to width d) queries the previous state to give the global pose
/// feature, and the state stream cross-attends back to refresh itself.
AnchorUpdateOut anchor_update(const Network& net, const VecX& f_bar, const VecX& fr_bar,
                              const VecX& p_r, const AnchorState& prev);

/// Arithmetic mean over tokens ("globally-pooled").
VecX mean_pool(const TokenGrid& grid);

}  // namespace ogs
