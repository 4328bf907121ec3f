#include "ogs/net.hpp"

#include <cmath>
#include <stdexcept>

namespace ogs {

namespace {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

constexpr double kLnEps = 1e-5;

}  // namespace

MatX layer_norm(const MatX& x, const LayerNormParams& p) {
    require(p.gamma.size() == x.cols() && p.beta.size() == x.cols(),
            "layer_norm: parameter width mismatch");
    MatX out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const double var = x.row(r).squaredNorm() / x.cols() - mean * mean;
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            out(r, c) = (x(r, c) - mean) * inv * p.gamma[c] + p.beta[c];
        }
    }
    return out;
}

std::vector<MatX> attention_weights(const MatX& queries, const MatX& context,
                                    const AttentionParams& p, int heads) {
    const Eigen::Index d = p.wq.rows();
    require(queries.cols() == d && context.cols() == d, "attention: token width mismatch");
    require(d % heads == 0, "attention: width not divisible by head count");
    const Eigen::Index dh = d / heads;

    const MatX Q = (queries * p.wq.transpose()).rowwise() + p.bq.transpose();
    const MatX K = (context * p.wk.transpose()).rowwise() + p.bk.transpose();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<MatX> maps;
    maps.reserve(heads);
    for (int h = 0; h < heads; ++h) {
        MatX scores = Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose() * scale;
        for (Eigen::Index r = 0; r < scores.rows(); ++r) {
            const double mx = scores.row(r).maxCoeff();
            double sum = 0;
            for (Eigen::Index c = 0; c < scores.cols(); ++c) {
                scores(r, c) = std::exp(scores(r, c) - mx);
                sum += scores(r, c);
            }
            scores.row(r) /= sum;
        }
        maps.push_back(std::move(scores));
    }
    return maps;
}

MatX multi_head_attention(const MatX& queries, const MatX& context, const AttentionParams& p,
                          int heads) {
    const Eigen::Index d = p.wq.rows();
    const Eigen::Index dh = d / heads;
    const auto maps = attention_weights(queries, context, p, heads);
    const MatX V = (context * p.wv.transpose()).rowwise() + p.bv.transpose();
    MatX mixed(queries.rows(), d);
    for (int h = 0; h < heads; ++h) {
        mixed.middleCols(h * dh, dh) = maps[h] * V.middleCols(h * dh, dh);
    }
    return (mixed * p.wo.transpose()).rowwise() + p.bo.transpose();
}

MatX attention_block(const MatX& queries, const MatX& context, const BlockParams& p, int heads) {
    const MatX normed = layer_norm(queries, p.ln1);
    MatX x = queries + multi_head_attention(normed, context, p.attn, heads);
    const MatX h = layer_norm(x, p.ln2);
    MatX ff = (h * p.ff_w1.transpose()).rowwise() + p.ff_b1.transpose();
    ff = ff.unaryExpr([](double v) { return gelu(v); });
    x += (ff * p.ff_w2.transpose()).rowwise() + p.ff_b2.transpose();
    return x;
}

MatX position_embedding(int grid_h, int grid_w, int d) {
    require(d % 4 == 0, "position_embedding: width must be divisible by 4");
    const int half = d / 2;
    MatX emb(static_cast<Eigen::Index>(grid_h) * grid_w, d);
    for (int gy = 0; gy < grid_h; ++gy) {
        for (int gx = 0; gx < grid_w; ++gx) {
            const Eigen::Index row = static_cast<Eigen::Index>(gy) * grid_w + gx;
            for (int i = 0; i < half / 2; ++i) {
                const double freq = std::pow(10000.0, -2.0 * i / half);
                emb(row, 2 * i) = std::sin(gx * freq);
                emb(row, 2 * i + 1) = std::cos(gx * freq);
                emb(row, half + 2 * i) = std::sin(gy * freq);
                emb(row, half + 2 * i + 1) = std::cos(gy * freq);
            }
        }
    }
    return emb;
}

TokenGrid patchify(const Image& image, const MatX& proj, const VecX& bias, int patch) {
    require(image.channels == 3, "patchify: image must be H x W x 3");
    require(patch > 0 && image.height % patch == 0 && image.width % patch == 0,
            "patchify: image dimensions must be divisible by the patch size");
    const int d = static_cast<int>(proj.rows());
    require(proj.cols() == 3 * patch * patch && bias.size() == d,
            "patchify: projection shape mismatch");

    TokenGrid grid;
    grid.grid_h = image.height / patch;
    grid.grid_w = image.width / patch;
    const Eigen::Index n = static_cast<Eigen::Index>(grid.grid_h) * grid.grid_w;
    grid.tokens = MatX(n, d);

    VecX pv(3 * patch * patch);
    for (int gy = 0; gy < grid.grid_h; ++gy) {
        for (int gx = 0; gx < grid.grid_w; ++gx) {
            int k = 0;
            for (int py = 0; py < patch; ++py)
                for (int px = 0; px < patch; ++px)
                    for (int c = 0; c < 3; ++c)
                        pv[k++] = image.at(gy * patch + py, gx * patch + px, c);
            grid.tokens.row(static_cast<Eigen::Index>(gy) * grid.grid_w + gx) =
                (proj * pv + bias).transpose();
        }
    }
    grid.tokens += position_embedding(grid.grid_h, grid.grid_w, d);
    return grid;
}

TokenGrid encode_image(const Network& net, const Image& image) {
    TokenGrid grid = patchify(image, net.patch_w, net.patch_b, net.cfg.patch);
    for (const auto& blk : net.enc) {
        grid.tokens = attention_block(grid.tokens, grid.tokens, blk, net.cfg.heads);
    }
    grid.tokens = layer_norm(grid.tokens, net.enc_norm);
    return grid;
}

DualDecodeOut dual_decode(const Network& net, const TokenGrid& f_cur, const TokenGrid& f_prev) {
    require(f_cur.tokens.cols() == net.cfg.d && f_prev.tokens.cols() == net.cfg.d,
            "dual_decode: token width mismatch");
    const Eigen::Index n_cur = f_cur.tokens.rows();
    const Eigen::Index n_prev = f_prev.tokens.rows();

    MatX cur(n_cur + 1, net.cfg.d), prev(n_prev + 1, net.cfg.d);
    cur.row(0) = net.p1.transpose();
    cur.bottomRows(n_cur) = f_cur.tokens;
    prev.row(0) = net.p0.transpose();
    prev.bottomRows(n_prev) = f_prev.tokens;

    for (int i = 0; i < net.cfg.dec_blocks; ++i) {
        const MatX cur_s = attention_block(cur, cur, net.dec_cur_self[i], net.cfg.heads);
        const MatX prev_s = attention_block(prev, prev, net.dec_prev_self[i], net.cfg.heads);
        cur = attention_block(cur_s, prev_s, net.dec_cur_cross[i], net.cfg.heads);
        prev = attention_block(prev_s, cur_s, net.dec_prev_cross[i], net.cfg.heads);
    }
    cur = layer_norm(cur, net.dec_cur_norm);
    prev = layer_norm(prev, net.dec_prev_norm);

    DualDecodeOut out;
    out.pose_cur = cur.row(0).transpose();
    out.f_cur = {cur.bottomRows(n_cur), f_cur.grid_h, f_cur.grid_w};
    out.pose_prev = prev.row(0).transpose();
    out.f_prev = {prev.bottomRows(n_prev), f_prev.grid_h, f_prev.grid_w};
    return out;
}

// --- dense heads -------------------------------------------------------------

namespace {

Image conv3x3(const Image& in, const Conv3x3Params& p, bool activate) {
    require(in.channels == p.in_ch, "conv3x3: channel mismatch");
    Image out(in.height, in.width, p.out_ch);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            for (int oc = 0; oc < p.out_ch; ++oc) {
                double s = p.b[oc];
                for (int ic = 0; ic < p.in_ch; ++ic) {
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = y + ky - 1;
                        if (iy < 0 || iy >= in.height) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = x + kx - 1;
                            if (ix < 0 || ix >= in.width) continue;
                            s += p.w(oc, (ic * 3 + ky) * 3 + kx) * in.at(iy, ix, ic);
                        }
                    }
                }
                out.at(y, x, oc) = activate ? gelu(s) : s;
            }
        }
    }
    return out;
}

// Shared DPT-lite trunk: taps -> grid fuse conv -> learned sub-pixel
// upsampling -> full-resolution conv -> 1x1 output projection.
Image dpt_forward(const DptHeadParams& head, const TokenGrid& a, const TokenGrid& b,
                  const NetConfig& cfg) {
    require(a.grid_h == b.grid_h && a.grid_w == b.grid_w, "head: tap grid shapes differ");
    require(a.tokens.cols() == cfg.d && b.tokens.cols() == cfg.d, "head: token width mismatch");
    const int gh = a.grid_h, gw = a.grid_w, c = cfg.head_channels, c2 = cfg.up_channels;
    const int p = cfg.patch;

    const MatX t0 = (a.tokens * head.tap0_w.transpose()).rowwise() + head.tap0_b.transpose();
    const MatX t1 = (b.tokens * head.tap1_w.transpose()).rowwise() + head.tap1_b.transpose();

    Image grid(gh, gw, 2 * c);
    for (int gy = 0; gy < gh; ++gy)
        for (int gx = 0; gx < gw; ++gx) {
            const Eigen::Index row = static_cast<Eigen::Index>(gy) * gw + gx;
            for (int ch = 0; ch < c; ++ch) {
                grid.at(gy, gx, ch) = t0(row, ch);
                grid.at(gy, gx, c + ch) = t1(row, ch);
            }
        }

    const Image fused = conv3x3(grid, head.fuse, true);

    Image full(gh * p, gw * p, c2);
    VecX cell(c);
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            for (int ch = 0; ch < c; ++ch) cell[ch] = fused.at(gy, gx, ch);
            const VecX up = head.up_w * cell + head.up_b;  // p*p*c2
            for (int py = 0; py < p; ++py)
                for (int px = 0; px < p; ++px)
                    for (int ch = 0; ch < c2; ++ch)
                        full.at(gy * p + py, gx * p + px, ch) = up[(py * p + px) * c2 + ch];
        }
    }

    const Image refined = conv3x3(full, head.post, true);

    const int ch_out = static_cast<int>(head.out_w.rows());
    Image out(refined.height, refined.width, ch_out);
    VecX pix(c2);
    for (int y = 0; y < refined.height; ++y)
        for (int x = 0; x < refined.width; ++x) {
            for (int ch = 0; ch < c2; ++ch) pix[ch] = refined.at(y, x, ch);
            const VecX o = head.out_w * pix + head.out_b;
            for (int ch = 0; ch < ch_out; ++ch) out.at(y, x, ch) = o[ch];
        }
    return out;
}

CenterMaps split_pos(const Image& raw) {
    CenterMaps maps;
    maps.centers = Image(raw.height, raw.width, 3);
    maps.confidence = Image(raw.height, raw.width, 1);
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x) {
            for (int c = 0; c < 3; ++c) maps.centers.at(y, x, c) = raw.at(y, x, c);
            maps.confidence.at(y, x, 0) = 1.0 + softplus(raw.at(y, x, 3));
        }
    return maps;
}

AttributeMaps split_gs(const Image& raw, const NetConfig& cfg) {
    const int K = cfg.lang_dim;
    AttributeMaps m;
    m.rot = Image(raw.height, raw.width, 4);
    m.scale = Image(raw.height, raw.width, 3);
    m.opacity = Image(raw.height, raw.width, 1);
    m.color = Image(raw.height, raw.width, 3);
    m.lang = Image(raw.height, raw.width, K);
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x) {
            Vec4 q(raw.at(y, x, 0), raw.at(y, x, 1), raw.at(y, x, 2), raw.at(y, x, 3));
            if (q.norm() < 1e-8) q = Vec4(1, 0, 0, 0);
            q.normalize();
            if (q[0] < 0) q = -q;
            for (int c = 0; c < 4; ++c) m.rot.at(y, x, c) = q[c];
            for (int c = 0; c < 3; ++c) {
                m.scale.at(y, x, c) = std::max(1e-6, cfg.scale_base * softplus(raw.at(y, x, 4 + c)));
            }
            m.opacity.at(y, x, 0) = sigmoid(raw.at(y, x, 7));
            for (int c = 0; c < 3; ++c) m.color.at(y, x, c) = sigmoid(raw.at(y, x, 8 + c));
            for (int c = 0; c < K; ++c) m.lang.at(y, x, c) = raw.at(y, x, 11 + c);
        }
    return m;
}

TokenGrid condition_on_pose(const BlockParams& cond, const TokenGrid& f, const PoseToken& pose,
                            int heads) {
    require(pose.vec.size() == f.tokens.cols(), "conditioning: pose token width mismatch");
    MatX ctx(1, pose.vec.size());
    ctx.row(0) = pose.vec.transpose();
    return {attention_block(f.tokens, ctx, cond, heads), f.grid_h, f.grid_w};
}

}  // namespace

CenterMaps head_pos(const DptHeadParams& head, const TokenGrid& f_a, const TokenGrid& f_b,
                    const NetConfig& cfg) {
    return split_pos(dpt_forward(head, f_a, f_b, cfg));
}

AttributeMaps head_gs(const DptHeadParams& head, const TokenGrid& f_a, const TokenGrid& f_b,
                      const NetConfig& cfg) {
    return split_gs(dpt_forward(head, f_a, f_b, cfg), cfg);
}

CenterMaps head_pos_conditioned(const DptHeadParams& head, const BlockParams& cond,
                                const TokenGrid& f, const PoseToken& pose, const NetConfig& cfg) {
    const TokenGrid conditioned = condition_on_pose(cond, f, pose, cfg.heads);
    return split_pos(dpt_forward(head, conditioned, f, cfg));
}

AttributeMaps head_gs_conditioned(const DptHeadParams& head, const BlockParams& cond,
                                  const TokenGrid& f, const PoseToken& pose, const NetConfig& cfg) {
    const TokenGrid conditioned = condition_on_pose(cond, f, pose, cfg.heads);
    return split_gs(dpt_forward(head, conditioned, f, cfg), cfg);
}

CameraPose pose_from_raw7(const Eigen::Matrix<double, 7, 1>& raw) {
    const Vec4 q = raw.head<4>();
    if (q.norm() < 1e-8) throw std::invalid_argument("pose head: degenerate quaternion");
    CameraPose pose;
    pose.rotation = quat_to_rotmat(q / q.norm());
    pose.translation = raw.tail<3>();
    return pose;
}

PoseHeadOut head_pose(const PoseHeadParams& head, const VecX& token) {
    require(token.size() == head.w1.cols(), "head_pose: token width mismatch");
    VecX h = head.w1 * token + head.b1;
    h = h.unaryExpr([](double v) { return gelu(v); });
    PoseHeadOut out;
    out.raw = head.w2 * h + head.b2;
    out.pose = pose_from_raw7(out.raw);
    return out;
}

VecX mean_pool(const TokenGrid& grid) { return grid.tokens.colwise().mean().transpose(); }

AnchorUpdateOut anchor_update(const Network& net, const VecX& f_bar, const VecX& fr_bar,
                              const VecX& p_r, const AnchorState& prev) {
    const int d = net.cfg.d;
    require(f_bar.size() == d && fr_bar.size() == d && p_r.size() == d,
            "anchor_update: compact-vector component width mismatch");
    require(prev.tokens.cols() == d, "anchor_update: state width mismatch");

    VecX compact(3 * d);
    compact << f_bar, fr_bar, p_r;
    MatX query(1, d);
    query.row(0) = (net.state_in_w * compact + net.state_in_b).transpose();

    MatX state = prev.tokens;
    for (int i = 0; i < net.cfg.state_blocks; ++i) {
        query = attention_block(query, query, net.state_q_self[i], net.cfg.heads);
        query = attention_block(query, state, net.state_q_cross[i], net.cfg.heads);
        state = attention_block(state, state, net.state_s_self[i], net.cfg.heads);
        state = attention_block(state, query, net.state_s_cross[i], net.cfg.heads);
    }

    AnchorUpdateOut out;
    out.pose_g.vec = layer_norm(query, net.state_q_norm).row(0).transpose();
    out.state.tokens = layer_norm(state, net.state_s_norm);
    return out;
}

// --- registry, init and loading ----------------------------------------------

namespace {

void emit_block(const NetConfig& cfg, const std::string& prefix,
                const std::function<void(const std::string&, std::vector<int>, InitKind, int)>& fn) {
    const int d = cfg.d, ff = cfg.ff_mult * cfg.d;
    fn(prefix + ".ln1.g", {d}, InitKind::One, 0);
    fn(prefix + ".ln1.b", {d}, InitKind::Zero, 0);
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
        fn(prefix + ".attn." + w, {d, d}, InitKind::Uniform, d);
    }
    for (const char* b : {"bq", "bk", "bv", "bo"}) {
        fn(prefix + ".attn." + b, {d}, InitKind::Zero, 0);
    }
    fn(prefix + ".ln2.g", {d}, InitKind::One, 0);
    fn(prefix + ".ln2.b", {d}, InitKind::Zero, 0);
    fn(prefix + ".ff.w1", {ff, d}, InitKind::Uniform, d);
    fn(prefix + ".ff.b1", {ff}, InitKind::Zero, 0);
    fn(prefix + ".ff.w2", {d, ff}, InitKind::Uniform, ff);
    fn(prefix + ".ff.b2", {d}, InitKind::Zero, 0);
}

void emit_dpt_head(const NetConfig& cfg, const std::string& prefix, int ch_out,
                   const std::function<void(const std::string&, std::vector<int>, InitKind, int)>& fn) {
    const int d = cfg.d, c = cfg.head_channels, c2 = cfg.up_channels, p = cfg.patch;
    fn(prefix + ".tap0.w", {c, d}, InitKind::Uniform, d);
    fn(prefix + ".tap0.b", {c}, InitKind::Zero, 0);
    fn(prefix + ".tap1.w", {c, d}, InitKind::Uniform, d);
    fn(prefix + ".tap1.b", {c}, InitKind::Zero, 0);
    fn(prefix + ".fuse.w", {c, 2 * c * 9}, InitKind::Uniform, 2 * c * 9);
    fn(prefix + ".fuse.b", {c}, InitKind::Zero, 0);
    fn(prefix + ".up.w", {p * p * c2, c}, InitKind::Uniform, c);
    fn(prefix + ".up.b", {p * p * c2}, InitKind::Zero, 0);
    fn(prefix + ".post.w", {c2, c2 * 9}, InitKind::Uniform, c2 * 9);
    fn(prefix + ".post.b", {c2}, InitKind::Zero, 0);
    fn(prefix + ".out.w", {ch_out, c2}, InitKind::Uniform, c2);
    fn(prefix + ".out.b", {ch_out}, InitKind::Zero, 0);
}

void emit_pose_head(const NetConfig& cfg, const std::string& prefix,
                    const std::function<void(const std::string&, std::vector<int>, InitKind, int)>& fn) {
    const int d = cfg.d;
    fn(prefix + ".w1", {d, d}, InitKind::Uniform, d);
    fn(prefix + ".b1", {d}, InitKind::Zero, 0);
    fn(prefix + ".w2", {7, d}, InitKind::Uniform, d);
    fn(prefix + ".b2", {7}, InitKind::Zero, 0);
}

}  // namespace

void for_each_section(const NetConfig& cfg,
                      const std::function<void(const std::string& name, std::vector<int> shape,
                                               InitKind kind, int fan_in)>& fn) {
    const int d = cfg.d, p = cfg.patch, M = cfg.anchors, F = cfg.fusion_dim();

    fn("tok.p0", {d}, InitKind::Uniform, d);
    fn("tok.p1", {d}, InitKind::Uniform, d);
    fn("tok.pose_g_init", {d}, InitKind::Uniform, d);
    fn("tok.anchor_init", {M, d}, InitKind::Uniform, d);

    fn("patch.w", {d, 3 * p * p}, InitKind::Uniform, 3 * p * p);
    fn("patch.b", {d}, InitKind::Zero, 0);
    for (int i = 0; i < cfg.enc_blocks; ++i) emit_block(cfg, "enc.blk" + std::to_string(i), fn);
    fn("enc.norm.g", {d}, InitKind::One, 0);
    fn("enc.norm.b", {d}, InitKind::Zero, 0);

    for (int i = 0; i < cfg.dec_blocks; ++i) {
        const std::string n = std::to_string(i);
        emit_block(cfg, "dec.cur.blk" + n + ".self", fn);
        emit_block(cfg, "dec.cur.blk" + n + ".cross", fn);
        emit_block(cfg, "dec.prev.blk" + n + ".self", fn);
        emit_block(cfg, "dec.prev.blk" + n + ".cross", fn);
    }
    for (const char* s : {"cur", "prev"}) {
        fn(std::string("dec.") + s + ".norm.g", {d}, InitKind::One, 0);
        fn(std::string("dec.") + s + ".norm.b", {d}, InitKind::Zero, 0);
    }

    fn("state.in_proj.w", {d, 3 * d}, InitKind::Uniform, 3 * d);
    fn("state.in_proj.b", {d}, InitKind::Zero, 0);
    for (int i = 0; i < cfg.state_blocks; ++i) {
        const std::string n = std::to_string(i);
        emit_block(cfg, "state.q.blk" + n + ".self", fn);
        emit_block(cfg, "state.q.blk" + n + ".cross", fn);
        emit_block(cfg, "state.s.blk" + n + ".self", fn);
        emit_block(cfg, "state.s.blk" + n + ".cross", fn);
    }
    for (const char* s : {"q", "s"}) {
        fn(std::string("state.") + s + ".norm.g", {d}, InitKind::One, 0);
        fn(std::string("state.") + s + ".norm.b", {d}, InitKind::Zero, 0);
    }

    emit_dpt_head(cfg, "head.rel.pos", 4, fn);
    emit_dpt_head(cfg, "head.rel.gs", 11 + cfg.lang_dim, fn);
    emit_dpt_head(cfg, "head.glob.pos", 4, fn);
    emit_dpt_head(cfg, "head.glob.gs", 11 + cfg.lang_dim, fn);
    emit_block(cfg, "head.glob.pos.cond", fn);
    emit_block(cfg, "head.glob.gs.cond", fn);
    emit_pose_head(cfg, "head.rel.pose", fn);
    emit_pose_head(cfg, "head.glob.pose", fn);

    fn("fusion_mlp.w1", {F, 2 * F}, InitKind::Uniform, 2 * F);
    fn("fusion_mlp.b1", {F}, InitKind::Zero, 0);
    fn("fusion_mlp.w2", {F, F}, InitKind::Uniform, F);
    fn("fusion_mlp.b2", {F}, InitKind::Zero, 0);
}

WeightContainer random_weight_container(const NetConfig& cfg, std::uint64_t seed) {
    WeightContainer wc;
    const std::vector<float> arch = {
        static_cast<float>(cfg.d),           static_cast<float>(cfg.patch),
        static_cast<float>(cfg.enc_blocks),  static_cast<float>(cfg.dec_blocks),
        static_cast<float>(cfg.state_blocks), static_cast<float>(cfg.heads),
        static_cast<float>(cfg.anchors),     static_cast<float>(cfg.lang_dim),
        static_cast<float>(cfg.head_channels), static_cast<float>(cfg.up_channels),
        static_cast<float>(cfg.ff_mult),     static_cast<float>(cfg.scale_base)};
    wc.add("meta.arch", {static_cast<int>(arch.size())}, arch);

    std::uint64_t state = seed;
    for_each_section(cfg, [&](const std::string& name, std::vector<int> shape, InitKind kind,
                              int fan_in) {
        std::size_t count = 1;
        for (int dim : shape) count *= static_cast<std::size_t>(dim);
        wc.add(name, std::move(shape), seeded_fill(state, kind, count, fan_in));
    });
    return wc;
}

NetConfig config_from_container(const WeightContainer& wc) {
    const VecX a = wc.vec("meta.arch");
    if (a.size() != 12) throw std::invalid_argument("weight container: bad meta.arch");
    NetConfig cfg;
    cfg.d = static_cast<int>(a[0]);
    cfg.patch = static_cast<int>(a[1]);
    cfg.enc_blocks = static_cast<int>(a[2]);
    cfg.dec_blocks = static_cast<int>(a[3]);
    cfg.state_blocks = static_cast<int>(a[4]);
    cfg.heads = static_cast<int>(a[5]);
    cfg.anchors = static_cast<int>(a[6]);
    cfg.lang_dim = static_cast<int>(a[7]);
    cfg.head_channels = static_cast<int>(a[8]);
    cfg.up_channels = static_cast<int>(a[9]);
    cfg.ff_mult = static_cast<int>(a[10]);
    cfg.scale_base = a[11];
    return cfg;
}

namespace {

struct Loader {
    const WeightContainer& wc;

    MatX mat(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
        MatX m = wc.mat(name);
        if (m.rows() != rows || m.cols() != cols) {
            throw std::invalid_argument("weight section " + name + " has shape " +
                                        std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                        ", expected " + std::to_string(rows) + "x" +
                                        std::to_string(cols));
        }
        return m;
    }

    VecX vec(const std::string& name, Eigen::Index size) const {
        VecX v = wc.vec(name);
        if (v.size() != size) {
            throw std::invalid_argument("weight section " + name + " has length " +
                                        std::to_string(v.size()) + ", expected " +
                                        std::to_string(size));
        }
        return v;
    }

    LayerNormParams norm(const std::string& prefix, int d) const {
        return {vec(prefix + ".g", d), vec(prefix + ".b", d)};
    }

    BlockParams block(const std::string& prefix, const NetConfig& cfg) const {
        const int d = cfg.d, ff = cfg.ff_mult * cfg.d;
        BlockParams p;
        p.ln1 = norm(prefix + ".ln1", d);
        p.attn = {mat(prefix + ".attn.wq", d, d), mat(prefix + ".attn.wk", d, d),
                  mat(prefix + ".attn.wv", d, d), mat(prefix + ".attn.wo", d, d),
                  vec(prefix + ".attn.bq", d),    vec(prefix + ".attn.bk", d),
                  vec(prefix + ".attn.bv", d),    vec(prefix + ".attn.bo", d)};
        p.ln2 = norm(prefix + ".ln2", d);
        p.ff_w1 = mat(prefix + ".ff.w1", ff, d);
        p.ff_b1 = vec(prefix + ".ff.b1", ff);
        p.ff_w2 = mat(prefix + ".ff.w2", d, ff);
        p.ff_b2 = vec(prefix + ".ff.b2", d);
        return p;
    }

    DptHeadParams dpt(const std::string& prefix, int ch_out, const NetConfig& cfg) const {
        const int d = cfg.d, c = cfg.head_channels, c2 = cfg.up_channels, p = cfg.patch;
        DptHeadParams h;
        h.tap0_w = mat(prefix + ".tap0.w", c, d);
        h.tap0_b = vec(prefix + ".tap0.b", c);
        h.tap1_w = mat(prefix + ".tap1.w", c, d);
        h.tap1_b = vec(prefix + ".tap1.b", c);
        h.fuse = {mat(prefix + ".fuse.w", c, 2 * c * 9), vec(prefix + ".fuse.b", c), 2 * c, c};
        h.up_w = mat(prefix + ".up.w", p * p * c2, c);
        h.up_b = vec(prefix + ".up.b", p * p * c2);
        h.post = {mat(prefix + ".post.w", c2, c2 * 9), vec(prefix + ".post.b", c2), c2, c2};
        h.out_w = mat(prefix + ".out.w", ch_out, c2);
        h.out_b = vec(prefix + ".out.b", ch_out);
        return h;
    }

    PoseHeadParams pose_head(const std::string& prefix, const NetConfig& cfg) const {
        return {mat(prefix + ".w1", cfg.d, cfg.d), mat(prefix + ".w2", 7, cfg.d),
                vec(prefix + ".b1", cfg.d), vec(prefix + ".b2", 7)};
    }
};

void hash_mat(std::uint64_t& h, const MatX& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
            for (int i = 0; i < 8; ++i) {
                h ^= bytes[i];
                h *= 1099511628211ull;
            }
        }
}

}  // namespace

Network Network::load(const WeightContainer& wc, const NetConfig& cfg) {
    if (cfg.d % 4 != 0 || cfg.d % cfg.heads != 0) {
        throw std::invalid_argument("NetConfig: d must be divisible by 4 and by the head count");
    }
    const Loader L{wc};
    Network net;
    net.cfg = cfg;
    const int d = cfg.d;

    net.p0 = L.vec("tok.p0", d);
    net.p1 = L.vec("tok.p1", d);
    net.pose_g_init = L.vec("tok.pose_g_init", d);
    net.anchor_init = L.mat("tok.anchor_init", cfg.anchors, d);

    net.patch_w = L.mat("patch.w", d, 3 * cfg.patch * cfg.patch);
    net.patch_b = L.vec("patch.b", d);
    for (int i = 0; i < cfg.enc_blocks; ++i) {
        net.enc.push_back(L.block("enc.blk" + std::to_string(i), cfg));
    }
    net.enc_norm = L.norm("enc.norm", d);

    for (int i = 0; i < cfg.dec_blocks; ++i) {
        const std::string n = std::to_string(i);
        net.dec_cur_self.push_back(L.block("dec.cur.blk" + n + ".self", cfg));
        net.dec_cur_cross.push_back(L.block("dec.cur.blk" + n + ".cross", cfg));
        net.dec_prev_self.push_back(L.block("dec.prev.blk" + n + ".self", cfg));
        net.dec_prev_cross.push_back(L.block("dec.prev.blk" + n + ".cross", cfg));
    }
    net.dec_cur_norm = L.norm("dec.cur.norm", d);
    net.dec_prev_norm = L.norm("dec.prev.norm", d);

    net.state_in_w = L.mat("state.in_proj.w", d, 3 * d);
    net.state_in_b = L.vec("state.in_proj.b", d);
    for (int i = 0; i < cfg.state_blocks; ++i) {
        const std::string n = std::to_string(i);
        net.state_q_self.push_back(L.block("state.q.blk" + n + ".self", cfg));
        net.state_q_cross.push_back(L.block("state.q.blk" + n + ".cross", cfg));
        net.state_s_self.push_back(L.block("state.s.blk" + n + ".self", cfg));
        net.state_s_cross.push_back(L.block("state.s.blk" + n + ".cross", cfg));
    }
    net.state_q_norm = L.norm("state.q.norm", d);
    net.state_s_norm = L.norm("state.s.norm", d);

    net.head_rel_pos = L.dpt("head.rel.pos", 4, cfg);
    net.head_rel_gs = L.dpt("head.rel.gs", 11 + cfg.lang_dim, cfg);
    net.head_glob_pos = L.dpt("head.glob.pos", 4, cfg);
    net.head_glob_gs = L.dpt("head.glob.gs", 11 + cfg.lang_dim, cfg);
    net.head_glob_pos_cond = L.block("head.glob.pos.cond", cfg);
    net.head_glob_gs_cond = L.block("head.glob.gs.cond", cfg);
    net.head_rel_pose = L.pose_head("head.rel.pose", cfg);
    net.head_glob_pose = L.pose_head("head.glob.pose", cfg);

    const int F = cfg.fusion_dim();
    net.fusion_mlp.w1 = L.mat("fusion_mlp.w1", F, 2 * F);
    net.fusion_mlp.b1 = L.vec("fusion_mlp.b1", F);
    net.fusion_mlp.w2 = L.mat("fusion_mlp.w2", F, F);
    net.fusion_mlp.b2 = L.vec("fusion_mlp.b2", F);
    return net;
}

std::uint64_t Network::encoder_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    hash_mat(h, patch_w);
    hash_mat(h, patch_b);
    for (const auto& blk : enc) {
        hash_mat(h, blk.ln1.gamma);
        hash_mat(h, blk.ln1.beta);
        hash_mat(h, blk.attn.wq);
        hash_mat(h, blk.attn.wk);
        hash_mat(h, blk.attn.wv);
        hash_mat(h, blk.attn.wo);
        hash_mat(h, blk.attn.bq);
        hash_mat(h, blk.attn.bk);
        hash_mat(h, blk.attn.bv);
        hash_mat(h, blk.attn.bo);
        hash_mat(h, blk.ln2.gamma);
        hash_mat(h, blk.ln2.beta);
        hash_mat(h, blk.ff_w1);
        hash_mat(h, blk.ff_b1);
        hash_mat(h, blk.ff_w2);
        hash_mat(h, blk.ff_b2);
    }
    hash_mat(h, enc_norm.gamma);
    hash_mat(h, enc_norm.beta);
    return h;
}

}  // namespace ogs
