#pragma once

#include "ogs/core.hpp"
#include "ogs/image.hpp"

#include <string>
#include <vector>

namespace ogs {

/// Ordered, index-stamped camera poses. Alignment requires >= 3 poses.
/// Rotations are carried both as matrices (for math) and as the quaternions
/// used on disk, so serialization round-trips exactly.
struct Trajectory {
    std::vector<int> indices;
    std::vector<CameraPose> poses;
    std::vector<Vec4> quats;  // (w,x,y,z), source of truth for TUM output

    std::size_t size() const { return poses.size(); }
    void push_back(int index, const CameraPose& pose);
    void push_back(int index, const Vec4& quat_wxyz, const Vec3& translation);
};

struct TextQuery {
    std::string label;
    VecX embedding;  // pre-projected into the K-dim Gaussian language space
};

struct Sim3 {
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

/// Peak signal-to-noise ratio in dB, capped at 99 for identical inputs.
double psnr(const Image& a, const Image& b);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), C1=0.01^2,
/// C2=0.03^2, averaged over channels and valid window positions.
double ssim(const Image& a, const Image& b);

/// Closed-form least-squares similarity transform minimizing
/// sum |dst_i - (s R src_i + t)|^2. Throws std::invalid_argument on fewer
/// than 3 or degenerate (collinear) correspondences.
Sim3 umeyama_sim3(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

/// RMSE of translation residuals after Sim(3) alignment of pred onto gt.
double ate(const Trajectory& pred, const Trajectory& gt);

/// RPE over relative motions delta frames apart: translation RMSE and
/// rotation geodesic-angle RMSE in degrees.
double rpe_trans(const Trajectory& pred, const Trajectory& gt, int delta = 1);
double rpe_rot_deg(const Trajectory& pred, const Trajectory& gt, int delta = 1);

struct SegmentationResult {
    Image mask;        // H x W x 1, values 0 or 1
    Image confidence;  // H x W x 1, per-pixel cosine similarity
};

/// Per-pixel cosine similarity against the query embedding; mask is
/// confidence > threshold. Zero-norm feature pixels score 0.
SegmentationResult segment_query(const Image& feature_map, const TextQuery& q,
                                 double threshold = 0.5);

struct SegmentationScores {
    double miou = 0;  // percent
    double macc = 0;  // percent
    std::vector<std::string> labels;
    std::vector<double> iou;  // percent, per evaluated label
    std::vector<double> acc;  // percent, per evaluated label
};

/// Mean IoU and mean per-label accuracy (over gt-positive pixels), in
/// percent. Labels with an empty union are skipped; throws when none remain.
SegmentationScores miou_macc(const std::vector<Image>& pred_masks,
                             const std::vector<Image>& gt_masks,
                             const std::vector<std::string>& labels);

}  // namespace ogs
