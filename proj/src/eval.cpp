#include "ogs/eval.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ogs {

void Trajectory::push_back(int index, const CameraPose& pose) {
    if (!indices.empty() && index <= indices.back()) {
        throw std::invalid_argument("Trajectory: indices must be strictly increasing");
    }
    indices.push_back(index);
    poses.push_back(pose);
    quats.push_back(rotmat_to_quat(pose.rotation));
}

void Trajectory::push_back(int index, const Vec4& quat_wxyz, const Vec3& translation) {
    if (!indices.empty() && index <= indices.back()) {
        throw std::invalid_argument("Trajectory: indices must be strictly increasing");
    }
    CameraPose pose;
    pose.rotation = quat_to_rotmat(quat_wxyz / quat_wxyz.norm());
    pose.translation = translation;
    indices.push_back(index);
    poses.push_back(pose);
    quats.push_back(quat_wxyz);
}

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
    if (a.size() == 0) throw std::invalid_argument("psnr: empty images");
    double mse = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse <= 0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(size);
    double sum = 0;
    const double c = (size - 1) / 2.0;
    for (int i = 0; i < size; ++i) {
        w[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
    constexpr int win = 11;
    constexpr double sigma = 1.5;
    if (a.height < win || a.width < win) {
        throw std::invalid_argument("ssim: images smaller than the 11x11 window");
    }
    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    const auto w1d = gaussian_window(win, sigma);

    const int oh = a.height - win + 1, ow = a.width - win + 1;
    double total = 0;
    std::size_t count = 0;
    // Separable Gaussian filtering per channel over the valid region.
    std::vector<double> rowbuf(static_cast<std::size_t>(a.height) * ow);
    auto filter = [&](auto&& sample) {
        // horizontal pass
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < ow; ++x) {
                double s = 0;
                for (int k = 0; k < win; ++k) s += w1d[k] * sample(y, x + k);
                rowbuf[static_cast<std::size_t>(y) * ow + x] = s;
            }
        std::vector<double> out(static_cast<std::size_t>(oh) * ow);
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double s = 0;
                for (int k = 0; k < win; ++k) s += w1d[k] * rowbuf[static_cast<std::size_t>(y + k) * ow + x];
                out[static_cast<std::size_t>(y) * ow + x] = s;
            }
        return out;
    };

    for (int c = 0; c < a.channels; ++c) {
        auto mu_a = filter([&](int y, int x) { return a.at(y, x, c); });
        auto mu_b = filter([&](int y, int x) { return b.at(y, x, c); });
        auto raw_aa = filter([&](int y, int x) { return a.at(y, x, c) * a.at(y, x, c); });
        auto raw_bb = filter([&](int y, int x) { return b.at(y, x, c) * b.at(y, x, c); });
        auto raw_ab = filter([&](int y, int x) { return a.at(y, x, c) * b.at(y, x, c); });
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double va = raw_aa[i] - mu_a[i] * mu_a[i];
            const double vb = raw_bb[i] - mu_b[i] * mu_b[i];
            const double cov = raw_ab[i] - mu_a[i] * mu_b[i];
            const double num = (2 * mu_a[i] * mu_b[i] + C1) * (2 * cov + C2);
            const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + C1) * (va + vb + C2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

Sim3 umeyama_sim3(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
    if (src.size() != dst.size()) throw std::invalid_argument("umeyama_sim3: size mismatch");
    const std::size_t n = src.size();
    if (n < 3) throw std::invalid_argument("umeyama_sim3: needs at least 3 correspondences");

    Vec3 mean_src = Vec3::Zero(), mean_dst = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        mean_src += src[i];
        mean_dst += dst[i];
    }
    mean_src /= static_cast<double>(n);
    mean_dst /= static_cast<double>(n);

    Mat3 cov = Mat3::Zero();
    double var_src = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 ds = src[i] - mean_src;
        cov += (dst[i] - mean_dst) * ds.transpose();
        var_src += ds.squaredNorm();
    }
    cov /= static_cast<double>(n);
    var_src /= static_cast<double>(n);

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 d = svd.singularValues();
    if (!(var_src > 0) || d[1] <= 1e-12 * std::max(1.0, d[0])) {
        throw std::invalid_argument("umeyama_sim3: degenerate (collinear) configuration");
    }
    Vec3 S = Vec3::Ones();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) S[2] = -1;

    Sim3 out;
    out.rotation = svd.matrixU() * S.asDiagonal() * svd.matrixV().transpose();
    out.scale = d.dot(S) / var_src;
    out.translation = mean_dst - out.scale * (out.rotation * mean_src);
    return out;
}

namespace {

void check_matched(const Trajectory& pred, const Trajectory& gt, const char* who) {
    if (pred.size() != gt.size() || pred.indices != gt.indices) {
        throw std::invalid_argument(std::string(who) + ": trajectories are not index-matched");
    }
}

}  // namespace

double ate(const Trajectory& pred, const Trajectory& gt) {
    check_matched(pred, gt, "ate");
    std::vector<Vec3> src, dst;
    src.reserve(pred.size());
    dst.reserve(gt.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        src.push_back(pred.poses[i].translation);
        dst.push_back(gt.poses[i].translation);
    }
    const Sim3 T = umeyama_sim3(src, dst);
    double sq = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        sq += (dst[i] - T.apply(src[i])).squaredNorm();
    }
    return std::sqrt(sq / static_cast<double>(src.size()));
}

namespace {

double rpe_accumulate(const Trajectory& pred, const Trajectory& gt, int delta, bool rotational) {
    check_matched(pred, gt, "rpe");
    if (delta < 1 || pred.size() <= static_cast<std::size_t>(delta)) {
        throw std::invalid_argument("rpe: trajectory too short for the requested delta");
    }
    double sq = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + delta < pred.size(); ++i) {
        const CameraPose dp = se3_compose(se3_inverse(pred.poses[i]), pred.poses[i + delta]);
        const CameraPose dg = se3_compose(se3_inverse(gt.poses[i]), gt.poses[i + delta]);
        const CameraPose err = se3_compose(se3_inverse(dg), dp);
        if (rotational) {
            // atan2 form stays accurate near the identity, where acos of the
            // trace loses half the significant digits.
            const Mat3& R = err.rotation;
            const double s = 0.5 * Vec3(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1)).norm();
            const double c = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
            const double deg = std::atan2(s, c) * 180.0 / std::numbers::pi;
            sq += deg * deg;
        } else {
            sq += err.translation.squaredNorm();
        }
        ++count;
    }
    return std::sqrt(sq / static_cast<double>(count));
}

}  // namespace

double rpe_trans(const Trajectory& pred, const Trajectory& gt, int delta) {
    return rpe_accumulate(pred, gt, delta, false);
}

double rpe_rot_deg(const Trajectory& pred, const Trajectory& gt, int delta) {
    return rpe_accumulate(pred, gt, delta, true);
}

SegmentationResult segment_query(const Image& feature_map, const TextQuery& q, double threshold) {
    const double qn = q.embedding.norm();
    if (!(qn > 0)) throw std::invalid_argument("segment_query: zero-norm embedding");
    const int K = feature_map.channels;
    if (q.embedding.size() != K) throw std::invalid_argument("segment_query: embedding width mismatch");

    SegmentationResult out;
    out.mask = Image(feature_map.height, feature_map.width, 1);
    out.confidence = Image(feature_map.height, feature_map.width, 1);
    for (int y = 0; y < feature_map.height; ++y) {
        for (int x = 0; x < feature_map.width; ++x) {
            double dot = 0, n2 = 0;
            for (int c = 0; c < K; ++c) {
                const double v = feature_map.at(y, x, c);
                dot += v * q.embedding[c];
                n2 += v * v;
            }
            const double n = std::sqrt(n2);
            const double conf = n > 1e-12 ? dot / (n * qn) : 0.0;
            out.confidence.at(y, x, 0) = conf;
            out.mask.at(y, x, 0) = conf > threshold ? 1.0 : 0.0;
        }
    }
    return out;
}

SegmentationScores miou_macc(const std::vector<Image>& pred_masks,
                             const std::vector<Image>& gt_masks,
                             const std::vector<std::string>& labels) {
    if (pred_masks.size() != gt_masks.size() || pred_masks.size() != labels.size()) {
        throw std::invalid_argument("miou_macc: per-label list sizes mismatch");
    }
    SegmentationScores out;
    double iou_sum = 0, acc_sum = 0;
    for (std::size_t l = 0; l < labels.size(); ++l) {
        const Image& p = pred_masks[l];
        const Image& g = gt_masks[l];
        if (!p.same_shape(g)) throw std::invalid_argument("miou_macc: mask shape mismatch for " + labels[l]);
        std::size_t inter = 0, uni = 0, gt_pos = 0;
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const bool pp = p.data[i] > 0.5, gg = g.data[i] > 0.5;
            inter += pp && gg;
            uni += pp || gg;
            gt_pos += gg;
        }
        if (uni == 0) continue;  // label absent on both sides
        const double iou = 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
        const double acc = gt_pos == 0 ? 0.0
                                       : 100.0 * static_cast<double>(inter) / static_cast<double>(gt_pos);
        out.labels.push_back(labels[l]);
        out.iou.push_back(iou);
        out.acc.push_back(acc);
        iou_sum += iou;
        acc_sum += acc;
    }
    if (out.labels.empty()) throw std::invalid_argument("miou_macc: no valid labels");
    out.miou = iou_sum / static_cast<double>(out.labels.size());
    out.macc = acc_sum / static_cast<double>(out.labels.size());
    return out;
}

}  // namespace ogs
