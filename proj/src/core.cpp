#include "ogs/core.hpp"

#include <Eigen/LU>

#include <cmath>
#include <stdexcept>
#include <string>

namespace ogs {

Mat3 quat_to_rotmat(const Vec4& q, double tol) {
    const double n = q.norm();
    if (std::abs(n - 1.0) > tol) {
        throw std::invalid_argument("quat_to_rotmat: quaternion norm " + std::to_string(n) +
                                    " is not 1 within tolerance");
    }
    const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
    Mat3 R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Vec4 rotmat_to_quat(const Mat3& R) {
    // Shepperd's method: pick the largest diagonal combination for stability.
    Vec4 q;
    const double tr = R.trace();
    if (tr > 0) {
        double s = std::sqrt(tr + 1.0) * 2;
        q << 0.25 * s, (R(2, 1) - R(1, 2)) / s, (R(0, 2) - R(2, 0)) / s, (R(1, 0) - R(0, 1)) / s;
    } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
        double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2;
        q << (R(2, 1) - R(1, 2)) / s, 0.25 * s, (R(0, 1) + R(1, 0)) / s, (R(0, 2) + R(2, 0)) / s;
    } else if (R(1, 1) > R(2, 2)) {
        double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2;
        q << (R(0, 2) - R(2, 0)) / s, (R(0, 1) + R(1, 0)) / s, 0.25 * s, (R(1, 2) + R(2, 1)) / s;
    } else {
        double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2;
        q << (R(1, 0) - R(0, 1)) / s, (R(0, 2) + R(2, 0)) / s, (R(1, 2) + R(2, 1)) / s, 0.25 * s;
    }
    return quat_canonical(q.normalized());
}

Vec4 quat_normalized(const Vec4& q, double eps) {
    const double n = q.norm();
    if (n < eps) throw std::invalid_argument("quat_normalized: near-zero quaternion");
    return quat_canonical(q / n);
}

Vec4 quat_canonical(const Vec4& q) {
    return q[0] < 0 ? Vec4(-q) : q;
}

Mat3 covariance_from_rs(const Vec4& rot, const Vec3& scale) {
    if (!(scale.minCoeff() > 0)) {
        throw std::invalid_argument("covariance_from_rs: scale components must be positive");
    }
    const Mat3 R = quat_to_rotmat(rot);
    return R * scale.array().square().matrix().asDiagonal() * R.transpose();
}

bool CameraPose::is_valid(double tol) const {
    const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
    if (err.cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(rotation.determinant() - 1.0) <= tol && translation.allFinite();
}

CameraPose se3_compose(const CameraPose& a, const CameraPose& b) {
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

CameraPose se3_inverse(const CameraPose& a) {
    return {a.rotation.transpose(), -(a.rotation.transpose() * a.translation)};
}

std::vector<Vec3> transform_points(const CameraPose& pose, const std::vector<Vec3>& pts) {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const Vec3& p : pts) out.push_back(pose.transform_point(p));
    return out;
}

void Intrinsics::validate() const {
    if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("Intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw std::invalid_argument("Intrinsics: image size must be positive");
    if (cx < 0 || cx >= width || cy < 0 || cy >= height) {
        throw std::invalid_argument("Intrinsics: principal point outside the image");
    }
}

void GaussianPrimitive::validate(int K, double tol) const {
    if (std::abs(rot.norm() - 1.0) > tol) throw std::invalid_argument("GaussianPrimitive: non-unit rotation");
    if (!(scale.minCoeff() > 0)) throw std::invalid_argument("GaussianPrimitive: nonpositive scale");
    if (!(opacity >= 0 && opacity <= 1)) throw std::invalid_argument("GaussianPrimitive: opacity outside [0,1]");
    if (!(confidence > 0)) throw std::invalid_argument("GaussianPrimitive: nonpositive confidence");
    if (K >= 0 && lang.size() != K) throw std::invalid_argument("GaussianPrimitive: lang dimension mismatch");
    if (!mu.allFinite() || !lang.allFinite()) throw std::invalid_argument("GaussianPrimitive: non-finite field");
}

VoxelKey voxel_key(const Vec3& position, double voxel_size) {
    if (!(voxel_size > 0)) throw std::invalid_argument("voxel_key: voxel_size must be positive");
    VoxelKey k;
    for (int i = 0; i < 3; ++i) k[i] = static_cast<std::int64_t>(std::floor(position[i] / voxel_size));
    return k;
}

GaussianScene::GaussianScene(int lang_dim, double vsize) : voxel_size(vsize), K(lang_dim) {
    if (!(vsize > 0)) throw std::invalid_argument("GaussianScene: voxel_size must be positive");
}

void GaussianScene::add(const GaussianPrimitive& g) {
    g.validate(K);
    primitives.push_back(g);
    voxel_index[voxel_key(g.mu, voxel_size)].push_back(primitives.size() - 1);
}

void GaussianScene::rebuild_index() {
    voxel_index.clear();
    for (std::size_t i = 0; i < primitives.size(); ++i) {
        voxel_index[voxel_key(primitives[i].mu, voxel_size)].push_back(i);
    }
}

bool GaussianScene::index_consistent() const {
    std::size_t total = 0;
    std::vector<char> seen(primitives.size(), 0);
    for (const auto& [key, bucket] : voxel_index) {
        total += bucket.size();
        for (std::size_t idx : bucket) {
            if (idx >= primitives.size() || seen[idx]) return false;
            seen[idx] = 1;
            if (voxel_key(primitives[idx].mu, voxel_size) != key) return false;
        }
    }
    return total == primitives.size();
}

}  // namespace ogs
