#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace ogs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using VecX = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using MatX = Eigen::MatrixXd;

/// Default language-feature dimension per scene.
inline constexpr int kDefaultLangDim = 16;

// ---------------------------------------------------------------------------
// Rotation utilities. Quaternions are stored (w, x, y, z), scalar first;
// the double cover is resolved by canonicalizing w >= 0.

/// Unit quaternion -> rotation matrix. Throws std::invalid_argument if
/// |q| deviates from 1 by more than `tol`.
Mat3 quat_to_rotmat(const Vec4& q, double tol = 1e-6);

/// Rotation matrix -> canonical unit quaternion (w >= 0).
Vec4 rotmat_to_quat(const Mat3& R);

/// Normalizes and canonicalizes (w >= 0). Throws on near-zero norm.
Vec4 quat_normalized(const Vec4& q, double eps = 1e-12);

Vec4 quat_canonical(const Vec4& q);

/// Covariance of an anisotropic Gaussian: Sigma = R diag(s^2) R^T.
/// Throws std::invalid_argument on nonpositive scale components.
Mat3 covariance_from_rs(const Vec4& rot, const Vec3& scale);

// ---------------------------------------------------------------------------

/// Rigid camera-to-world transform: x_world = R * x_cam + t.
/// The global frame is anchored at the first frame of a stream.
struct CameraPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static CameraPose identity() { return {}; }

    Vec3 transform_point(const Vec3& p) const { return rotation * p + translation; }

    bool is_valid(double tol = 1e-6) const;
};

CameraPose se3_compose(const CameraPose& a, const CameraPose& b);
CameraPose se3_inverse(const CameraPose& a);
std::vector<Vec3> transform_points(const CameraPose& pose, const std::vector<Vec3>& pts);

/// Pinhole projection parameters, in pixels.
struct Intrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const;  // throws std::invalid_argument
};

// ---------------------------------------------------------------------------

/// One splat: anisotropic 3D Gaussian with opacity, DC color, a K-dim
/// language feature and a positive fusion confidence.
struct GaussianPrimitive {
    Vec3 mu = Vec3::Zero();
    Vec4 rot = Vec4(1, 0, 0, 0);  // (w, x, y, z), unit
    Vec3 scale = Vec3::Ones();
    double opacity = 1.0;
    Vec3 color = Vec3::Zero();
    VecX lang;  // exactly K entries
    double confidence = 1.0;

    /// Checks the type invariants; throws std::invalid_argument naming
    /// the offending field. `K < 0` skips the feature-width check.
    void validate(int K = -1, double tol = 1e-6) const;
};

using VoxelKey = std::array<std::int64_t, 3>;

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const noexcept {
        std::uint64_t h = 1469598103934665603ull;
        for (std::int64_t v : k) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

/// Componentwise floor(position / voxel_size). voxel_size must be > 0.
VoxelKey voxel_key(const Vec3& position, double voxel_size);

/// Growing global set of primitives plus the voxel-hash index used by
/// fusion. Mutation is single-writer; reads may be shared.
struct GaussianScene {
    std::vector<GaussianPrimitive> primitives;
    std::unordered_map<VoxelKey, std::vector<std::size_t>, VoxelKeyHash> voxel_index;
    double voxel_size = 0.05;
    int K = kDefaultLangDim;

    GaussianScene() = default;
    GaussianScene(int lang_dim, double vsize);

    std::size_t size() const { return primitives.size(); }
    bool empty() const { return primitives.empty(); }

    /// Validates and appends, keeping the index in sync.
    void add(const GaussianPrimitive& g);

    void rebuild_index();

    /// Every live primitive indexed exactly once, under the bucket matching
    /// voxel_key(mu), and bucket sizes sum to the primitive count.
    bool index_consistent() const;
};

}  // namespace ogs
