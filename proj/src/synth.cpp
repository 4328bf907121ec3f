#include "ogs/synth.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>

namespace ogs {

namespace {

double unit_draw(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double draw(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * unit_draw(rng);
}

Vec4 draw_quat(std::mt19937_64& rng) {
    Vec4 q;
    do {
        for (int i = 0; i < 4; ++i) q[i] = draw(rng, -1, 1);
    } while (q.norm() < 1e-3);
    q /= q.norm();
    return q[0] < 0 ? Vec4(-q) : q;
}

}  // namespace

CameraPose look_at_pose(const Vec3& eye, const Vec3& target) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 world_up(0, -1, 0);  // image y grows downward
    if (std::abs(forward.dot(world_up)) > 0.999) world_up = Vec3(0, 0, 1);
    const Vec3 right = world_up.cross(forward).normalized();
    const Vec3 down = forward.cross(right);
    CameraPose pose;
    pose.rotation.col(0) = right;
    pose.rotation.col(1) = down;
    pose.rotation.col(2) = forward;
    pose.translation = eye;
    return pose;
}

std::vector<CameraPose> orbit_poses(int count, double radius, double height, const Vec3& target,
                                    double arc_radians) {
    std::vector<CameraPose> poses;
    for (int i = 0; i < count; ++i) {
        const double a = count > 1 ? arc_radians * (i / (count - 1.0) - 0.5) : 0.0;
        const Vec3 eye = target + Vec3(radius * std::sin(a), height, -radius * std::cos(a));
        poses.push_back(look_at_pose(eye, target));
    }
    return poses;
}

void add_sphere_object(GaussianScene& scene, const Vec3& center, double radius, int count,
                       const VecX& lang, std::uint64_t seed, const Vec3& base_color) {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < count; ++i) {
        Vec3 dir;
        do {
            dir = Vec3(draw(rng, -1, 1), draw(rng, -1, 1), draw(rng, -1, 1));
        } while (dir.norm() < 1e-3 || dir.norm() > 1.0);
        dir.normalize();

        GaussianPrimitive g;
        g.mu = center + radius * dir;
        g.rot = draw_quat(rng);
        g.scale = Vec3::Constant(radius / 5.0) + 0.2 * radius / 5.0 * Vec3(unit_draw(rng), unit_draw(rng), unit_draw(rng));
        g.opacity = draw(rng, 0.7, 0.95);
        // octant checker texture
        const double checker = ((dir.x() > 0) + (dir.y() > 0) + (dir.z() > 0)) % 2 ? 1.0 : 0.45;
        g.color = (checker * base_color).cwiseMax(0.02).cwiseMin(1.0);
        g.lang = lang;
        g.confidence = draw(rng, 0.8, 1.6);
        scene.add(g);
    }
}

void add_box_object(GaussianScene& scene, const Vec3& center, const Vec3& half_extent, int count,
                    const VecX& lang, std::uint64_t seed, const Vec3& base_color) {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < count; ++i) {
        const int face = static_cast<int>(rng() % 6);
        const int axis = face / 2;
        const double sign = face % 2 ? 1.0 : -1.0;
        Vec3 p(draw(rng, -1, 1), draw(rng, -1, 1), draw(rng, -1, 1));
        p[axis] = sign;

        GaussianPrimitive g;
        g.mu = center + p.cwiseProduct(half_extent);
        g.rot = draw_quat(rng);
        g.scale = Vec3::Constant(half_extent.minCoeff() / 4.0 * draw(rng, 0.8, 1.2));
        g.opacity = draw(rng, 0.7, 0.95);
        const double shade = 0.5 + 0.5 * (face / 5.0);  // per-face shading
        g.color = (shade * base_color).cwiseMax(0.02).cwiseMin(1.0);
        g.lang = lang;
        g.confidence = draw(rng, 0.8, 1.6);
        scene.add(g);
    }
}

GaussianScene synth_objects_scene(int K, std::uint64_t seed, int per_object) {
    GaussianScene scene(K, 0.05);
    VecX lang_a = VecX::Zero(K), lang_b = VecX::Zero(K);
    lang_a[0] = 1.0;
    lang_b[K > 1 ? 1 : 0] = 1.0;
    add_sphere_object(scene, Vec3(-0.55, 0, 2.4), 0.32, per_object, lang_a, seed * 2 + 1,
                      Vec3(0.85, 0.3, 0.2));
    add_box_object(scene, Vec3(0.55, 0, 2.4), Vec3(0.28, 0.28, 0.28), per_object, lang_b,
                   seed * 2 + 2, Vec3(0.2, 0.4, 0.9));
    return scene;
}

SegFixture synth_seg_fixture(int K, std::uint64_t seed, int image_size) {
    SegFixture fx;
    fx.scene = synth_objects_scene(K, seed);
    fx.intrinsics = Intrinsics{0.9 * image_size, 0.9 * image_size, image_size / 2.0,
                               image_size / 2.0, image_size, image_size};
    fx.camera = CameraPose::identity();

    VecX emb_a = VecX::Zero(K), emb_b = VecX::Zero(K);
    emb_a[0] = 1.0;
    emb_b[K > 1 ? 1 : 0] = 1.0;
    fx.queries.push_back({"sphere", emb_a});
    fx.queries.push_back({"box", emb_b});

    // gt masks: per-object alpha footprint rendered in isolation
    for (int obj = 0; obj < 2; ++obj) {
        GaussianScene solo(fx.scene.K, fx.scene.voxel_size);
        for (const auto& g : fx.scene.primitives) {
            const bool is_a = g.lang[0] > 0.5;
            if ((obj == 0) == is_a) solo.add(g);
        }
        const RenderTarget rt = rasterize(solo, fx.camera, fx.intrinsics);
        Image mask(image_size, image_size, 1);
        for (std::size_t i = 0; i < mask.data.size(); ++i) {
            mask.data[i] = rt.alpha.data[i] > 0 ? 1.0 : 0.0;
        }
        fx.gt_masks.push_back(std::move(mask));
    }
    return fx;
}

StreamFixture synth_stream_fixture(int frame_count, int image_size, int K, std::uint64_t seed) {
    StreamFixture fx;
    fx.scene = synth_objects_scene(K, seed);
    fx.intrinsics = Intrinsics{0.9 * image_size, 0.9 * image_size, image_size / 2.0,
                               image_size / 2.0, image_size, image_size};
    const auto poses = orbit_poses(frame_count, 2.4, -0.2, Vec3(0, 0, 2.4));
    for (int i = 0; i < frame_count; ++i) {
        RenderOptions opts;
        opts.with_feature = false;
        fx.frames.push_back(rasterize(fx.scene, poses[i], fx.intrinsics, opts).color);
        fx.gt_trajectory.push_back(i + 1, poses[i]);
    }
    return fx;
}

GaussianScene random_scene_in_frustum(int count, int K, std::uint64_t seed,
                                      const Intrinsics& intr) {
    std::mt19937_64 rng(seed);
    GaussianScene scene(K, 0.05);
    for (int i = 0; i < count; ++i) {
        const double z = draw(rng, 1.6, 3.4);
        // stay inside the view frustum with a small margin
        const double x_span = 0.42 * z * intr.width / intr.fx;
        const double y_span = 0.42 * z * intr.height / intr.fy;
        GaussianPrimitive g;
        g.mu = Vec3(draw(rng, -x_span, x_span), draw(rng, -y_span, y_span), z);
        g.rot = draw_quat(rng);
        g.scale = Vec3(draw(rng, 0.04, 0.16), draw(rng, 0.04, 0.16), draw(rng, 0.04, 0.16));
        g.opacity = draw(rng, 0.3, 0.9);
        g.color = Vec3(draw(rng, 0.1, 0.9), draw(rng, 0.1, 0.9), draw(rng, 0.1, 0.9));
        g.lang = VecX::Zero(K);
        for (int k = 0; k < K; ++k) g.lang[k] = draw(rng, -1, 1);
        g.confidence = draw(rng, 0.5, 2.0);
        scene.add(g);
    }
    return scene;
}

}  // namespace ogs
