#pragma once

#include "ogs/core.hpp"
#include "ogs/eval.hpp"
#include "ogs/image.hpp"
#include "ogs/render.hpp"

#include <cstdint>
#include <vector>

namespace ogs {

/// Deterministic test-fixture generators: textured spheres and boxes built
/// from Gaussians with known poses and language labels. All CLI fixtures and
/// acceptance scenes come from here, so no dataset is required.

/// Camera on a circle of `radius` at `height`, looking at `target`.
/// Convention: x right, y down, z forward (image y grows downward).
CameraPose look_at_pose(const Vec3& eye, const Vec3& target);
std::vector<CameraPose> orbit_poses(int count, double radius, double height, const Vec3& target,
                                    double arc_radians = 1.2);

/// Sphere shell of Gaussians, colored in an octant pattern, constant
/// language label.
void add_sphere_object(GaussianScene& scene, const Vec3& center, double radius, int count,
                       const VecX& lang, std::uint64_t seed, const Vec3& base_color);

/// Box surface of Gaussians with per-face shading, constant language label.
void add_box_object(GaussianScene& scene, const Vec3& center, const Vec3& half_extent, int count,
                    const VecX& lang, std::uint64_t seed, const Vec3& base_color);

/// A sphere and a box side by side with orthogonal language directions.
GaussianScene synth_objects_scene(int K, std::uint64_t seed, int per_object = 400);

struct SegFixture {
    GaussianScene scene;
    CameraPose camera;
    Intrinsics intrinsics;
    std::vector<TextQuery> queries;
    std::vector<Image> gt_masks;  // one per query, from per-object footprints
};

/// Two-object scene whose screen footprints do not overlap; gt masks are the
/// per-object alpha footprints, which the cosine query reproduces exactly.
SegFixture synth_seg_fixture(int K, std::uint64_t seed, int image_size = 96);

struct StreamFixture {
    std::vector<Image> frames;   // rendered orbit views
    Trajectory gt_trajectory;    // camera poses used, 1-based
    Intrinsics intrinsics;
    GaussianScene scene;         // the generating scene
};

/// Orbit renders of a textured scene, for reconstruct/eval fixtures.
StreamFixture synth_stream_fixture(int frame_count, int image_size, int K, std::uint64_t seed);

/// Random primitives inside the frustum of `intr` at depth [1.5, 3.5];
/// used as optimizer initialization and for randomized render tests.
GaussianScene random_scene_in_frustum(int count, int K, std::uint64_t seed,
                                      const Intrinsics& intr);

}  // namespace ogs
