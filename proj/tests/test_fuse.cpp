#include "ogs/fuse.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace ogs;

namespace {

GaussianPrimitive make_primitive(const Vec3& mu, double confidence, int K = 16) {
    GaussianPrimitive g;
    g.mu = mu;
    g.lang = VecX::Zero(K);
    g.confidence = confidence;
    return g;
}

// Naive dense-layer oracle, independently coded with raw loops.
VecX mlp_oracle(const FusionMlp& mlp, const VecX& in) {
    VecX h(mlp.w1.rows());
    for (int i = 0; i < mlp.w1.rows(); ++i) {
        double s = mlp.b1[i];
        for (int j = 0; j < mlp.w1.cols(); ++j) s += mlp.w1(i, j) * in[j];
        h[i] = s > 0 ? s : 0;
    }
    VecX out(mlp.w2.rows());
    for (int i = 0; i < mlp.w2.rows(); ++i) {
        double s = mlp.b2[i];
        for (int j = 0; j < mlp.w2.cols(); ++j) s += mlp.w2(i, j) * h[j];
        out[i] = s;
    }
    return out;
}

FusionMlp random_mlp(std::mt19937_64& rng, int F, int hidden) {
    FusionMlp mlp;
    mlp.w1 = MatX::Zero(hidden, 2 * F);
    mlp.b1 = VecX::Zero(hidden);
    mlp.w2 = MatX::Zero(F, hidden);
    mlp.b2 = VecX::Zero(F);
    for (int i = 0; i < hidden; ++i)
        for (int j = 0; j < 2 * F; ++j) mlp.w1(i, j) = test::uniform(rng, -0.5, 0.5);
    for (int i = 0; i < F; ++i)
        for (int j = 0; j < hidden; ++j) mlp.w2(i, j) = test::uniform(rng, -0.5, 0.5);
    for (int i = 0; i < hidden; ++i) mlp.b1[i] = test::uniform(rng, -0.2, 0.2);
    for (int i = 0; i < F; ++i) mlp.b2[i] = test::uniform(rng, -0.2, 0.2);
    return mlp;
}

}  // namespace

TEST_CASE("fuse_center basic weighted means") {
    CHECK((fuse_center(Vec3(0, 0, 0), 1.0, {Vec3(1, 0, 0)}, {1.0}) - Vec3(0.5, 0, 0)).norm() < 1e-15);
    CHECK((fuse_center(Vec3(0, 0, 0), 3.0, {Vec3(4, 0, 0)}, {1.0}) - Vec3(1, 0, 0)).norm() < 1e-15);
    // empty neighborhood is the identity case
    CHECK((fuse_center(Vec3(2, 3, 4), 0.7, {}, {}) - Vec3(2, 3, 4)).norm() == 0.0);
}

TEST_CASE("fuse_center matches a direct oracle and stays in the convex hull") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3 x = test::uniform_vec3(rng, -1, 1);
        const double c = test::uniform(rng, 0.1, 3.0);
        std::vector<Vec3> pos;
        std::vector<double> conf;
        const int n = 1 + static_cast<int>(rng() % 5);
        for (int i = 0; i < n; ++i) {
            pos.push_back(test::uniform_vec3(rng, -1, 1));
            conf.push_back(test::uniform(rng, 0.1, 3.0));
        }
        const Vec3 fused = fuse_center(x, c, pos, conf);

        Vec3 num = c * x;
        double den = c;
        for (int i = 0; i < n; ++i) {
            num += conf[i] * pos[i];
            den += conf[i];
        }
        CHECK((fused - num / den).norm() < 1e-12);

        // convex hull membership via axis-aligned bounds (necessary condition)
        // plus barycentric weights summing to one by construction.
        for (int a = 0; a < 3; ++a) {
            double lo = x[a], hi = x[a];
            for (const auto& p : pos) {
                lo = std::min(lo, p[a]);
                hi = std::max(hi, p[a]);
            }
            CHECK(fused[a] >= lo - 1e-12);
            CHECK(fused[a] <= hi + 1e-12);
        }
    }
}

TEST_CASE("identity MLP passes features through") {
    std::mt19937_64 rng(23);
    const int F = 7;
    const auto mlp = FusionMlp::identity(F);
    for (int i = 0; i < 20; ++i) {
        const VecX g = test::random_lang(rng, F, -2, 2);
        const VecX pooled = test::random_lang(rng, F, -2, 2);
        VecX in(2 * F);
        in << g, pooled;
        CHECK((mlp.forward(in) - g).norm() < 1e-12);
    }
}

TEST_CASE("fuse_features pools by confidence and applies the MLP") {
    const int F = 4;
    const auto mlp = FusionMlp::identity(F);

    SUBCASE("pass-through on the incoming feature") {
        VecX g(F);
        g << 1, -2, 3, -4;
        const VecX out = fuse_features(g, {VecX::Ones(F)}, {1.0}, mlp);
        CHECK((out - g).norm() < 1e-12);
    }

    SUBCASE("pooled feature is the confidence-weighted mean") {
        // Neighbors (1,0,0,0) and (0,1,0,0) with confidences 1 and 3:
        // pooled = (0.25, 0.75, 0, 0). Expose it via an MLP that forwards
        // the second half of its input.
        FusionMlp tail = FusionMlp::identity(F);
        // swap which half passes through
        tail.w1.setZero();
        tail.w2.setZero();
        for (int i = 0; i < F; ++i) {
            tail.w1(i, F + i) = 1.0;
            tail.w1(F + i, F + i) = -1.0;
            tail.w2(i, i) = 1.0;
            tail.w2(i, F + i) = -1.0;
        }
        VecX a = VecX::Zero(F), b = VecX::Zero(F);
        a[0] = 1;
        b[1] = 1;
        const VecX out = fuse_features(VecX::Zero(F), {a, b}, {1.0, 3.0}, tail);
        CHECK(out[0] == doctest::Approx(0.25));
        CHECK(out[1] == doctest::Approx(0.75));
        CHECK(std::abs(out[2]) < 1e-15);
    }

    SUBCASE("dimension mismatch is rejected") {
        CHECK_THROWS_AS(fuse_features(VecX::Zero(5), {}, {}, mlp), std::invalid_argument);
    }
}

TEST_CASE("fuse_features matches the independent dense oracle") {
    std::mt19937_64 rng(29);
    const int F = 6;
    for (int trial = 0; trial < 50; ++trial) {
        const auto mlp = random_mlp(rng, F, 9);
        const VecX g = test::random_lang(rng, F);
        std::vector<VecX> nf;
        std::vector<double> nc;
        const int n = static_cast<int>(rng() % 4);
        for (int i = 0; i < n; ++i) {
            nf.push_back(test::random_lang(rng, F));
            nc.push_back(test::uniform(rng, 0.2, 2.0));
        }
        const VecX got = fuse_features(g, nf, nc, mlp);

        VecX pooled = VecX::Zero(F);
        double den = 0;
        for (int i = 0; i < n; ++i) {
            pooled += nc[i] * nf[i];
            den += nc[i];
        }
        if (den > 0) pooled /= den;
        VecX in(2 * F);
        in << g, pooled;
        CHECK((got - mlp_oracle(mlp, in)).norm() < 1e-6);
    }
}

TEST_CASE("integrate_frame appends into empty voxels") {
    GaussianScene scene(16, 0.05);
    const auto mlp = FusionMlp::identity(11 + 16);
    const auto report = integrate_frame(scene, {make_primitive(Vec3(0.2, 0.2, 0.2), 1.0)}, mlp);
    CHECK(scene.size() == 1);
    CHECK(report.merged == 0);
    CHECK(report.appended == 1);
    CHECK(scene.index_consistent());
}

TEST_CASE("identical primitive with identity MLP doubles confidence only") {
    GaussianScene scene(16, 0.05);
    const auto mlp = FusionMlp::identity(11 + 16);
    const auto g = make_primitive(Vec3(0.012, 0.012, 0.012), 1.5);
    integrate_frame(scene, {g}, mlp);
    const auto report = integrate_frame(scene, {g}, mlp);
    CHECK(scene.size() == 1);
    CHECK(report.merged == 1);
    CHECK(report.absorbed == 1);
    CHECK((scene.primitives[0].mu - g.mu).norm() < 1e-12);
    CHECK(scene.primitives[0].confidence == doctest::Approx(3.0));
    CHECK(scene.index_consistent());

    // geometry is idempotent under repeated integration
    integrate_frame(scene, {g}, mlp);
    CHECK(scene.size() == 1);
    CHECK((scene.primitives[0].mu - g.mu).norm() < 1e-12);
    CHECK(scene.primitives[0].confidence == doctest::Approx(4.5));
}

TEST_CASE("confidence is conserved and counts never grow past scene + new") {
    std::mt19937_64 rng(37);
    const int K = 8;
    const int F = 11 + K;
    GaussianScene scene(K, 0.25);
    const auto mlp = random_mlp(rng, F, F);

    double total_confidence = 0;
    std::size_t total_new = 0;
    for (int frame = 0; frame < 6; ++frame) {
        std::vector<GaussianPrimitive> batch;
        for (int i = 0; i < 40; ++i) {
            GaussianPrimitive g;
            g.mu = test::uniform_vec3(rng, -0.5, 0.5);
            g.rot = test::random_unit_quat(rng);
            g.scale = test::uniform_vec3(rng, 0.01, 0.1);
            g.opacity = test::uniform(rng, 0, 1);
            g.color = test::uniform_vec3(rng, 0, 1);
            g.lang = test::random_lang(rng, K);
            g.confidence = test::uniform(rng, 0.5, 2.0);
            total_confidence += g.confidence;
            batch.push_back(g);
        }
        const std::size_t before = scene.size();
        integrate_frame(scene, batch, mlp);
        total_new += batch.size();
        CHECK(scene.size() <= before + batch.size());
        CHECK(scene.index_consistent());
    }
    CHECK(scene.size() < total_new);  // overlapping voxels must have merged

    double scene_confidence = 0;
    for (const auto& g : scene.primitives) scene_confidence += g.confidence;
    CHECK(scene_confidence == doctest::Approx(total_confidence).epsilon(1e-9));
}

TEST_CASE("overlapping synthetic frames merge into fewer primitives") {
    const int K = 4;
    GaussianScene scene(K, 0.05);
    const auto mlp = FusionMlp::identity(11 + K);

    // 5 frames sweep a line of anchor points with 60% overlap between
    // consecutive frames.
    std::size_t emitted = 0;
    for (int frame = 0; frame < 5; ++frame) {
        std::vector<GaussianPrimitive> batch;
        for (int i = 0; i < 10; ++i) {
            const int cell = frame * 4 + i;  // 6 of 10 cells shared with the previous frame
            batch.push_back(make_primitive(Vec3(0.05 * cell + 0.01, 0.01, 0.01), 1.0, K));
        }
        emitted += batch.size();
        integrate_frame(scene, batch, mlp);
    }
    CHECK(scene.size() < emitted);
    CHECK(scene.size() == 26);  // distinct cells touched
    // every center stays inside the union of its contributors' cells
    for (const auto& g : scene.primitives) {
        CHECK(g.mu.x() >= 0.0);
        CHECK(g.mu.x() <= 0.05 * 26);
    }
    CHECK(scene.index_consistent());
}
