#include "ogs/formats.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>

using namespace ogs;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "ogs_format_tests";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

GaussianScene random_scene(std::mt19937_64& rng, int n, int K = 16) {
    GaussianScene scene(K, 0.05);
    for (int i = 0; i < n; ++i) {
        GaussianPrimitive g;
        g.mu = test::uniform_vec3(rng, -1, 1);
        g.rot = test::random_unit_quat(rng);
        g.scale = test::uniform_vec3(rng, 0.01, 0.3);
        g.opacity = test::uniform(rng, 0.0, 1.0);
        g.color = test::uniform_vec3(rng, 0, 1);
        g.lang = test::random_lang(rng, K);
        g.confidence = test::uniform(rng, 0.5, 4.0);
        scene.add(g);
    }
    return scene;
}

}  // namespace

TEST_CASE("OGS scene write/read/write is byte-identical") {
    std::mt19937_64 rng(101);
    const auto scene = random_scene(rng, 50);
    const auto dir = temp_dir();
    write_scene(dir / "a.ogs", scene);
    const auto loaded = read_scene(dir / "a.ogs");
    CHECK(loaded.size() == scene.size());
    CHECK(loaded.K == scene.K);
    CHECK(loaded.index_consistent());
    write_scene(dir / "b.ogs", loaded);
    CHECK(slurp(dir / "a.ogs") == slurp(dir / "b.ogs"));
}

TEST_CASE("OGS reader rejects junk") {
    const auto dir = temp_dir();
    write_text_file(dir / "junk.ogs", "not a scene at all");
    CHECK_THROWS_AS(read_scene(dir / "junk.ogs"), IoError);
    CHECK_THROWS_AS(read_scene(dir / "missing_file.ogs"), IoError);
}

TEST_CASE("PPM and PGM round trips") {
    const auto dir = temp_dir();
    std::mt19937_64 rng(7);
    Image rgb(13, 9, 3);
    for (double& v : rgb.data) v = test::uniform(rng, 0, 1);
    write_ppm(dir / "a.ppm", rgb);
    const Image back = read_ppm(dir / "a.ppm");
    write_ppm(dir / "b.ppm", back);
    CHECK(slurp(dir / "a.ppm") == slurp(dir / "b.ppm"));
    CHECK(back.height == 13);
    CHECK(back.width == 9);

    Image gray(8, 8, 1);
    for (double& v : gray.data) v = test::uniform(rng, 0, 1);
    write_pgm(dir / "a.pgm", gray);
    const Image gback = read_pgm(dir / "a.pgm");
    write_pgm(dir / "b.pgm", gback);
    CHECK(slurp(dir / "a.pgm") == slurp(dir / "b.pgm"));
}

TEST_CASE("feature planes round trip byte-identically") {
    const auto dir = temp_dir();
    std::mt19937_64 rng(21);
    Image feat(6, 5, 16);
    for (double& v : feat.data) v = test::uniform(rng, -2, 2);
    write_feature_planes(dir / "a.feat", feat);
    const Image back = read_feature_planes(dir / "a.feat");
    write_feature_planes(dir / "b.feat", back);
    CHECK(slurp(dir / "a.feat") == slurp(dir / "b.feat"));
    CHECK(back.channels == 16);
}

TEST_CASE("TUM trajectory round trip is byte-identical") {
    const auto dir = temp_dir();
    std::mt19937_64 rng(33);
    Trajectory traj;
    for (int i = 1; i <= 12; ++i) {
        CameraPose p;
        p.rotation = test::random_rotation(rng);
        p.translation = test::uniform_vec3(rng, -3, 3);
        traj.push_back(i, p);
    }
    write_tum(dir / "a.tum", traj);
    const Trajectory back = read_tum(dir / "a.tum");
    CHECK(back.size() == traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
        CHECK((back.poses[i].rotation - traj.poses[i].rotation).cwiseAbs().maxCoeff() < 1e-12);
    }
    write_tum(dir / "b.tum", back);
    CHECK(slurp(dir / "a.tum") == slurp(dir / "b.tum"));
}

TEST_CASE("TUM reader reports the offending line") {
    const auto dir = temp_dir();
    write_text_file(dir / "bad.tum", "1 0 0 0 0 0 0 1\nnot a pose line\n");
    CHECK_THROWS_WITH_AS(read_tum(dir / "bad.tum"),
                         doctest::Contains("bad.tum:2"), IoError);
}

TEST_CASE("PNG export writes a parseable signature") {
    const auto dir = temp_dir();
    Image rgb(4, 4, 3, 0.5);
    write_png(dir / "a.png", rgb);
    const std::string data = slurp(dir / "a.png");
    CHECK(data.size() > 8);
    CHECK(data.compare(1, 3, "PNG") == 0);
}
