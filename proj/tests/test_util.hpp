#pragma once

#include "ogs/core.hpp"

#include <cstdint>
#include <random>

namespace ogs::test {

// Deterministic helpers shared across suites.

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    // Raw-bit construction keeps streams identical across standard libraries.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

inline Vec3 uniform_vec3(std::mt19937_64& rng, double lo, double hi) {
    return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

inline Vec4 random_unit_quat(std::mt19937_64& rng) {
    Vec4 q;
    do {
        for (int i = 0; i < 4; ++i) q[i] = uniform(rng, -1.0, 1.0);
    } while (q.norm() < 1e-3);
    q /= q.norm();
    return q[0] < 0 ? Vec4(-q) : q;
}

inline VecX random_lang(std::mt19937_64& rng, int K, double lo = -1.0, double hi = 1.0) {
    VecX v(K);
    for (int i = 0; i < K; ++i) v[i] = uniform(rng, lo, hi);
    return v;
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
    return quat_to_rotmat(random_unit_quat(rng));
}

}  // namespace ogs::test
