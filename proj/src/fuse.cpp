#include "ogs/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ogs {

VecX FusionMlp::forward(const VecX& input) const {
    if (input.size() != w1.cols()) {
        throw std::invalid_argument("FusionMlp: input width does not match W1");
    }
    if (w2.cols() != w1.rows() || b1.size() != w1.rows() || b2.size() != w2.rows()) {
        throw std::invalid_argument("FusionMlp: inconsistent layer shapes");
    }
    const VecX h = ((w1 * input + b1).array().max(0.0)).matrix();
    return w2 * h + b2;
}

FusionMlp FusionMlp::identity(int F) {
    FusionMlp mlp;
    mlp.w1 = MatX::Zero(2 * F, 2 * F);
    mlp.b1 = VecX::Zero(2 * F);
    mlp.w2 = MatX::Zero(F, 2 * F);
    mlp.b2 = VecX::Zero(F);
    for (int i = 0; i < F; ++i) {
        mlp.w1(i, i) = 1.0;
        mlp.w1(F + i, i) = -1.0;
        mlp.w2(i, i) = 1.0;
        mlp.w2(i, F + i) = -1.0;
    }
    return mlp;
}

Vec3 fuse_center(const Vec3& x_t, double c_t, const std::vector<Vec3>& neighbor_positions,
                 const std::vector<double>& neighbor_confidences) {
    if (!(c_t > 0)) throw std::invalid_argument("fuse_center: confidence must be positive");
    if (neighbor_positions.size() != neighbor_confidences.size()) {
        throw std::invalid_argument("fuse_center: positions/confidences size mismatch");
    }
    if (neighbor_positions.empty()) return x_t;
    Vec3 num = c_t * x_t;
    double den = c_t;
    for (std::size_t i = 0; i < neighbor_positions.size(); ++i) {
        num += neighbor_confidences[i] * neighbor_positions[i];
        den += neighbor_confidences[i];
    }
    return num / den;
}

VecX fuse_features(const VecX& g_t, const std::vector<VecX>& neighbor_features,
                   const std::vector<double>& neighbor_confidences, const FusionMlp& mlp) {
    const int F = static_cast<int>(g_t.size());
    if (mlp.w1.cols() != 2 * F || mlp.feature_dim() != F) {
        throw std::invalid_argument("fuse_features: feature width does not match the MLP");
    }
    if (neighbor_features.size() != neighbor_confidences.size()) {
        throw std::invalid_argument("fuse_features: features/confidences size mismatch");
    }
    VecX pooled = VecX::Zero(F);
    double den = 0.0;
    for (std::size_t i = 0; i < neighbor_features.size(); ++i) {
        if (neighbor_features[i].size() != F) {
            throw std::invalid_argument("fuse_features: neighbor feature width mismatch");
        }
        pooled += neighbor_confidences[i] * neighbor_features[i];
        den += neighbor_confidences[i];
    }
    if (den > 0) pooled /= den;
    VecX input(2 * F);
    input << g_t, pooled;
    return mlp.forward(input);
}

VecX attribute_vector(const GaussianPrimitive& g) {
    VecX v(11 + g.lang.size());
    v << g.scale, g.rot, g.opacity, g.color, g.lang;
    return v;
}

void apply_attribute_vector(GaussianPrimitive& g, const VecX& attrs, int K) {
    if (attrs.size() != 11 + K) {
        throw std::invalid_argument("apply_attribute_vector: width must be 11 + K");
    }
    g.scale = attrs.segment<3>(0).cwiseMax(1e-6);
    g.rot = quat_normalized(Vec4(attrs.segment<4>(3)));
    g.opacity = std::clamp(attrs[7], 0.0, 1.0);
    g.color = attrs.segment<3>(8).cwiseMax(0.0).cwiseMin(1.0);
    g.lang = attrs.tail(K);
}

FusionReport integrate_frame(GaussianScene& scene, const std::vector<GaussianPrimitive>& incoming,
                             const FusionMlp& mlp) {
    const int K = scene.K;
    const int F = 11 + K;
    if (mlp.w1.cols() != 2 * F || mlp.feature_dim() != F) {
        throw std::invalid_argument("integrate_frame: MLP width does not match 11 + K");
    }
    FusionReport report;
    report.incoming = incoming.size();

    // Neighborhood lookups see only pre-frame content: primitives of the
    // same batch never fuse with each other, and an absorbed neighbor is
    // consumed by exactly one merge.
    std::vector<char> dead(scene.primitives.size(), 0);
    std::vector<GaussianPrimitive> staged;
    for (const GaussianPrimitive& g : incoming) {
        g.validate(K);
        const VoxelKey key = voxel_key(g.mu, scene.voxel_size);
        std::vector<std::size_t> nbrs;
        if (auto it = scene.voxel_index.find(key); it != scene.voxel_index.end()) {
            for (std::size_t idx : it->second) {
                if (dead[idx]) continue;
                nbrs.push_back(idx);
            }
        }
        if (nbrs.empty()) {
            staged.push_back(g);
            ++report.appended;
            continue;
        }

        std::vector<Vec3> positions;
        std::vector<VecX> features;
        std::vector<double> confidences;
        positions.reserve(nbrs.size());
        features.reserve(nbrs.size());
        confidences.reserve(nbrs.size());
        double conf_sum = 0.0;
        for (std::size_t idx : nbrs) {
            const GaussianPrimitive& n = scene.primitives[idx];
            positions.push_back(n.mu);
            features.push_back(attribute_vector(n));
            confidences.push_back(n.confidence);
            conf_sum += n.confidence;
        }

        GaussianPrimitive fused = g;
        fused.mu = fuse_center(g.mu, g.confidence, positions, confidences);
        const VecX attrs = fuse_features(attribute_vector(g), features, confidences, mlp);
        apply_attribute_vector(fused, attrs, K);
        fused.confidence = g.confidence + conf_sum;

        for (std::size_t idx : nbrs) dead[idx] = 1;
        report.absorbed += nbrs.size();
        ++report.merged;
        staged.push_back(std::move(fused));
    }

    // Commit: drop absorbed primitives, append the staged batch, re-index.
    if (report.absorbed > 0) {
        std::vector<GaussianPrimitive> live;
        live.reserve(scene.primitives.size() - report.absorbed + staged.size());
        for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
            if (!dead[i]) live.push_back(std::move(scene.primitives[i]));
        }
        scene.primitives = std::move(live);
        for (auto& g : staged) scene.primitives.push_back(std::move(g));
        scene.rebuild_index();
    } else {
        for (auto& g : staged) {
            scene.voxel_index[voxel_key(g.mu, scene.voxel_size)].push_back(scene.primitives.size());
            scene.primitives.push_back(std::move(g));
        }
    }
    return report;
}

}  // namespace ogs
