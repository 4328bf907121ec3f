#pragma once

#include "ogs/core.hpp"

#include <cstddef>
#include <vector>

namespace ogs {

/// Existing primitives sharing a voxel with an incoming one, with their
/// confidences as fusion weights. pooled_feature is meaningful only when
/// indices is nonempty.
struct FusionNeighborhood {
    std::vector<std::size_t> indices;
    std::vector<double> weights;
    VecX pooled_feature;
};

/// Two dense layers with a rectifier in between; input width 2F (the
/// concatenation of the incoming feature and the pooled neighbor feature),
/// output width F.
struct FusionMlp {
    MatX w1;  // hidden x 2F
    VecX b1;
    MatX w2;  // F x hidden
    VecX b2;

    int feature_dim() const { return static_cast<int>(w2.rows()); }
    int hidden_dim() const { return static_cast<int>(w1.rows()); }

    VecX forward(const VecX& input) const;

    /// Passes the first F inputs through unchanged (hidden width 2F,
    /// rectifier pairs ReLU(x) - ReLU(-x)).
    static FusionMlp identity(int F);
};

/// Confidence-weighted center merge. Empty neighborhood returns x_t.
Vec3 fuse_center(const Vec3& x_t, double c_t, const std::vector<Vec3>& neighbor_positions,
                 const std::vector<double>& neighbor_confidences);

/// Confidence-weighted neighbor pooling followed by the fusion MLP on
/// [g_t, pooled]. Empty neighborhood pools the zero vector.
VecX fuse_features(const VecX& g_t, const std::vector<VecX>& neighbor_features,
                   const std::vector<double>& neighbor_confidences, const FusionMlp& mlp);

struct FusionReport {
    std::size_t incoming = 0;
    std::size_t merged = 0;             // new primitives fused into a neighborhood
    std::size_t absorbed = 0;           // existing primitives removed by merges
    std::size_t appended = 0;           // new primitives with empty neighborhoods
};

/// Attribute vector used as the fusion latent in the default wiring:
/// [scale(3), rot(4), opacity(1), color(3), lang(K)], F = 11 + K.
VecX attribute_vector(const GaussianPrimitive& g);

/// Inverse of attribute_vector with domain sanitation: quaternion
/// renormalized, scale floored at 1e-6, opacity and color clamped to [0,1].
void apply_attribute_vector(GaussianPrimitive& g, const VecX& attrs, int K);

/// Fuses a batch of new primitives into the scene: each one merges with all
/// existing primitives in its voxel (centers by confidence-weighted mean,
/// attributes through the MLP, confidences summed, neighbors absorbed) or is
/// appended unchanged when its voxel is empty. New primitives are folded
/// sequentially, so later ones can meet the fused results of earlier ones.
FusionReport integrate_frame(GaussianScene& scene, const std::vector<GaussianPrimitive>& incoming,
                             const FusionMlp& mlp);

}  // namespace ogs
