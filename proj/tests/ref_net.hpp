#pragma once

// Straight-line reference implementations of the transformer pieces, written
// with plain elementwise loops and kept independent of the production path.

#include "ogs/net.hpp"

#include <cmath>
#include <vector>

namespace ogs::test {

inline MatX ref_layer_norm(const MatX& x, const LayerNormParams& p) {
    MatX out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double mean = 0;
        for (Eigen::Index c = 0; c < x.cols(); ++c) mean += x(r, c);
        mean /= static_cast<double>(x.cols());
        double var = 0;
        for (Eigen::Index c = 0; c < x.cols(); ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
        var /= static_cast<double>(x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            out(r, c) = (x(r, c) - mean) / std::sqrt(var + 1e-5) * p.gamma[c] + p.beta[c];
        }
    }
    return out;
}

inline MatX ref_linear(const MatX& x, const MatX& w, const VecX& b) {
    MatX out(x.rows(), w.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index o = 0; o < w.rows(); ++o) {
            double s = b[o];
            for (Eigen::Index c = 0; c < x.cols(); ++c) s += w(o, c) * x(r, c);
            out(r, o) = s;
        }
    return out;
}

inline MatX ref_mha(const MatX& queries, const MatX& context, const AttentionParams& p,
                    int heads) {
    const Eigen::Index d = p.wq.rows();
    const Eigen::Index dh = d / heads;
    const MatX Q = ref_linear(queries, p.wq, p.bq);
    const MatX K = ref_linear(context, p.wk, p.bk);
    const MatX V = ref_linear(context, p.wv, p.bv);

    MatX mixed(queries.rows(), d);
    for (int h = 0; h < heads; ++h) {
        for (Eigen::Index qi = 0; qi < Q.rows(); ++qi) {
            std::vector<double> scores(K.rows());
            double mx = -1e300;
            for (Eigen::Index ki = 0; ki < K.rows(); ++ki) {
                double s = 0;
                for (Eigen::Index c = 0; c < dh; ++c) s += Q(qi, h * dh + c) * K(ki, h * dh + c);
                scores[ki] = s / std::sqrt(static_cast<double>(dh));
                mx = std::max(mx, scores[ki]);
            }
            double sum = 0;
            for (auto& s : scores) {
                s = std::exp(s - mx);
                sum += s;
            }
            for (Eigen::Index c = 0; c < dh; ++c) {
                double acc = 0;
                for (Eigen::Index ki = 0; ki < K.rows(); ++ki) {
                    acc += scores[ki] / sum * V(ki, h * dh + c);
                }
                mixed(qi, h * dh + c) = acc;
            }
        }
    }
    return ref_linear(mixed, p.wo, p.bo);
}

inline MatX ref_block(const MatX& queries, const MatX& context, const BlockParams& p, int heads) {
    MatX x = queries + ref_mha(ref_layer_norm(queries, p.ln1), context, p.attn, heads);
    MatX h = ref_linear(ref_layer_norm(x, p.ln2), p.ff_w1, p.ff_b1);
    for (Eigen::Index i = 0; i < h.rows(); ++i)
        for (Eigen::Index j = 0; j < h.cols(); ++j) {
            h(i, j) = 0.5 * h(i, j) * (1.0 + std::erf(h(i, j) / std::sqrt(2.0)));
        }
    return x + ref_linear(h, p.ff_w2, p.ff_b2);
}

}  // namespace ogs::test
