#include "scenegraft/spatial_relations.hpp"

#include <algorithm>
#include <cmath>

#include "scenegraft/errors.hpp"

namespace scenegraft {

namespace {
constexpr double kDegenerateExtent = 1e-12;
}

GlobalRelations global_relations(const std::vector<Vec3>& centers, const AxisBox& scene_box) {
    GlobalRelations out;
    const std::size_t k = centers.size();
    out.values = Dense2(k, 3);
    const Vec3 lo = scene_box.min();
    const Vec3 hi = scene_box.max();
    const double ext[3] = {hi.x - lo.x, hi.y - lo.y, hi.z - lo.z};
    const double mins[3] = {lo.x, lo.y, lo.z};
    for (std::size_t i = 0; i < k; ++i) {
        const double c[3] = {centers[i].x, centers[i].y, centers[i].z};
        for (int a = 0; a < 3; ++a) {
            if (ext[a] < kDegenerateExtent) {
                out.values(i, a) = 0.5;
                continue;
            }
            double v = (c[a] - mins[a]) / ext[a];
            if (v < 0.0 || v > 1.0) {
                ++out.clamped_count;
                v = std::clamp(v, 0.0, 1.0);
            }
            out.values(i, a) = v;
        }
    }
    return out;
}

PairwiseRelations pairwise_relations(const std::vector<Vec3>& centers) {
    const std::size_t k = centers.size();
    if (k == 0) throw ValidationError("pairwise_relations: need at least one center");
    PairwiseRelations out;
    out.values = Dense3(k, k, 5);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double dx = centers[j].x - centers[i].x;
            const double dy = centers[j].y - centers[i].y;
            const double dz = centers[j].z - centers[i].z;
            const double horiz = std::sqrt(dx * dx + dy * dy);
            const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
            double sin_h = 0.0, cos_h = 1.0, sin_v = 0.0, cos_v = 1.0;
            if (horiz > 0.0) {
                const double th_h = std::atan2(dy, dx);
                sin_h = std::sin(th_h);
                cos_h = std::cos(th_h);
            }
            if (dist > 0.0) {
                const double th_v = std::atan2(dz, horiz);
                sin_v = std::sin(th_v);
                cos_v = std::cos(th_v);
            }
            out.values(i, j, 0) = dist;
            out.values(i, j, 1) = sin_h;
            out.values(i, j, 2) = cos_h;
            out.values(i, j, 3) = sin_v;
            out.values(i, j, 4) = cos_v;
        }
    }
    return out;
}

SpatialMlpParams SpatialMlpParams::zeros(std::size_t in, std::size_t hidden, std::size_t out) {
    SpatialMlpParams p;
    p.w1 = Dense2(in, hidden);
    p.b1.assign(hidden, 0.0);
    p.w2 = Dense2(hidden, out);
    p.b2.assign(out, 0.0);
    return p;
}

SpatialMlpParams SpatialMlpParams::random(std::size_t in, std::size_t hidden, std::size_t out,
                                          Rng& rng, double stddev) {
    SpatialMlpParams p = zeros(in, hidden, out);
    for (double& v : p.w1.data) v = rng.normal(0.0, stddev);
    for (double& v : p.w2.data) v = rng.normal(0.0, stddev);
    for (double& v : p.b1) v = rng.normal(0.0, stddev);
    for (double& v : p.b2) v = rng.normal(0.0, stddev);
    return p;
}

Dense2 embed_spatial(const Dense2& relations, const SpatialMlpParams& params) {
    if (relations.cols != params.in_dim()) {
        throw ValidationError("embed_spatial: relation width " + std::to_string(relations.cols) +
                              " does not match mlp input " + std::to_string(params.in_dim()));
    }
    Dense2 h = matmul(relations, params.w1);
    for (std::size_t i = 0; i < h.rows; ++i)
        for (std::size_t j = 0; j < h.cols; ++j) {
            h(i, j) += params.b1[j];
            if (!params.linear && h(i, j) < 0.0) h(i, j) = 0.0;
        }
    Dense2 out = matmul(h, params.w2);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += params.b2[j];
    return out;
}

Dense3 embed_spatial(const Dense3& relations, const SpatialMlpParams& params) {
    Dense2 flat = embed_spatial(relations.as_matrix(), params);
    Dense3 out(relations.d0, relations.d1, params.out_dim());
    out.data = std::move(flat.data);
    return out;
}

}  // namespace scenegraft
