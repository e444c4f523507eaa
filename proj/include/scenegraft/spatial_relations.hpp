#pragma once

#include <cstddef>
#include <vector>

#include "scenegraft/geometry.hpp"
#include "scenegraft/rng.hpp"
#include "scenegraft/tensor.hpp"

namespace scenegraft {

// Normalized object-center coordinates, one row [x, y, z] in [0,1] per object.
struct GlobalRelations {
    Dense2 values;          // K x 3
    int clamped_count = 0;  // centers outside the scene box, clamped with a warning
};

// Per-pair geometry: [distance_m, sin th_h, cos th_h, sin th_v, cos th_v].
// th_h is the heading of the connecting line in the xy plane, th_v its
// elevation. Coincident or purely vertical pairs use sin=0, cos=1 for the
// undefined angle.
struct PairwiseRelations {
    Dense3 values;  // K x K x 5
};

// Min-max normalization of centers against the scene bounding box. A box axis
// with (near-)zero extent maps to 0.5 regardless of the center coordinate.
GlobalRelations global_relations(const std::vector<Vec3>& centers, const AxisBox& scene_box);

PairwiseRelations pairwise_relations(const std::vector<Vec3>& centers);

// Two affine layers (in_dim -> hidden -> out) with a rectifier between.
// `linear` mode skips the nonlinearity; used by composition tests.
struct SpatialMlpParams {
    Dense2 w1;  // in_dim x hidden
    std::vector<double> b1;
    Dense2 w2;  // hidden x out
    std::vector<double> b2;
    bool linear = false;

    std::size_t in_dim() const { return w1.rows; }
    std::size_t out_dim() const { return w2.cols; }

    static SpatialMlpParams zeros(std::size_t in, std::size_t hidden, std::size_t out);
    static SpatialMlpParams random(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng,
                                   double stddev = 0.1);
};

// Row-wise MLP application. Input rows must match params.in_dim().
Dense2 embed_spatial(const Dense2& relations, const SpatialMlpParams& params);

// Pairwise overload: K x K x 5 in, K x K x d out.
Dense3 embed_spatial(const Dense3& relations, const SpatialMlpParams& params);

}  // namespace scenegraft
