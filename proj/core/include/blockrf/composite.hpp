#pragma once

#include <array>
#include <span>

#include "blockrf/shader.hpp"
#include "blockrf/volume.hpp"

namespace blockrf {

/// Inter-block blend of depth-ordered segments. `color` blends the shaded colors;
/// `diffuse` and `feature` blend the premultiplied channels with the same weights.
struct CompositeResult {
    Vec3 color;
    Vec3 diffuse;
    std::array<double, 4> feature{};
    double alpha = 0.0;
};

/// C = sum_k prod_{j<k}(1 - alpha_j) C_k, likewise for opacity. Segments must be
/// front to back. Throws InvalidArgument for an opacity outside [0, 1].
CompositeResult composite_blocks(std::span<const RaySegmentResult> segments);

/// C = clamp(C_d + residual(C_d, F, PE(d)), 0, 1). Throws InvalidArgument for
/// non-finite weights.
Vec3 deferred_shade(const RaySegmentResult& seg, const Vec3& view_dir,
                    const DeferredShaderWeights& weights);

}  // namespace blockrf
