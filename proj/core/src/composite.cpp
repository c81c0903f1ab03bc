#include "blockrf/composite.hpp"

#include <algorithm>
#include <cmath>

#include "blockrf/error.hpp"

namespace blockrf {

namespace {
constexpr double kOpacitySlack = 1e-9;
}  // namespace

CompositeResult composite_blocks(std::span<const RaySegmentResult> segments) {
    CompositeResult out;
    double transmittance = 1.0;
    for (const RaySegmentResult& s : segments) {
        // Summed sample weights may overshoot 1 by rounding.
        if (!(s.alpha >= -kOpacitySlack && s.alpha <= 1.0 + kOpacitySlack))
            throw InvalidArgument("composite_blocks: segment opacity outside [0, 1]");
        const double alpha = std::clamp(s.alpha, 0.0, 1.0);
        out.color += s.color * transmittance;
        out.diffuse += s.diffuse * transmittance;
        for (int c = 0; c < 4; ++c) out.feature[c] += transmittance * s.feature[c];
        out.alpha += transmittance * alpha;
        transmittance *= 1.0 - alpha;
    }
    return out;
}

Vec3 deferred_shade(const RaySegmentResult& seg, const Vec3& view_dir,
                    const DeferredShaderWeights& weights) {
    weights.validate();
    const Vec3 r = shader_residual(weights, seg.diffuse, seg.feature, view_dir);
    Vec3 c = seg.diffuse + r;
    for (int i = 0; i < 3; ++i) c[i] = std::clamp(c[i], 0.0, 1.0);
    return c;
}

}  // namespace blockrf
