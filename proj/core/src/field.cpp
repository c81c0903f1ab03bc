#include "blockrf/field.hpp"

#include <algorithm>
#include <cmath>

namespace blockrf {

std::array<double, kChannels> field_pre_activations(const FieldSample& s,
                                                    const QuantizationSpec& quant) {
    std::array<double, kChannels> out{};
    const ChannelRange& dr = quant.ranges[kDensityChannel];
    out[kDensityChannel] = s.sigma > 0.0 ? std::clamp(std::log(s.sigma), dr.lo, dr.hi) : dr.lo;
    for (int c = 0; c < 3; ++c) out[kDiffuseChannel + c] = s.diffuse_pre[c];
    for (int c = 0; c < 4; ++c) out[kFeatureChannel + c] = s.feature_pre[c];
    return out;
}

Attributes field_attributes(const FieldSample& s) {
    Attributes a;
    a.sigma = std::min(std::max(s.sigma, 0.0), kSigmaMax);
    for (int c = 0; c < 3; ++c) a.diffuse[c] = sigmoid(s.diffuse_pre[c]);
    for (int c = 0; c < 4; ++c) a.feature[c] = sigmoid(s.feature_pre[c]);
    return a;
}

FieldBlock::FieldBlock(const FieldSource& field, const BlockId& id, BlockGeometry geometry,
                       std::shared_ptr<const DeferredShaderWeights> weights)
    : field_(&field), id_(id), geometry_(geometry), weights_(std::move(weights)) {
    if (weights_) weights_->validate();
    if (weights_ && weights_->is_zero()) weights_.reset();
}

RaySegmentResult FieldBlock::march(const Ray& ray, double t0, double t1,
                                   const MarchOptions& opts) const {
    RaySegmentResult seg = march_lattice(ray, t0, t1, geometry_, *this, nullptr, opts.termination);
    seg.block = id_;
    return seg;
}

std::vector<SamplePoint> FieldBlock::samples(const Ray& ray, double t0, double t1, bool) const {
    return collect_lattice(ray, t0, t1, geometry_, *this, nullptr);
}

}  // namespace blockrf
