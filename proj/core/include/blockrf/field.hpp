#pragma once

#include <array>
#include <memory>

#include "blockrf/assets.hpp"
#include "blockrf/layout.hpp"
#include "blockrf/render.hpp"

namespace blockrf {

/// Ground-truth field value: density plus color/feature pre-activations.
struct FieldSample {
    double sigma = 0.0;
    std::array<double, 3> diffuse_pre{};
    std::array<double, 4> feature_pre{};
};

/// Pure, deterministic volumetric field standing in for a trained attribute function.
class FieldSource {
public:
    virtual ~FieldSource() = default;
    virtual FieldSample eval(const Vec3& p) const = 0;
    virtual Box3 bounds() const = 0;
};

/// Stored channel values: log density clamped to the density range, colors and
/// features as given.
std::array<double, kChannels> field_pre_activations(const FieldSample& s,
                                                    const QuantizationSpec& quant);

/// Activations applied the same way the baked path applies them.
Attributes field_attributes(const FieldSample& s);

/// Render block that evaluates the field directly on the block's sample lattice.
class FieldBlock final : public RenderBlock {
public:
    FieldBlock(const FieldSource& field, const BlockId& id, BlockGeometry geometry,
               std::shared_ptr<const DeferredShaderWeights> weights = nullptr);

    BlockId id() const override { return id_; }
    const BlockGeometry& geometry() const override { return geometry_; }
    const DeferredShaderWeights* weights() const override { return weights_.get(); }

    RaySegmentResult march(const Ray& ray, double t0, double t1,
                           const MarchOptions& opts) const override;
    std::vector<SamplePoint> samples(const Ray& ray, double t0, double t1,
                                     bool occupancy_skip) const override;

    Attributes sample(const Vec3& p) const { return field_attributes(field_->eval(p)); }

private:
    const FieldSource* field_;
    BlockId id_;
    BlockGeometry geometry_;
    std::shared_ptr<const DeferredShaderWeights> weights_;
};

}  // namespace blockrf
