#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "blockrf/assets.hpp"
#include "blockrf/camera.hpp"
#include "blockrf/composite.hpp"
#include "blockrf/framebuffer.hpp"
#include "blockrf/shader.hpp"
#include "blockrf/volume.hpp"

namespace blockrf {

enum class ShadingMode {
    PerBlock,       // shade every block segment, then composite shaded colors
    PostComposite,  // composite diffuse/feature, shade once per ray
};

/// A block the renderer can integrate a ray through.
class RenderBlock {
public:
    virtual ~RenderBlock() = default;

    virtual BlockId id() const = 0;
    virtual const BlockGeometry& geometry() const = 0;
    /// Shading network for this block; nullptr means no residual.
    virtual const DeferredShaderWeights* weights() const = 0;

    virtual RaySegmentResult march(const Ray& ray, double t0, double t1,
                                   const MarchOptions& opts) const = 0;
    virtual std::vector<SamplePoint> samples(const Ray& ray, double t0, double t1,
                                             bool occupancy_skip) const = 0;
};

/// Render block backed by baked, quantized assets.
class BakedBlock final : public RenderBlock {
public:
    BakedBlock(std::shared_ptr<const BlockAssets> assets,
               std::shared_ptr<const DeferredShaderWeights> weights);

    BlockId id() const override { return assets_->block; }
    const BlockGeometry& geometry() const override { return assets_->geometry; }
    const DeferredShaderWeights* weights() const override { return weights_.get(); }
    const BlockAssets& assets() const { return *assets_; }

    RaySegmentResult march(const Ray& ray, double t0, double t1,
                           const MarchOptions& opts) const override;
    std::vector<SamplePoint> samples(const Ray& ray, double t0, double t1,
                                     bool occupancy_skip) const override;

private:
    std::optional<LatticeWindow> window(const Ray& ray, double t0, double t1,
                                        bool occupancy_skip) const;

    std::shared_ptr<const BlockAssets> assets_;
    std::shared_ptr<const DeferredShaderWeights> weights_;
    AttributeSampler sampler_;
    std::optional<Box3> occupied_;
};

struct RenderOptions {
    ShadingMode mode = ShadingMode::PerBlock;
    bool occupancy_skip = true;
    double termination = kDefaultTermination;
    Vec3 background{0.5, 0.5, 0.5};
    /// Shared network for PostComposite mode; nullptr means no residual.
    const DeferredShaderWeights* post_weights = nullptr;
    /// Worker threads for render_frame; 0 picks the hardware concurrency.
    int workers = 0;
};

struct RayColor {
    Vec3 color;       // background blended in
    Vec3 foreground;  // composited color before the background
    double alpha = 0.0;
};

/// Blocks hit by the ray with their clipped parameter intervals, in compositing
/// order: ascending xy distance from the ray origin to the block center, ties by
/// (lod, iy, ix). Near-vertical rays fall back to entry-t order.
struct BlockHit {
    const RenderBlock* block = nullptr;
    double t0 = 0.0;
    double t1 = 0.0;
};
std::vector<BlockHit> order_block_hits(const Ray& ray, std::span<const RenderBlock* const> blocks);

RayColor render_ray(const Ray& ray, std::span<const RenderBlock* const> blocks,
                    const RenderOptions& opts = {});

/// Reference volume rendering over one t-sorted sample list regardless of block
/// membership, shaded once at the end when `weights` is non-null. Throws
/// InvalidArgument when the samples are not sorted by t.
RaySegmentResult render_monolithic(std::span<const SamplePoint> merged,
                                   const DeferredShaderWeights* weights = nullptr,
                                   const Vec3& view_dir = {0, 0, 1});

/// One render_ray per pixel center. Throws InvalidArgument for a zero-area camera.
Framebuffer render_frame(const PinholeCamera& camera, std::span<const RenderBlock* const> blocks,
                         const RenderOptions& opts = {});

}  // namespace blockrf
