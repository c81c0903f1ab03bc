#include "blockrf/render.hpp"

#include <algorithm>
#include <cmath>

#include "blockrf/error.hpp"
#include "blockrf/parallel.hpp"

namespace blockrf {

BakedBlock::BakedBlock(std::shared_ptr<const BlockAssets> assets,
                       std::shared_ptr<const DeferredShaderWeights> weights)
    : assets_(std::move(assets)),
      weights_(std::move(weights)),
      sampler_(*assets_),
      occupied_(assets_->occupied_region()) {
    if (weights_) weights_->validate();
    if (weights_ && weights_->is_zero()) weights_.reset();
}

// With skipping on, only the part of the lattice that can reach an occupied cell is walked.
std::optional<LatticeWindow> BakedBlock::window(const Ray& ray, double t0, double t1,
                                                bool occupancy_skip) const {
    if (!occupancy_skip) return LatticeWindow{0, t1};
    if (!occupied_) return std::nullopt;
    return clip_lattice(ray, t0, t1, assets_->geometry.voxel_width, *occupied_);
}

RaySegmentResult BakedBlock::march(const Ray& ray, double t0, double t1,
                                   const MarchOptions& opts) const {
    RaySegmentResult seg;
    seg.entry_t = t0;
    if (const auto w = window(ray, t0, t1, opts.occupancy_skip))
        seg = march_lattice(ray, t0, w->t1, assets_->geometry, sampler_,
                            opts.occupancy_skip ? &assets_->occupancy : nullptr, opts.termination,
                            w->first);
    seg.block = assets_->block;
    return seg;
}

std::vector<SamplePoint> BakedBlock::samples(const Ray& ray, double t0, double t1,
                                             bool occupancy_skip) const {
    const auto w = window(ray, t0, t1, occupancy_skip);
    if (!w) return {};
    return collect_lattice(ray, t0, w->t1, assets_->geometry, sampler_,
                           occupancy_skip ? &assets_->occupancy : nullptr, w->first);
}

namespace {

constexpr double kVerticalEps = 1e-6;

bool has_residual(const DeferredShaderWeights* w) { return w && !w->is_zero(); }

Vec3 shade(const RaySegmentResult& seg, const Vec3& view_dir, const DeferredShaderWeights* w) {
    if (!has_residual(w)) return seg.diffuse;
    Vec3 c = seg.diffuse + shader_residual(*w, seg.diffuse, seg.feature, view_dir);
    for (int i = 0; i < 3; ++i) c[i] = std::clamp(c[i], 0.0, 1.0);
    return c;
}

}  // namespace

std::vector<BlockHit> order_block_hits(const Ray& ray, std::span<const RenderBlock* const> blocks) {
    std::vector<BlockHit> hits;
    for (const RenderBlock* b : blocks) {
        if (const auto hit = intersect_box(ray, b->geometry().box))
            hits.push_back({b, hit->first, hit->second});
    }
    const bool vertical = std::hypot(ray.dir.x, ray.dir.y) < kVerticalEps;
    if (vertical) {
        std::sort(hits.begin(), hits.end(), [](const BlockHit& a, const BlockHit& b) {
            if (a.t0 != b.t0) return a.t0 < b.t0;
            return a.block->id() < b.block->id();
        });
    } else {
        const Vec2 o = ray.origin.xy();
        auto key = [&](const BlockHit& h) {
            const Vec2 c = h.block->geometry().box.center().xy();
            return norm(c - o);
        };
        std::sort(hits.begin(), hits.end(), [&](const BlockHit& a, const BlockHit& b) {
            const double da = key(a), db = key(b);
            if (da != db) return da < db;
            return a.block->id() < b.block->id();
        });
    }
    return hits;
}

RayColor render_ray(const Ray& ray, std::span<const RenderBlock* const> blocks,
                    const RenderOptions& opts) {
    const auto hits = order_block_hits(ray, blocks);
    MarchOptions mo;
    mo.occupancy_skip = opts.occupancy_skip;
    mo.termination = opts.termination;

    std::vector<RaySegmentResult> segs;
    segs.reserve(hits.size());
    double transmittance = 1.0;
    for (const BlockHit& h : hits) {
        RaySegmentResult seg = h.block->march(ray, h.t0, h.t1, mo);
        if (opts.mode == ShadingMode::PerBlock) seg.color = shade(seg, ray.dir, h.block->weights());
        transmittance *= 1.0 - seg.alpha;
        segs.push_back(seg);
        if (opts.termination > 0.0 && transmittance < opts.termination) break;
    }
    const CompositeResult comp = composite_blocks(segs);

    RayColor out;
    out.alpha = comp.alpha;
    if (opts.mode == ShadingMode::PerBlock) {
        out.foreground = comp.color;
    } else {
        RaySegmentResult merged;
        merged.diffuse = comp.diffuse;
        merged.feature = comp.feature;
        merged.alpha = comp.alpha;
        out.foreground = shade(merged, ray.dir, opts.post_weights);
    }
    out.color = out.foreground + opts.background * (1.0 - comp.alpha);
    return out;
}

RaySegmentResult render_monolithic(std::span<const SamplePoint> merged,
                                   const DeferredShaderWeights* weights, const Vec3& view_dir) {
    for (std::size_t i = 1; i < merged.size(); ++i)
        if (merged[i].t < merged[i - 1].t)
            throw InvalidArgument("render_monolithic: samples are not sorted by t");
    RaySegmentResult seg = accumulate_samples(merged, 0.0);
    if (weights) {
        weights->validate();
        seg.color = shade(seg, view_dir, weights);
    }
    return seg;
}

Framebuffer render_frame(const PinholeCamera& camera, std::span<const RenderBlock* const> blocks,
                         const RenderOptions& opts) {
    camera.validate();
    Framebuffer fb(camera.width, camera.height);
    parallel_for(static_cast<std::size_t>(camera.height), opts.workers, [&](std::size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < camera.width; ++x) {
            const Ray ray = camera.pixel_ray(x + 0.5, y + 0.5);
            const RayColor c = render_ray(ray, blocks, opts);
            fb.set(x, y, c.color, c.alpha);
        }
    });
    return fb;
}

}  // namespace blockrf
