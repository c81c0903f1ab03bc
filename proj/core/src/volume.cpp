#include "blockrf/volume.hpp"

namespace blockrf {

RaySegmentResult accumulate_samples(std::span<const SamplePoint> samples, double termination) {
    RaySegmentResult seg;
    if (!samples.empty()) seg.entry_t = samples.front().t;
    double transmittance = 1.0;
    for (const SamplePoint& s : samples) {
        const double w = transmittance * s.alpha;
        seg.diffuse += s.color * w;
        for (int c = 0; c < 4; ++c) seg.feature[c] += w * s.feature[c];
        seg.alpha += w;
        transmittance *= 1.0 - s.alpha;
        if (termination > 0.0 && transmittance < termination) break;
    }
    seg.color = seg.diffuse;
    return seg;
}

std::optional<LatticeWindow> clip_lattice(const Ray& ray, double t0, double t1, double delta,
                                          const Box3& region) {
    const auto hit = intersect_box(ray, region);
    if (!hit || hit->second <= t0 || hit->first >= t1) return std::nullopt;
    LatticeWindow w;
    // one sample of slack on either side; the walk still tests every cell
    w.first = std::max(0LL, static_cast<long long>(std::floor((hit->first - t0) / delta - 0.5)) - 1);
    w.t1 = std::min(t1, hit->second + delta);
    return w;
}

RaySegmentResult march_block(const Ray& ray, const AttributeSampler& sampler,
                             const MarchOptions& opts) {
    const BlockAssets& assets = sampler.assets();
    const auto hit = intersect_box(ray, assets.geometry.box);
    if (!hit) {
        RaySegmentResult empty;
        empty.block = assets.block;
        return empty;
    }
    RaySegmentResult seg =
        march_lattice(ray, hit->first, hit->second, assets.geometry, sampler,
                      opts.occupancy_skip ? &assets.occupancy : nullptr, opts.termination);
    seg.block = assets.block;
    return seg;
}

RaySegmentResult march_block(const Ray& ray, const BlockAssets& assets, const MarchOptions& opts) {
    return march_block(ray, AttributeSampler(assets), opts);
}

}  // namespace blockrf
