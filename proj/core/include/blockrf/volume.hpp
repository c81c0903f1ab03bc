#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "blockrf/assets.hpp"
#include "blockrf/camera.hpp"
#include "blockrf/layout.hpp"

namespace blockrf {

inline constexpr double kDefaultTermination = 1e-4;

struct SamplePoint {
    double t = 0.0;
    double delta = 0.0;
    double sigma = 0.0;
    Vec3 color;
    std::array<double, 4> feature{};
    double alpha = 0.0;  // 1 - exp(-sigma * delta)
};

/// Accumulated result of one ray inside one block. `diffuse` and `feature` are
/// premultiplied by their accumulation weights.
struct RaySegmentResult {
    BlockId block;
    double entry_t = 0.0;
    Vec3 diffuse;
    std::array<double, 4> feature{};
    double alpha = 0.0;
    Vec3 color;  // shaded; equals `diffuse` until deferred shading runs
};

struct MarchOptions {
    bool occupancy_skip = true;
    /// Stop once transmittance falls below this value; 0 disables early exit.
    double termination = kDefaultTermination;
};

inline double sample_alpha(double sigma, double delta) { return 1.0 - std::exp(-sigma * delta); }

/// Front-to-back accumulation with weights alpha_i * prod_{j<i}(1 - alpha_j).
RaySegmentResult accumulate_samples(std::span<const SamplePoint> samples, double termination = 0.0);

/// Walks the block's sample lattice t = t0 + (i + 0.5) * voxel_width for t < t1,
/// starting at index `first`. `on_sample(t, p)` returns false to stop. With an
/// occupancy pyramid, points whose level-0 cell is empty are skipped, jumping over
/// the coarsest empty cell that contains them.
template <class OnSample>
void walk_lattice(const Ray& ray, double t0, double t1, const BlockGeometry& geom,
                  const OccupancyPyramid* occupancy, OnSample&& on_sample, long long first = 0) {
    const double delta = geom.voxel_width;
    const Vec3 lo = geom.box.lo;
    const GridDims dims = geom.voxel_dims;
    auto cell_of = [&](double coord, double origin, int n) {
        int c = static_cast<int>(std::floor((coord - origin) / delta));
        return c < 0 ? 0 : (c >= n ? n - 1 : c);
    };
    long long i = first;
    for (;;) {
        const double t = t0 + (double(i) + 0.5) * delta;
        if (!(t < t1)) break;
        const Vec3 p = ray.at(t);
        if (occupancy) {
            const int cx = cell_of(p.x, lo.x, dims.x);
            const int cy = cell_of(p.y, lo.y, dims.y);
            const int cz = cell_of(p.z, lo.z, dims.z);
            const auto& levels = occupancy->levels;
            if (!levels[0].at(cx, cy, cz)) {
                std::size_t lvl = 0;
                while (lvl + 1 < levels.size() &&
                       !levels[lvl + 1].at(cx >> (lvl + 1), cy >> (lvl + 1), cz >> (lvl + 1)))
                    ++lvl;
                const double size = delta * double(1 << lvl);
                const int c[3] = {cx >> lvl, cy >> lvl, cz >> lvl};
                double t_exit = t1;
                for (int a = 0; a < 3; ++a) {
                    const double d = ray.dir[a];
                    if (d == 0.0) continue;
                    const double bound = lo[a] + (c[a] + (d > 0.0 ? 1 : 0)) * size;
                    t_exit = std::min(t_exit, (bound - ray.origin[a]) / d);
                }
                const double next = std::ceil((t_exit - t0) / delta - 0.5);
                i = std::max(i + 1, static_cast<long long>(next));
                continue;
            }
        }
        if (!on_sample(t, p)) break;
        ++i;
    }
}

/// Marches any attribute source over the block lattice between t0 and t1.
/// `Sampler` provides `Attributes sample(const Vec3&) const`.
template <class Sampler>
RaySegmentResult march_lattice(const Ray& ray, double t0, double t1, const BlockGeometry& geom,
                               const Sampler& sampler, const OccupancyPyramid* occupancy,
                               double termination, long long first = 0) {
    RaySegmentResult seg;
    seg.entry_t = t0;
    double transmittance = 1.0;
    const double delta = geom.voxel_width;
    walk_lattice(ray, t0, t1, geom, occupancy, [&](double, const Vec3& p) {
        const Attributes a = sampler.sample(p);
        if (a.sigma <= 0.0) return true;
        const double alpha = sample_alpha(a.sigma, delta);
        const double w = transmittance * alpha;
        seg.diffuse += a.diffuse * w;
        for (int c = 0; c < 4; ++c) seg.feature[c] += w * a.feature[c];
        seg.alpha += w;
        transmittance *= 1.0 - alpha;
        return !(termination > 0.0 && transmittance < termination);
    }, first);
    seg.color = seg.diffuse;
    return seg;
}

/// Lattice samples (with attributes) of a block, honoring occupancy skipping but
/// never terminating early.
template <class Sampler>
std::vector<SamplePoint> collect_lattice(const Ray& ray, double t0, double t1,
                                         const BlockGeometry& geom, const Sampler& sampler,
                                         const OccupancyPyramid* occupancy,
                                         long long first = 0) {
    std::vector<SamplePoint> out;
    const double delta = geom.voxel_width;
    walk_lattice(ray, t0, t1, geom, occupancy, [&](double t, const Vec3& p) {
        const Attributes a = sampler.sample(p);
        SamplePoint s;
        s.t = t;
        s.delta = delta;
        s.sigma = a.sigma;
        s.color = a.diffuse;
        s.feature = a.feature;
        s.alpha = sample_alpha(a.sigma, delta);
        out.push_back(s);
        return true;
    }, first);
    return out;
}

/// Part of the lattice over [t0, t1] that can reach `region`: the first sample
/// index and the end parameter. nullopt when the ray misses the region.
struct LatticeWindow {
    long long first = 0;
    double t1 = 0.0;
};
std::optional<LatticeWindow> clip_lattice(const Ray& ray, double t0, double t1, double delta,
                                          const Box3& region);

/// Volume integration of one ray inside one baked block. A ray that misses the
/// block box yields the zero segment.
RaySegmentResult march_block(const Ray& ray, const AttributeSampler& sampler,
                             const MarchOptions& opts = {});
RaySegmentResult march_block(const Ray& ray, const BlockAssets& assets,
                             const MarchOptions& opts = {});

}  // namespace blockrf
