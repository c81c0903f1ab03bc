#include "blockrf/bake.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "blockrf/error.hpp"
#include "blockrf/parallel.hpp"

namespace blockrf {

void BakeConfig::validate() const {
    if (voxel_res < kMacroblock || voxel_res % kMacroblock != 0)
        throw InvalidArgument("bake: voxel_res must be a positive multiple of 8");
    if (triplane_res < 1) throw InvalidArgument("bake: triplane_res must be positive");
    if ((voxel_res & (voxel_res - 1)) != 0 || (triplane_res & (triplane_res - 1)) != 0)
        throw InvalidArgument("bake: resolutions must be powers of two");
    if (!(tau_w > 0.0 && tau_w < 1.0)) throw InvalidArgument("bake: tau_w must lie in (0, 1)");
    if (!(tau_alpha > 0.0 && tau_alpha < 1.0))
        throw InvalidArgument("bake: tau_alpha must lie in (0, 1)");
    if (ray_budget < 1) throw InvalidArgument("bake: ray_budget must be positive");
    if (pyramid_levels < 1) throw InvalidArgument("bake: pyramid_levels must be at least 1");
    if (voxel_res % (1 << (pyramid_levels - 1)) != 0)
        throw InvalidArgument("bake: voxel_res must be divisible by 2^(pyramid_levels - 1)");
    if (!(plane_share >= 0.0 && plane_share <= 1.0))
        throw InvalidArgument("bake: plane_share must lie in [0, 1]");
    if (workers < 0) throw InvalidArgument("bake: workers must be non-negative");
    quant.validate();
}

namespace {

// Samples taken along the missing axis when averaging the field into a plane texel.
constexpr int kPlaneAverageSamples = 8;

std::array<double, kChannels> eval_checked(const FieldSource& field, const Vec3& p,
                                           const QuantizationSpec& quant) {
    const FieldSample s = field.eval(p);
    bool finite = std::isfinite(s.sigma);
    for (double v : s.diffuse_pre) finite = finite && std::isfinite(v);
    for (double v : s.feature_pre) finite = finite && std::isfinite(v);
    if (!finite)
        throw InvalidArgument("field returned a non-finite value at (" + std::to_string(p.x) +
                              ", " + std::to_string(p.y) + ", " + std::to_string(p.z) + ")");
    return field_pre_activations(s, quant);
}

}  // namespace

PreactivationGrids sample_field_to_grids(const FieldSource& field, const BlockLayout& layout,
                                         const BlockId& block, const BakeConfig& cfg) {
    PreactivationGrids g;
    g.geometry = BlockGeometry::make(layout, block, cfg.voxel_res, cfg.triplane_res);
    const BlockGeometry& geom = g.geometry;
    const GridDims vd = geom.voxel_dims;
    const GridDims pd = geom.plane_dims;
    const Vec3 lo = geom.box.lo;
    const Vec3 ext = geom.box.extent();
    const Vec3 tw = geom.plane_texel_width();

    const std::array<std::pair<int, int>, 3> plane_size{{{pd.x, pd.y}, {pd.x, pd.z}, {pd.y, pd.z}}};
    static constexpr int kAxes[3][3] = {{0, 1, 2}, {0, 2, 1}, {1, 2, 0}};  // u, v, averaged
    for (int pl = 0; pl < 3; ++pl)
        g.planes[pl].assign(std::size_t(plane_size[pl].first) * plane_size[pl].second * kChannels,
                            0.0f);

    if (cfg.plane_share > 0.0) {
        const double scale = cfg.plane_share / 3.0;
        for (int pl = 0; pl < 3; ++pl) {
            const auto [w, h] = plane_size[pl];
            const int au = kAxes[pl][0], av = kAxes[pl][1], am = kAxes[pl][2];
            parallel_for(std::size_t(h), cfg.workers, [&](std::size_t v) {
                for (int u = 0; u < w; ++u) {
                    std::array<double, kChannels> sum{};
                    for (int s = 0; s < kPlaneAverageSamples; ++s) {
                        Vec3 p;
                        p[au] = lo[au] + (u + 0.5) * tw[au];
                        p[av] = lo[av] + (double(v) + 0.5) * tw[av];
                        p[am] = lo[am] + (s + 0.5) * ext[am] / kPlaneAverageSamples;
                        const auto pre = eval_checked(field, p, cfg.quant);
                        for (int c = 0; c < kChannels; ++c) sum[c] += pre[c];
                    }
                    float* out = g.planes[pl].data() + (v * w + u) * kChannels;
                    for (int c = 0; c < kChannels; ++c)
                        out[c] = static_cast<float>(scale * sum[c] / kPlaneAverageSamples);
                }
            });
        }
    }

    // The voxel residual is taken against the planes as the renderer will read them.
    std::array<TexelPlane, 3> qplanes = quantize_planes(g, cfg.quant);
    const DequantTable table = make_dequant_table(cfg.quant);
    g.voxel.assign(vd.count() * kChannels, 0.0f);
    parallel_for(std::size_t(vd.z), cfg.workers, [&](std::size_t k) {
        for (int j = 0; j < vd.y; ++j)
            for (int i = 0; i < vd.x; ++i) {
                const Vec3 p = geom.texel_center(i, j, int(k));
                const auto target = eval_checked(field, p, cfg.quant);
                std::array<double, kChannels> planes{};
                add_plane_samples(geom, qplanes, table, p, planes);
                float* out = g.voxel.data() + ((k * vd.y + j) * vd.x + i) * kChannels;
                for (int c = 0; c < kChannels; ++c)
                    out[c] = static_cast<float>(target[c] - planes[c]);
            }
    });
    return g;
}

TexelGrid quantize_voxels(const PreactivationGrids& grids, const QuantizationSpec& quant) {
    TexelGrid out(grids.geometry.voxel_dims);
    if (grids.voxel.size() != out.data.size())
        throw InvalidArgument("quantize_voxels: grid size disagrees with geometry");
    for (std::size_t n = 0; n < grids.voxel.size(); ++n)
        out.data[n] = quantize(grids.voxel[n], quant.ranges[n % kChannels]);
    return out;
}

std::array<TexelPlane, 3> quantize_planes(const PreactivationGrids& grids,
                                          const QuantizationSpec& quant) {
    const GridDims pd = grids.geometry.plane_dims;
    const std::array<std::pair<int, int>, 3> size{{{pd.x, pd.y}, {pd.x, pd.z}, {pd.y, pd.z}}};
    std::array<TexelPlane, 3> out;
    for (int pl = 0; pl < 3; ++pl) {
        out[pl] = TexelPlane(size[pl].first, size[pl].second);
        if (grids.planes[pl].size() != out[pl].data.size())
            throw InvalidArgument("quantize_planes: plane size disagrees with geometry");
        for (std::size_t n = 0; n < grids.planes[pl].size(); ++n)
            out[pl].data[n] = quantize(grids.planes[pl][n], quant.ranges[n % kChannels]);
    }
    return out;
}

namespace {

void mark_neighbors(OccupancyGrid& grid, const BlockGeometry& geom, const Vec3& p) {
    int i0[3];
    for (int a = 0; a < 3; ++a)
        i0[a] = static_cast<int>(std::floor((p[a] - geom.box.lo[a]) / geom.voxel_width - 0.5));
    const int n[3] = {grid.dims.x, grid.dims.y, grid.dims.z};
    for (int c = 0; c < 8; ++c) {
        int idx[3];
        for (int a = 0; a < 3; ++a)
            idx[a] = std::clamp(i0[a] + ((c >> a) & 1), 0, n[a] - 1);
        grid.set(idx[0], idx[1], idx[2]);
    }
}

std::vector<Ray> budgeted_rays(std::span<const Ray> rays, int budget) {
    if (rays.size() <= std::size_t(budget)) return {rays.begin(), rays.end()};
    std::vector<Ray> out;
    out.reserve(std::size_t(budget));
    for (int i = 0; i < budget; ++i)
        out.push_back(rays[std::size_t(double(i) * rays.size() / budget)]);
    return out;
}

}  // namespace

std::map<BlockId, OccupancyGrid> bake_occupancy(const FieldSource& field,
                                                const BlockLayout& layout, int lod,
                                                const BakeConfig& cfg, std::span<const Ray> rays) {
    if (rays.empty()) throw InvalidArgument("bake_occupancy: the capture ray set is empty");
    cfg.validate();
    const auto ids = layout.blocks(lod);
    std::vector<std::unique_ptr<FieldBlock>> blocks;
    std::vector<const RenderBlock*> views;
    std::map<BlockId, std::size_t> slot;
    for (const auto& id : ids) {
        slot[id] = blocks.size();
        blocks.push_back(std::make_unique<FieldBlock>(
            field, id, BlockGeometry::make(layout, id, cfg.voxel_res, cfg.triplane_res)));
        views.push_back(blocks.back().get());
    }

    const std::vector<Ray> used = budgeted_rays(rays, cfg.ray_budget);
    const int workers = resolve_workers(cfg.workers);
    const std::size_t chunks = std::min<std::size_t>(used.size(), std::size_t(workers) * 4);
    std::map<BlockId, OccupancyGrid> merged;
    for (const auto& b : blocks) merged[b->id()] = OccupancyGrid(b->geometry().voxel_dims);
    std::mutex merge_mutex;

    parallel_for(chunks, workers, [&](std::size_t chunk) {
        std::vector<OccupancyGrid> local;
        for (const auto& b : blocks) local.emplace_back(b->geometry().voxel_dims);
        const std::size_t begin = chunk * used.size() / chunks;
        const std::size_t end = (chunk + 1) * used.size() / chunks;
        for (std::size_t r = begin; r < end; ++r) {
            const Ray& ray = used[r];
            double transmittance = 1.0;
            for (const BlockHit& hit : order_block_hits(ray, views)) {
                const auto& fb = static_cast<const FieldBlock&>(*hit.block);
                const BlockGeometry& geom = fb.geometry();
                OccupancyGrid& grid = local[slot.at(fb.id())];
                walk_lattice(ray, hit.t0, hit.t1, geom, nullptr, [&](double, const Vec3& p) {
                    const double alpha = sample_alpha(fb.sample(p).sigma, geom.voxel_width);
                    const double w = transmittance * alpha;
                    if (w > cfg.tau_w && alpha > cfg.tau_alpha) mark_neighbors(grid, geom, p);
                    transmittance *= 1.0 - alpha;
                    return transmittance > cfg.tau_w;
                });
                if (!(transmittance > cfg.tau_w)) break;
            }
        }
        std::lock_guard lock(merge_mutex);
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            auto& dst = merged[blocks[b]->id()].cells;
            for (std::size_t n = 0; n < dst.size(); ++n) dst[n] |= local[b].cells[n];
        }
    });
    return merged;
}

OccupancyGrid bake_occupancy(const FieldSource& field, const BlockLayout& layout,
                             const BlockId& block, const BakeConfig& cfg,
                             std::span<const Ray> rays) {
    if (!layout.contains(block)) throw DomainError("block " + block.to_string() + " not in layout");
    return bake_occupancy(field, layout, block.lod, cfg, rays).at(block);
}

SparseVoxelAtlas pack_atlas(const TexelGrid& dense, const OccupancyGrid& occupancy) {
    const GridDims d = dense.dims;
    if (d.x % kMacroblock != 0 || d.y % kMacroblock != 0 || d.z % kMacroblock != 0)
        throw InvalidArgument("pack_atlas: resolution must be a multiple of 8 on every axis");
    if (occupancy.dims != d) throw InvalidArgument("pack_atlas: occupancy dims disagree");
    SparseVoxelAtlas atlas;
    atlas.texel_dims = d;
    atlas.macro_dims = {d.x / kMacroblock, d.y / kMacroblock, d.z / kMacroblock};
    atlas.indirection.assign(atlas.macro_dims.count(), SparseVoxelAtlas::kEmpty);
    std::int32_t next = 0;
    for (int mk = 0; mk < atlas.macro_dims.z; ++mk)
        for (int mj = 0; mj < atlas.macro_dims.y; ++mj)
            for (int mi = 0; mi < atlas.macro_dims.x; ++mi) {
                bool any = false;
                for (int k = 0; k < kMacroblock && !any; ++k)
                    for (int j = 0; j < kMacroblock && !any; ++j)
                        for (int i = 0; i < kMacroblock && !any; ++i)
                            any = occupancy.at(mi * kMacroblock + i, mj * kMacroblock + j,
                                               mk * kMacroblock + k);
                if (!any) continue;
                atlas.indirection[atlas.macro_index(mi, mj, mk)] = next++;
                for (int k = 0; k < kMacroblock; ++k)
                    for (int j = 0; j < kMacroblock; ++j)
                        for (int i = 0; i < kMacroblock; ++i) {
                            const std::uint8_t* t = dense.texel(
                                mi * kMacroblock + i, mj * kMacroblock + j, mk * kMacroblock + k);
                            atlas.macroblocks.insert(atlas.macroblocks.end(), t, t + kChannels);
                        }
            }
    return atlas;
}

BlockAssets bake_block(const FieldSource& field, const BlockLayout& layout, const BlockId& block,
                       const BakeConfig& cfg, OccupancyGrid occupancy) {
    cfg.validate();
    PreactivationGrids grids = sample_field_to_grids(field, layout, block, cfg);
    if (occupancy.dims != grids.geometry.voxel_dims)
        throw InvalidArgument("bake_block: occupancy dims disagree with " + block.to_string());
    BlockAssets a;
    a.block = block;
    a.geometry = grids.geometry;
    a.quant = cfg.quant;
    a.planes = quantize_planes(grids, cfg.quant);
    a.voxels = pack_atlas(quantize_voxels(grids, cfg.quant), occupancy);
    a.occupancy = OccupancyPyramid::build(std::move(occupancy), cfg.pyramid_levels);
    a.shader_group = shader_group_name(block);
    return a;
}

std::vector<std::unique_ptr<RenderBlock>> BakedScene::render_blocks(
    std::span<const BlockId> ids) const {
    std::map<std::string, std::shared_ptr<const DeferredShaderWeights>> groups;
    std::vector<std::unique_ptr<RenderBlock>> out;
    for (const auto& id : ids) {
        auto it = assets.find(id);
        if (it == assets.end()) throw DomainError("no baked assets for " + id.to_string());
        const std::string& group = manifest.block(id).shader_group;
        auto& w = groups[group];
        if (!w) w = std::make_shared<const DeferredShaderWeights>(manifest.shader(id));
        out.push_back(std::make_unique<BakedBlock>(it->second, w));
    }
    return out;
}

std::string shader_group_name(const BlockId& id) {
    return "lod" + std::to_string(id.lod) + "_" + std::to_string(id.ix) + "_" +
           std::to_string(id.iy);
}

}  // namespace blockrf
