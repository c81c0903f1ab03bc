#include <algorithm>
#include <set>

#include "blockrf/bake.hpp"
#include "blockrf/error.hpp"

namespace blockrf {

BlockAssets generate_lod(std::span<const BlockAssets* const> children, const FieldSource& field,
                         const BlockLayout& layout, const BakeConfig& cfg,
                         const OccupancyGrid* coarse_marks) {
    if (children.size() != 4) throw InvalidArgument("generate_lod: expected a 2x2 group of blocks");
    const BlockId parent = layout.parent(children[0]->block);
    std::set<BlockId> ids;
    for (const BlockAssets* c : children) {
        if (!c) throw InvalidArgument("generate_lod: null child");
        if (layout.parent(c->block) != parent)
            throw InvalidArgument("generate_lod: children do not share a parent");
        ids.insert(c->block);
    }
    if (ids.size() != 4) throw InvalidArgument("generate_lod: duplicate child block");

    const BlockGeometry geom = BlockGeometry::make(layout, parent, cfg.voxel_res, cfg.triplane_res);
    OccupancyGrid merged(geom.voxel_dims);
    for (const BlockAssets* c : children) {
        const OccupancyGrid pooled = maxpool_occupancy(c->occupancy.base());
        if (pooled.dims.x * 2 != merged.dims.x || pooled.dims.y * 2 != merged.dims.y ||
            pooled.dims.z != merged.dims.z)
            throw InvalidArgument("generate_lod: child resolution does not halve into " +
                                  parent.to_string());
        const int ox = (c->block.ix - 2 * parent.ix) * pooled.dims.x;
        const int oy = (c->block.iy - 2 * parent.iy) * pooled.dims.y;
        for (int k = 0; k < pooled.dims.z; ++k)
            for (int j = 0; j < pooled.dims.y; ++j)
                for (int i = 0; i < pooled.dims.x; ++i)
                    if (pooled.at(i, j, k)) merged.set(ox + i, oy + j, k);
    }
    if (coarse_marks) {
        if (coarse_marks->dims != merged.dims)
            throw InvalidArgument("generate_lod: coarse occupancy dims disagree");
        for (std::size_t n = 0; n < merged.cells.size(); ++n) merged.cells[n] |= coarse_marks->cells[n];
    }
    return bake_block(field, layout, parent, cfg, std::move(merged));
}

namespace {

void record_block(BakedScene& scene, std::shared_ptr<const BlockAssets> assets,
                  std::string fallback_group) {
    const SceneManifest& m = scene.manifest;
    ManifestBlock& entry = scene.manifest.upsert(assets->block);
    entry.z_top = std::clamp(assets->occupied_top(), m.layout.z_min, m.layout.z_max);
    entry.atlas_macroblocks = assets->voxels.macroblock_count();
    entry.files.clear();
    if (entry.shader_group.empty()) entry.shader_group = fallback_group;
    auto copy = std::make_shared<BlockAssets>(*assets);
    copy->shader_group = entry.shader_group;
    scene.assets[assets->block] = std::move(copy);
}

}  // namespace

void rebuild_lods(BakedScene& scene, const FieldSource& field, std::span<const Ray> rays) {
    const BlockLayout& layout = scene.manifest.layout;
    const BakeConfig& cfg = scene.manifest.bake;
    for (int lod = 2; lod <= layout.lod_count; ++lod) {
        const auto marks = bake_occupancy(field, layout, lod, cfg, rays);
        for (const auto& id : layout.blocks(lod)) {
            std::vector<const BlockAssets*> children;
            for (const auto& c : layout.children(id)) {
                auto it = scene.assets.find(c);
                if (it == scene.assets.end())
                    throw DomainError("rebuild_lods: missing assets for " + c.to_string());
                children.push_back(it->second.get());
            }
            auto parent = std::make_shared<const BlockAssets>(
                generate_lod(children, field, layout, cfg, &marks.at(id)));
            record_block(scene, parent, scene.manifest.block(children.front()->block).shader_group);
        }
    }
}

BakedScene bake_scene(const FieldSource& field, const BlockLayout& layout, const BakeConfig& cfg,
                      std::span<const Ray> rays, const ShaderProvider& shaders) {
    layout.validate();
    cfg.validate();
    BakedScene scene;
    scene.manifest.layout = layout;
    scene.manifest.bake = cfg;
    scene.manifest.policy.lod_thresholds = default_lod_thresholds(layout);

    const std::string shared_group = "shared";
    if (shaders) {
        for (int lod = 1; lod <= layout.lod_count; ++lod)
            for (const auto& id : layout.blocks(lod)) {
                scene.manifest.shader_groups[shader_group_name(id)] = shaders(id);
                scene.manifest.upsert(id).shader_group = shader_group_name(id);
            }
    } else {
        scene.manifest.shader_groups[shared_group] = DeferredShaderWeights::zeros();
    }
    for (const auto& [name, w] : scene.manifest.shader_groups) w.validate();

    const auto occupancy = bake_occupancy(field, layout, 1, cfg, rays);
    for (const auto& id : layout.blocks(1)) {
        auto assets = std::make_shared<const BlockAssets>(
            bake_block(field, layout, id, cfg, occupancy.at(id)));
        record_block(scene, assets, shared_group);
    }
    rebuild_lods(scene, field, rays);
    scene.manifest.validate();
    return scene;
}

}  // namespace blockrf
