#include "blockrf/lod_policy.hpp"

#include <algorithm>
#include <functional>

#include "blockrf/error.hpp"
#include "blockrf/visibility.hpp"

namespace blockrf {

std::vector<BlockId> RenderPlan::ids() const {
    std::vector<BlockId> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks) out.push_back(b.id);
    return out;
}

Vec3 render_center(const SceneManifest& manifest, const BlockId& id) {
    const Vec2 c = manifest.layout.block_center(id);
    return {c.x, c.y, manifest.block(id).z_top};
}

std::map<BlockId, double> culling_tops(const SceneManifest& manifest) {
    const BlockLayout& layout = manifest.layout;
    std::map<BlockId, double> top;
    for (int lod = 1; lod <= layout.lod_count; ++lod)
        for (const auto& id : layout.blocks(lod)) {
            double z = manifest.block(id).z_top;
            if (lod > 1)
                for (const auto& c : layout.children(id)) z = std::max(z, top.at(c));
            top[id] = z;
        }
    return top;
}

std::vector<PlannedBlock> depth_sort(std::span<const BlockId> blocks, const PinholeCamera& camera,
                                     const SceneManifest& manifest) {
    std::vector<PlannedBlock> out;
    out.reserve(blocks.size());
    for (const auto& id : blocks) {
        const Vec3 rc = render_center(manifest, id);
        out.push_back({id, norm(rc.xy() - camera.position.xy()), norm(rc - camera.position)});
    }
    std::sort(out.begin(), out.end(), [](const PlannedBlock& a, const PlannedBlock& b) {
        if (a.xy_distance != b.xy_distance) return a.xy_distance < b.xy_distance;
        return a.id < b.id;
    });
    return out;
}

RenderPlan select_lod(const PinholeCamera& camera, const SceneManifest& manifest,
                      std::span<const double> thresholds) {
    const BlockLayout& layout = manifest.layout;
    if (thresholds.size() != std::size_t(layout.lod_count - 1))
        throw InvalidArgument("select_lod: expected one distance threshold per LOD above the finest");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > 0.0)) throw InvalidArgument("select_lod: thresholds must be positive");
        if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
            throw InvalidArgument("select_lod: thresholds must shrink towards finer LODs");
    }
    camera.validate();

    const auto tops = culling_tops(manifest);
    std::vector<BlockId> emitted;
    std::function<void(const BlockId&)> descend = [&](const BlockId& id) {
        if (!block_visible(camera, layout, id, tops.at(id))) return;
        if (id.lod == 1 ||
            norm(render_center(manifest, id) - camera.position) > thresholds[id.lod - 2]) {
            emitted.push_back(id);
            return;
        }
        for (const auto& c : layout.children(id)) descend(c);
    };
    for (const auto& id : layout.blocks(layout.lod_count)) descend(id);

    RenderPlan plan;
    plan.blocks = depth_sort(emitted, camera, manifest);
    return plan;
}

RenderPlan select_lod(const PinholeCamera& camera, const SceneManifest& manifest) {
    return select_lod(camera, manifest, manifest.policy.lod_thresholds);
}

}  // namespace blockrf
