#pragma once

#include <map>
#include <span>
#include <vector>

#include "blockrf/camera.hpp"
#include "blockrf/manifest.hpp"

namespace blockrf {

struct PlannedBlock {
    BlockId id;
    double xy_distance = 0.0;  // camera xy to block center xy; the depth-sort key
    double distance = 0.0;     // camera to the 3D render center

    bool operator==(const PlannedBlock&) const = default;
};

struct RenderPlan {
    std::vector<PlannedBlock> blocks;  // front to back
    std::vector<BlockId> load;         // filled by apply_plan
    std::vector<BlockId> evict;        // filled by apply_plan, in eviction order
    std::vector<BlockId> degraded;     // blocks replaced by their parent to fit the budget
    std::vector<BlockId> dropped;      // blocks left out because even LOD L did not fit

    std::vector<BlockId> ids() const;
};

/// Render center: block center in xy at height z_top.
Vec3 render_center(const SceneManifest& manifest, const BlockId& id);

/// Top of the column used for culling `id`: the highest z_top among the block and all
/// of its descendants, so a visible block always has a visible parent.
std::map<BlockId, double> culling_tops(const SceneManifest& manifest);

/// Ascending camera-to-center xy distance, ties by (lod, iy, ix).
std::vector<PlannedBlock> depth_sort(std::span<const BlockId> blocks, const PinholeCamera& camera,
                                     const SceneManifest& manifest);

/// Coarse-to-fine descent from the coarsest LOD. A visible block at LOD l > 1 is emitted
/// when its render center is farther than thresholds[l - 2] from the camera, otherwise
/// its visible children are considered. Throws InvalidArgument unless the thresholds
/// (D_1 .. D_{L-1}) are positive and strictly increasing.
RenderPlan select_lod(const PinholeCamera& camera, const SceneManifest& manifest,
                      std::span<const double> thresholds);
RenderPlan select_lod(const PinholeCamera& camera, const SceneManifest& manifest);

}  // namespace blockrf
