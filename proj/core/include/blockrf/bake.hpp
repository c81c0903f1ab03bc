#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "blockrf/assets.hpp"
#include "blockrf/bake_config.hpp"
#include "blockrf/camera.hpp"
#include "blockrf/field.hpp"
#include "blockrf/manifest.hpp"

namespace blockrf {

/// Dense float pre-activations of one block, 8 channels interleaved. The voxel grid
/// stores the residual left after the quantized planes, so voxel + plane sum
/// reproduces the field at every voxel center up to voxel quantization.
struct PreactivationGrids {
    BlockGeometry geometry;
    std::vector<float> voxel;                 // voxel_dims.count() * 8
    std::array<std::vector<float>, 3> planes;  // xy, xz, yz
};

/// Throws InvalidArgument naming the point when the field returns a non-finite value.
PreactivationGrids sample_field_to_grids(const FieldSource& field, const BlockLayout& layout,
                                         const BlockId& block, const BakeConfig& cfg);

TexelGrid quantize_voxels(const PreactivationGrids& grids, const QuantizationSpec& quant);
std::array<TexelPlane, 3> quantize_planes(const PreactivationGrids& grids,
                                          const QuantizationSpec& quant);

/// Marches every ray through the field across all blocks of `lod` (depth ordered as
/// the renderer orders them) and marks the 8 voxel centers around each sample with
/// weight > tau_w and alpha > tau_alpha. Throws InvalidArgument for an empty ray set.
std::map<BlockId, OccupancyGrid> bake_occupancy(const FieldSource& field,
                                                const BlockLayout& layout, int lod,
                                                const BakeConfig& cfg, std::span<const Ray> rays);
OccupancyGrid bake_occupancy(const FieldSource& field, const BlockLayout& layout,
                             const BlockId& block, const BakeConfig& cfg,
                             std::span<const Ray> rays);

/// Copies every macroblock holding at least one occupied voxel into the atlas, in
/// raster order. Throws InvalidArgument unless dims are multiples of 8.
SparseVoxelAtlas pack_atlas(const TexelGrid& dense, const OccupancyGrid& occupancy);

/// Full bake of one block from its level-0 occupancy.
BlockAssets bake_block(const FieldSource& field, const BlockLayout& layout, const BlockId& block,
                       const BakeConfig& cfg, OccupancyGrid occupancy);

/// Merges a complete 2x2 group of LOD l blocks into the LOD l+1 parent: grids are
/// re-sampled from the field at the parent's resolution; occupancy is the max-pool
/// of the children's level-0 grids in the merged frame, united with `coarse_marks`
/// (occupancy re-thresholded on the parent lattice) when given.
BlockAssets generate_lod(std::span<const BlockAssets* const> children, const FieldSource& field,
                         const BlockLayout& layout, const BakeConfig& cfg,
                         const OccupancyGrid* coarse_marks = nullptr);

/// In-memory bake result: the manifest (file lists filled by export) and assets.
struct BakedScene {
    SceneManifest manifest;
    std::map<BlockId, std::shared_ptr<const BlockAssets>> assets;

    /// Render blocks for `ids`, sharing the manifest's shader weights.
    std::vector<std::unique_ptr<RenderBlock>> render_blocks(std::span<const BlockId> ids) const;
};

/// Shader weights per block at every LOD, each stored as its own group. Without a
/// provider all blocks share one all-zero group.
using ShaderProvider = std::function<DeferredShaderWeights(const BlockId&)>;

/// Bakes LOD 1 from the capture rays, then every coarser LOD by generate_lod.
BakedScene bake_scene(const FieldSource& field, const BlockLayout& layout, const BakeConfig& cfg,
                      std::span<const Ray> rays, const ShaderProvider& shaders = {});

/// Regenerates LODs 2..layout.lod_count from the LOD 1 blocks already in `scene`.
void rebuild_lods(BakedScene& scene, const FieldSource& field, std::span<const Ray> rays);

std::string shader_group_name(const BlockId& id);

}  // namespace blockrf
