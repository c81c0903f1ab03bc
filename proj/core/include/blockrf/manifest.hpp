#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "blockrf/bake_config.hpp"
#include "blockrf/layout.hpp"
#include "blockrf/shader.hpp"

namespace blockrf {

inline constexpr int kManifestFormatVersion = 1;

struct AssetFile {
    std::string name;
    std::uint64_t bytes = 0;
    std::string sha256;

    bool operator==(const AssetFile&) const = default;
};

struct ManifestBlock {
    BlockId id;
    double z_top = 0.0;
    std::string shader_group;
    int atlas_macroblocks = 0;
    std::vector<AssetFile> files;

    std::uint64_t total_bytes() const;
    /// "lod{l}/block_{ix}_{iy}", relative to the asset root.
    std::string directory() const { return block_directory(id); }
    static std::string block_directory(const BlockId& id);

    bool operator==(const ManifestBlock&) const = default;
};

struct PolicyParameters {
    /// Distance thresholds D_1 .. D_{L-1}; a block at LOD l+1 is refined into its
    /// children when its render center is within D_l of the camera.
    std::vector<double> lod_thresholds;
    std::uint64_t memory_budget = 256ull << 20;

    bool operator==(const PolicyParameters&) const = default;
};

/// Streamable index of every baked LOD, block and asset file.
struct SceneManifest {
    int format_version = kManifestFormatVersion;
    BlockLayout layout;
    BakeConfig bake;
    Vec3 background{0.5, 0.5, 0.5};
    PolicyParameters policy;
    std::map<std::string, DeferredShaderWeights> shader_groups;
    std::vector<ManifestBlock> blocks;  // sorted by BlockId

    const ManifestBlock& block(const BlockId& id) const;
    const ManifestBlock* find(const BlockId& id) const;
    ManifestBlock& upsert(const BlockId& id);
    const DeferredShaderWeights& shader(const BlockId& id) const;

    /// Every block implied by the layout appears exactly once; thresholds are
    /// strictly increasing towards coarser LODs; shader references resolve.
    void validate() const;

    std::string to_json() const;
    static SceneManifest from_json(std::string_view text);
    static SceneManifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    bool operator==(const SceneManifest&) const = default;
};

/// D_l = 2 x (xy diagonal of a block at LOD l), for l = 1 .. L-1.
std::vector<double> default_lod_thresholds(const BlockLayout& layout);

}  // namespace blockrf
