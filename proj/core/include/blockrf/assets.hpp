#pragma once

#include <array>
#include <optional>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "blockrf/layout.hpp"
#include "blockrf/math.hpp"
#include "blockrf/quantize.hpp"

namespace blockrf {

inline constexpr int kMacroblock = 8;
inline constexpr double kSigmaMax = 1e4;

struct GridDims {
    int x = 0;
    int y = 0;
    int z = 0;

    std::size_t count() const { return std::size_t(x) * std::size_t(y) * std::size_t(z); }
    bool operator==(const GridDims&) const = default;
};

/// World-space placement of a block's texel grids. Voxels are cubes of edge
/// `voxel_width`; texel (i, j, k) sits at the center of its cell.
struct BlockGeometry {
    Box3 box;
    double voxel_width = 0.0;
    GridDims voxel_dims;
    GridDims plane_dims;  // xy plane uses (x, y), xz uses (x, z), yz uses (y, z)

    /// Throws InvalidArgument when the z extent is not a whole number of voxels or
    /// the voxel counts are not multiples of the macroblock edge.
    static BlockGeometry make(const BlockLayout& layout, const BlockId& id, int voxel_res,
                              int triplane_res);

    Vec3 texel_center(int i, int j, int k) const {
        return {box.lo.x + (i + 0.5) * voxel_width, box.lo.y + (j + 0.5) * voxel_width,
                box.lo.z + (k + 0.5) * voxel_width};
    }
    Vec3 plane_texel_width() const {
        const Vec3 e = box.extent();
        return {e.x / plane_dims.x, e.y / plane_dims.y, e.z / plane_dims.z};
    }
};

/// Dense 3D array of 8-channel quantized texels, x fastest.
struct TexelGrid {
    GridDims dims;
    std::vector<std::uint8_t> data;

    TexelGrid() = default;
    explicit TexelGrid(GridDims d) : dims(d), data(d.count() * kChannels, 0) {}

    std::size_t offset(int i, int j, int k) const {
        return ((std::size_t(k) * dims.y + j) * dims.x + i) * kChannels;
    }
    std::uint8_t* texel(int i, int j, int k) { return data.data() + offset(i, j, k); }
    const std::uint8_t* texel(int i, int j, int k) const { return data.data() + offset(i, j, k); }
};

/// 2D array of 8-channel quantized texels, u fastest.
struct TexelPlane {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    TexelPlane() = default;
    TexelPlane(int w, int h) : width(w), height(h), data(std::size_t(w) * h * kChannels, 0) {}

    std::uint8_t* texel(int u, int v) { return data.data() + (std::size_t(v) * width + u) * kChannels; }
    const std::uint8_t* texel(int u, int v) const {
        return data.data() + (std::size_t(v) * width + u) * kChannels;
    }
};

enum class PlaneAxis { XY = 0, XZ = 1, YZ = 2 };

/// Binary 3D grid, one byte per cell.
struct OccupancyGrid {
    GridDims dims;
    std::vector<std::uint8_t> cells;

    OccupancyGrid() = default;
    explicit OccupancyGrid(GridDims d) : dims(d), cells(d.count(), 0) {}

    std::size_t index(int i, int j, int k) const {
        return (std::size_t(k) * dims.y + j) * dims.x + i;
    }
    bool at(int i, int j, int k) const { return cells[index(i, j, k)] != 0; }
    void set(int i, int j, int k, bool v = true) { cells[index(i, j, k)] = v ? 1 : 0; }
    std::size_t occupied_count() const;
    bool operator==(const OccupancyGrid&) const = default;
};

/// Parent cell is occupied iff any of its 8 children is. Throws InvalidArgument on
/// odd dimensions.
OccupancyGrid maxpool_occupancy(const OccupancyGrid& level);

/// Max-pooled hierarchy; level 0 is at voxel resolution.
struct OccupancyPyramid {
    std::vector<OccupancyGrid> levels;

    static OccupancyPyramid build(OccupancyGrid level0, int level_count);
    const OccupancyGrid& base() const { return levels.front(); }
};

/// Block-sparse storage of the voxel grid: occupied 8^3 macroblocks are stored
/// contiguously and addressed through a coarse indirection grid.
struct SparseVoxelAtlas {
    static constexpr std::int32_t kEmpty = -1;
    static constexpr std::size_t kMacroblockBytes =
        std::size_t(kMacroblock) * kMacroblock * kMacroblock * kChannels;

    GridDims texel_dims;
    GridDims macro_dims;
    std::vector<std::int32_t> indirection;
    std::vector<std::uint8_t> macroblocks;

    int macroblock_count() const { return int(macroblocks.size() / kMacroblockBytes); }
    std::size_t macro_index(int mi, int mj, int mk) const {
        return (std::size_t(mk) * macro_dims.y + mj) * macro_dims.x + mi;
    }
    bool macro_empty(int i, int j, int k) const {
        return indirection[macro_index(i / kMacroblock, j / kMacroblock, k / kMacroblock)] ==
               kEmpty;
    }
    /// Texel at voxel (i, j, k) or nullptr when its macroblock is EMPTY.
    const std::uint8_t* texel(int i, int j, int k) const;
    /// Dense copy; EMPTY macroblocks become all-zero codes.
    TexelGrid unpack() const;
    /// Throws FormatError when an entry is out of range or two entries alias.
    void validate() const;
};

/// All quantized data needed to render one block.
struct BlockAssets {
    BlockId block;
    BlockGeometry geometry;
    QuantizationSpec quant;
    SparseVoxelAtlas voxels;
    std::array<TexelPlane, 3> planes;
    OccupancyPyramid occupancy;
    std::string shader_group;

    /// Checks atlas integrity, pyramid conservativeness, and that every occupied
    /// level-0 cell lies in a stored macroblock.
    void validate() const;
    /// Highest world z of any occupied texel center; z_min for an empty block.
    double occupied_top() const;
    /// Bounds of the occupied level-0 cells grown by half a voxel; nullopt when
    /// nothing is occupied. Lattice samples outside it are always skipped.
    std::optional<Box3> occupied_region() const;
};

/// Activated point attributes.
struct Attributes {
    double sigma = 0.0;
    Vec3 diffuse;
    std::array<double, 4> feature{};
};

using DequantTable = std::array<std::array<double, 256>, kChannels>;
DequantTable make_dequant_table(const QuantizationSpec& quant);

/// Adds the bilinear samples of the three planes at `p` to `acc`, per channel.
void add_plane_samples(const BlockGeometry& geom, const std::array<TexelPlane, 3>& planes,
                       const DequantTable& table, const Vec3& p,
                       std::array<double, kChannels>& acc);

/// Attribute lookup with a precomputed dequantization table.
class AttributeSampler {
public:
    explicit AttributeSampler(const BlockAssets& assets);

    /// Trilinear voxel sample plus bilinear samples of the three planes, summed per
    /// channel before activation. Zero when all eight neighbor texels are EMPTY.
    Attributes sample(const Vec3& p) const;
    /// Summed pre-activations; false when the neighborhood is EMPTY.
    bool pre_activations(const Vec3& p, std::array<double, kChannels>& out) const;

    const BlockAssets& assets() const { return *assets_; }

private:
    const BlockAssets* assets_;
    DequantTable table_{};
};

/// One-off lookup; builds a sampler per call, so loops should hold an AttributeSampler.
Attributes query_attributes(const Vec3& p, const BlockAssets& assets);

}  // namespace blockrf
