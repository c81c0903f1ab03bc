#include "blockrf/assets.hpp"

#include <cmath>

#include "blockrf/error.hpp"

namespace blockrf {

BlockGeometry BlockGeometry::make(const BlockLayout& layout, const BlockId& id, int voxel_res,
                                  int triplane_res) {
    if (!layout.contains(id)) throw DomainError("block " + id.to_string() + " not in layout");
    if (voxel_res < kMacroblock || voxel_res % kMacroblock != 0)
        throw InvalidArgument("voxel_res must be a positive multiple of 8");
    if (triplane_res < 1) throw InvalidArgument("triplane_res must be positive");

    BlockGeometry g;
    g.box = layout.block_box(id);
    const double extent = layout.block_extent(id.lod);
    g.voxel_width = extent / voxel_res;

    const double z_cells = (layout.z_max - layout.z_min) / g.voxel_width;
    const int nz = static_cast<int>(std::lround(z_cells));
    if (nz < 1 || std::abs(z_cells - nz) > 1e-6 || nz % kMacroblock != 0)
        throw InvalidArgument("z range of " + id.to_string() + " spans " +
                              std::to_string(z_cells) +
                              " voxels; it must be a whole multiple of 8");
    g.voxel_dims = {voxel_res, voxel_res, nz};

    const double tz_cells = (layout.z_max - layout.z_min) / (extent / triplane_res);
    const int tz = static_cast<int>(std::lround(tz_cells));
    if (tz < 1 || std::abs(tz_cells - tz) > 1e-6)
        throw InvalidArgument("z range of " + id.to_string() +
                              " is not a whole number of plane texels");
    g.plane_dims = {triplane_res, triplane_res, tz};
    return g;
}

std::size_t OccupancyGrid::occupied_count() const {
    std::size_t n = 0;
    for (auto c : cells) n += c != 0;
    return n;
}

OccupancyGrid maxpool_occupancy(const OccupancyGrid& level) {
    const GridDims d = level.dims;
    if (d.x % 2 != 0 || d.y % 2 != 0 || d.z % 2 != 0)
        throw InvalidArgument("maxpool_occupancy: resolution must be even");
    OccupancyGrid out({d.x / 2, d.y / 2, d.z / 2});
    for (int k = 0; k < d.z; ++k)
        for (int j = 0; j < d.y; ++j)
            for (int i = 0; i < d.x; ++i)
                if (level.at(i, j, k)) out.set(i / 2, j / 2, k / 2);
    return out;
}

OccupancyPyramid OccupancyPyramid::build(OccupancyGrid level0, int level_count) {
    if (level_count < 1) throw InvalidArgument("occupancy pyramid needs at least one level");
    OccupancyPyramid p;
    p.levels.reserve(static_cast<std::size_t>(level_count));
    p.levels.push_back(std::move(level0));
    for (int i = 1; i < level_count; ++i) p.levels.push_back(maxpool_occupancy(p.levels.back()));
    return p;
}

const std::uint8_t* SparseVoxelAtlas::texel(int i, int j, int k) const {
    const std::int32_t slot =
        indirection[macro_index(i / kMacroblock, j / kMacroblock, k / kMacroblock)];
    if (slot == kEmpty) return nullptr;
    const int li = i % kMacroblock, lj = j % kMacroblock, lk = k % kMacroblock;
    return macroblocks.data() + std::size_t(slot) * kMacroblockBytes +
           ((std::size_t(lk) * kMacroblock + lj) * kMacroblock + li) * kChannels;
}

TexelGrid SparseVoxelAtlas::unpack() const {
    TexelGrid g(texel_dims);
    for (int k = 0; k < texel_dims.z; ++k)
        for (int j = 0; j < texel_dims.y; ++j)
            for (int i = 0; i < texel_dims.x; ++i)
                if (const auto* t = texel(i, j, k))
                    std::copy(t, t + kChannels, g.texel(i, j, k));
    return g;
}

void SparseVoxelAtlas::validate() const {
    if (texel_dims.x != macro_dims.x * kMacroblock || texel_dims.y != macro_dims.y * kMacroblock ||
        texel_dims.z != macro_dims.z * kMacroblock)
        throw FormatError("atlas: texel dims are not macro dims times 8");
    if (indirection.size() != macro_dims.count())
        throw FormatError("atlas: indirection grid has wrong size");
    if (macroblocks.size() % kMacroblockBytes != 0)
        throw FormatError("atlas: storage is not a whole number of macroblocks");
    const int m = macroblock_count();
    std::vector<bool> seen(static_cast<std::size_t>(m), false);
    for (auto slot : indirection) {
        if (slot == kEmpty) continue;
        if (slot < 0 || slot >= m) throw FormatError("atlas: indirection entry out of range");
        if (seen[slot]) throw FormatError("atlas: two indirection entries alias one macroblock");
        seen[slot] = true;
    }
}

void BlockAssets::validate() const {
    voxels.validate();
    if (voxels.texel_dims != geometry.voxel_dims)
        throw FormatError("assets: atlas dims disagree with block geometry");
    if (occupancy.levels.empty() || occupancy.base().dims != geometry.voxel_dims)
        throw FormatError("assets: occupancy level 0 must match voxel resolution");
    for (std::size_t l = 0; l + 1 < occupancy.levels.size(); ++l) {
        const auto& fine = occupancy.levels[l];
        const auto& coarse = occupancy.levels[l + 1];
        for (int k = 0; k < fine.dims.z; ++k)
            for (int j = 0; j < fine.dims.y; ++j)
                for (int i = 0; i < fine.dims.x; ++i)
                    if (fine.at(i, j, k) && !coarse.at(i / 2, j / 2, k / 2))
                        throw FormatError("assets: occupancy pyramid is not conservative");
    }
    const auto& base = occupancy.base();
    for (int k = 0; k < base.dims.z; ++k)
        for (int j = 0; j < base.dims.y; ++j)
            for (int i = 0; i < base.dims.x; ++i)
                if (base.at(i, j, k) && voxels.macro_empty(i, j, k))
                    throw FormatError("assets: occupied voxel in an EMPTY macroblock");
    const GridDims pd = geometry.plane_dims;
    const std::array<std::pair<int, int>, 3> expect{
        {{pd.x, pd.y}, {pd.x, pd.z}, {pd.y, pd.z}}};
    for (int a = 0; a < 3; ++a)
        if (planes[a].width != expect[a].first || planes[a].height != expect[a].second ||
            planes[a].data.size() != std::size_t(planes[a].width) * planes[a].height * kChannels)
            throw FormatError("assets: plane dims disagree with block geometry");
}

double BlockAssets::occupied_top() const {
    const auto& base = occupancy.base();
    for (int k = base.dims.z - 1; k >= 0; --k)
        for (int j = 0; j < base.dims.y; ++j)
            for (int i = 0; i < base.dims.x; ++i)
                if (base.at(i, j, k)) return geometry.texel_center(i, j, k).z;
    return geometry.box.lo.z;
}

std::optional<Box3> BlockAssets::occupied_region() const {
    const auto& base = occupancy.base();
    int lo[3] = {base.dims.x, base.dims.y, base.dims.z}, hi[3] = {-1, -1, -1};
    for (int k = 0; k < base.dims.z; ++k)
        for (int j = 0; j < base.dims.y; ++j)
            for (int i = 0; i < base.dims.x; ++i) {
                if (!base.at(i, j, k)) continue;
                const int c[3] = {i, j, k};
                for (int a = 0; a < 3; ++a) {
                    lo[a] = std::min(lo[a], c[a]);
                    hi[a] = std::max(hi[a], c[a]);
                }
            }
    if (hi[0] < 0) return std::nullopt;
    const double w = geometry.voxel_width;
    Box3 r;
    for (int a = 0; a < 3; ++a) {
        r.lo[a] = geometry.box.lo[a] + (lo[a] - 0.5) * w;
        r.hi[a] = geometry.box.lo[a] + (hi[a] + 1.5) * w;
    }
    return r;
}

DequantTable make_dequant_table(const QuantizationSpec& quant) {
    DequantTable table{};
    for (int c = 0; c < kChannels; ++c)
        for (int code = 0; code < 256; ++code)
            table[c][code] = dequantize(static_cast<std::uint8_t>(code), quant.ranges[c]);
    return table;
}

AttributeSampler::AttributeSampler(const BlockAssets& assets)
    : assets_(&assets), table_(make_dequant_table(assets.quant)) {}

namespace {

struct Lerp1 {
    int i0, i1;
    double f;
};

inline Lerp1 lerp_coord(double u, int n) {
    const double fl = std::floor(u);
    int i0 = static_cast<int>(fl);
    double f = u - fl;
    int i1 = i0 + 1;
    if (i0 < 0) {
        i0 = i1 = 0;
        f = 0.0;
    } else if (i1 > n - 1) {
        i0 = i1 = n - 1;
        f = 0.0;
    }
    return {i0, i1, f};
}

}  // namespace

void add_plane_samples(const BlockGeometry& g, const std::array<TexelPlane, 3>& planes,
                       const DequantTable& table, const Vec3& p,
                       std::array<double, kChannels>& acc) {
    const Vec3 tw = g.plane_texel_width();
    const double pu[3] = {(p.x - g.box.lo.x) / tw.x - 0.5, (p.y - g.box.lo.y) / tw.y - 0.5,
                          (p.z - g.box.lo.z) / tw.z - 0.5};
    static constexpr int kAxes[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (int pl = 0; pl < 3; ++pl) {
        const TexelPlane& plane = planes[pl];
        const Lerp1 lu = lerp_coord(pu[kAxes[pl][0]], plane.width);
        const Lerp1 lv = lerp_coord(pu[kAxes[pl][1]], plane.height);
        const std::uint8_t* t00 = plane.texel(lu.i0, lv.i0);
        const std::uint8_t* t10 = plane.texel(lu.i1, lv.i0);
        const std::uint8_t* t01 = plane.texel(lu.i0, lv.i1);
        const std::uint8_t* t11 = plane.texel(lu.i1, lv.i1);
        const double w00 = (1 - lu.f) * (1 - lv.f), w10 = lu.f * (1 - lv.f);
        const double w01 = (1 - lu.f) * lv.f, w11 = lu.f * lv.f;
        for (int ch = 0; ch < kChannels; ++ch) {
            const auto& tb = table[ch];
            acc[ch] += w00 * tb[t00[ch]] + w10 * tb[t10[ch]] + w01 * tb[t01[ch]] +
                       w11 * tb[t11[ch]];
        }
    }
}

bool AttributeSampler::pre_activations(const Vec3& p, std::array<double, kChannels>& out) const {
    const BlockAssets& a = *assets_;
    const BlockGeometry& g = a.geometry;
    const double w = g.voxel_width;
    const Lerp1 lx = lerp_coord((p.x - g.box.lo.x) / w - 0.5, g.voxel_dims.x);
    const Lerp1 ly = lerp_coord((p.y - g.box.lo.y) / w - 0.5, g.voxel_dims.y);
    const Lerp1 lz = lerp_coord((p.z - g.box.lo.z) / w - 0.5, g.voxel_dims.z);

    static constexpr std::uint8_t kZero[kChannels] = {};
    const std::uint8_t* corner[8];
    bool any = false;
    for (int c = 0; c < 8; ++c) {
        const int i = (c & 1) ? lx.i1 : lx.i0;
        const int j = (c & 2) ? ly.i1 : ly.i0;
        const int k = (c & 4) ? lz.i1 : lz.i0;
        corner[c] = a.voxels.texel(i, j, k);
        if (corner[c]) any = true;
        else corner[c] = kZero;
    }
    if (!any) return false;

    double wts[8];
    for (int c = 0; c < 8; ++c)
        wts[c] = ((c & 1) ? lx.f : 1.0 - lx.f) * ((c & 2) ? ly.f : 1.0 - ly.f) *
                 ((c & 4) ? lz.f : 1.0 - lz.f);
    for (int ch = 0; ch < kChannels; ++ch) {
        double s = 0.0;
        for (int c = 0; c < 8; ++c) s += wts[c] * table_[ch][corner[c][ch]];
        out[ch] = s;
    }

    add_plane_samples(g, a.planes, table_, p, out);
    return true;
}

Attributes AttributeSampler::sample(const Vec3& p) const {
    std::array<double, kChannels> pre;
    Attributes out;
    if (!pre_activations(p, pre)) return out;
    out.sigma = std::min(std::exp(pre[kDensityChannel]), kSigmaMax);
    for (int c = 0; c < 3; ++c) out.diffuse[c] = sigmoid(pre[kDiffuseChannel + c]);
    for (int c = 0; c < 4; ++c) out.feature[c] = sigmoid(pre[kFeatureChannel + c]);
    return out;
}

Attributes query_attributes(const Vec3& p, const BlockAssets& assets) {
    return AttributeSampler(assets).sample(p);
}

}  // namespace blockrf
