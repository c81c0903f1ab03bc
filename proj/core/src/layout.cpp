#include "blockrf/layout.hpp"

#include <cmath>

#include "blockrf/error.hpp"

namespace blockrf {

std::string BlockId::to_string() const {
    return "lod" + std::to_string(lod) + "/block_" + std::to_string(ix) + "_" + std::to_string(iy);
}

void BlockLayout::validate() const {
    if (!(block_size > 0.0) || !std::isfinite(block_size))
        throw InvalidArgument("layout: block_size must be positive");
    if (!(z_max > z_min)) throw InvalidArgument("layout: z_max must exceed z_min");
    if (lod_count < 1) throw InvalidArgument("layout: lod_count must be >= 1");
    if (nx < 1 || ny < 1) throw InvalidArgument("layout: grid dims must be positive");
    const int merge = 1 << (lod_count - 1);
    if (nx % merge != 0 || ny % merge != 0)
        throw InvalidArgument("layout: grid dims must be divisible by 2^(lod_count-1)");
}

int BlockLayout::blocks_x(int lod) const { return nx >> (lod - 1); }
int BlockLayout::blocks_y(int lod) const { return ny >> (lod - 1); }
double BlockLayout::block_extent(int lod) const { return block_size * double(1 << (lod - 1)); }

bool BlockLayout::contains(const BlockId& id) const {
    return id.lod >= 1 && id.lod <= lod_count && id.ix >= 0 && id.iy >= 0 &&
           id.ix < blocks_x(id.lod) && id.iy < blocks_y(id.lod);
}

Vec2 BlockLayout::block_center(const BlockId& id) const {
    const double e = block_extent(id.lod);
    return {origin.x + (id.ix + 0.5) * e, origin.y + (id.iy + 0.5) * e};
}

Box3 BlockLayout::block_box(const BlockId& id) const {
    const double e = block_extent(id.lod);
    return {{origin.x + id.ix * e, origin.y + id.iy * e, z_min},
            {origin.x + (id.ix + 1) * e, origin.y + (id.iy + 1) * e, z_max}};
}

std::vector<BlockId> BlockLayout::blocks(int lod) const {
    std::vector<BlockId> out;
    out.reserve(static_cast<size_t>(block_count(lod)));
    for (int iy = 0; iy < blocks_y(lod); ++iy)
        for (int ix = 0; ix < blocks_x(lod); ++ix) out.push_back({lod, ix, iy});
    return out;
}

BlockId BlockLayout::parent(const BlockId& id) const {
    if (id.lod >= lod_count) throw DomainError("block " + id.to_string() + " has no parent");
    return {id.lod + 1, id.ix / 2, id.iy / 2};
}

std::vector<BlockId> BlockLayout::children(const BlockId& id) const {
    if (id.lod <= 1) throw DomainError("block " + id.to_string() + " has no children");
    const int l = id.lod - 1;
    return {{l, 2 * id.ix, 2 * id.iy},
            {l, 2 * id.ix + 1, 2 * id.iy},
            {l, 2 * id.ix, 2 * id.iy + 1},
            {l, 2 * id.ix + 1, 2 * id.iy + 1}};
}

bool BlockLayout::covers(const BlockId& ancestor, const BlockId& id) const {
    if (ancestor.lod < id.lod) return false;
    const int shift = ancestor.lod - id.lod;
    return (id.ix >> shift) == ancestor.ix && (id.iy >> shift) == ancestor.iy;
}

namespace {

// Half-open (lo, hi] cells: a coordinate on an interior edge belongs to the lower cell.
int cell_index(double coord, double lo, double extent, int count) {
    const double u = (coord - lo) / extent;
    int i = static_cast<int>(std::ceil(u)) - 1;
    if (i < 0) i = 0;
    if (i >= count) i = count - 1;
    return i;
}

}  // namespace

BlockId assign_block(const Vec3& p, const BlockLayout& layout, int lod) {
    if (lod < 1 || lod > layout.lod_count) throw DomainError("assign_block: lod out of range");
    const Vec2 lo = layout.domain_min();
    const Vec2 hi = layout.domain_max();
    if (!(p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y))
        throw DomainError("assign_block: point outside layout bounds");
    const double e = layout.block_extent(lod);
    return {lod, cell_index(p.x, lo.x, e, layout.blocks_x(lod)),
            cell_index(p.y, lo.y, e, layout.blocks_y(lod))};
}

Vec3 contract(const Vec3& x) {
    const double m = max_abs(x);
    if (m <= 1.0) return x;
    Vec3 out;
    for (int j = 0; j < 3; ++j) {
        const double a = std::abs(x[j]);
        if (a == m)
            out[j] = (2.0 - 1.0 / a) * (x[j] > 0 ? 1.0 : -1.0);
        else
            out[j] = x[j] / m;
    }
    return out;
}

}  // namespace blockrf
