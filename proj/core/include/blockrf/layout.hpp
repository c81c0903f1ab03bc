#pragma once

#include <compare>
#include <string>
#include <vector>

#include "blockrf/math.hpp"

namespace blockrf {

/// A block at one level of detail. LOD 1 is the finest level.
struct BlockId {
    int lod = 1;
    int ix = 0;
    int iy = 0;

    // Ordering is (lod, iy, ix); it doubles as the deterministic tie-break rule
    // for depth sorting and for points on shared block boundaries.
    constexpr auto operator<=>(const BlockId& o) const {
        if (auto c = lod <=> o.lod; c != 0) return c;
        if (auto c = iy <=> o.iy; c != 0) return c;
        return ix <=> o.ix;
    }
    constexpr bool operator==(const BlockId&) const = default;

    std::string to_string() const;
};

/// Uniform xy partition of the scene into finest-LOD blocks plus the LOD pyramid
/// built by 2x2 merging.
struct BlockLayout {
    Vec2 origin;
    double block_size = 1.0;
    int nx = 1;
    int ny = 1;
    double z_min = 0.0;
    double z_max = 1.0;
    int lod_count = 1;

    /// Throws InvalidArgument when the layout cannot support its LOD count.
    void validate() const;

    int blocks_x(int lod) const;
    int blocks_y(int lod) const;
    int block_count(int lod) const { return blocks_x(lod) * blocks_y(lod); }
    double block_extent(int lod) const;

    bool contains(const BlockId& id) const;
    Vec2 block_center(const BlockId& id) const;
    Box3 block_box(const BlockId& id) const;
    /// Blocks of one LOD in (iy, ix) order.
    std::vector<BlockId> blocks(int lod) const;

    BlockId parent(const BlockId& id) const;
    /// The four finer blocks merged into `id`, in (iy, ix) order.
    std::vector<BlockId> children(const BlockId& id) const;
    /// True when `ancestor` covers `id` (or equals it).
    bool covers(const BlockId& ancestor, const BlockId& id) const;

    Vec2 domain_min() const { return origin; }
    Vec2 domain_max() const { return {origin.x + nx * block_size, origin.y + ny * block_size}; }

    bool operator==(const BlockLayout&) const = default;
};

/// Block containing the xy projection of `p` at `lod`. Points on a shared edge go to the
/// block with the smaller (iy, ix). Throws DomainError outside the layout rectangle.
BlockId assign_block(const Vec3& p, const BlockLayout& layout, int lod = 1);

/// Piecewise contraction of unbounded space into the open L-infinity ball of radius 2.
/// Identity inside the unit ball.
Vec3 contract(const Vec3& x);

}  // namespace blockrf
