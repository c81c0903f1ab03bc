#pragma once

#include "blockrf/camera.hpp"
#include "blockrf/layout.hpp"

namespace blockrf {

/// Conservative visibility of the block column [footprint] x [z_min, z_top]: true when
/// the camera sits over the footprint or any part of the column survives clipping
/// against the four image-edge planes and the near plane.
bool block_visible(const PinholeCamera& camera, const BlockLayout& layout, const BlockId& id,
                   double z_top);

/// Same test for an arbitrary axis-aligned box.
bool box_visible(const PinholeCamera& camera, const Box3& box);

}  // namespace blockrf
