#pragma once

#include "blockrf/quantize.hpp"

namespace blockrf {

struct BakeConfig {
    int voxel_res = 64;      // voxels along x and y of one block (every LOD)
    int triplane_res = 256;  // plane texels along x and y of one block
    double tau_w = 0.005;    // sample weight threshold for occupancy marking
    double tau_alpha = 0.005;
    int ray_budget = 1 << 16;  // occupancy rays across the whole capture path
    int pyramid_levels = 3;
    /// Share of each pre-activation channel carried by the planes (0 = voxels only).
    double plane_share = 0.0;
    QuantizationSpec quant = QuantizationSpec::defaults();
    int workers = 0;

    /// Throws InvalidArgument on thresholds outside (0, 1) or bad resolutions.
    void validate() const;
    bool operator==(const BakeConfig&) const = default;
};

}  // namespace blockrf
