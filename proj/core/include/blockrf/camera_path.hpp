#pragma once

#include <span>
#include <vector>

#include "blockrf/camera.hpp"

namespace blockrf {

/// Circular capture orbit: `count` poses on a circle of `radius` around `center`
/// at z = `height`, all looking at `target`.
struct OrbitPath {
    Vec2 center;
    double radius = 1.0;
    double height = 1.0;
    int count = 1;
    Vec3 target;
    double fov_y_deg = 60.0;
    int width = 64;
    int height_px = 64;

    /// Throws InvalidArgument for count < 1, radius <= 0 or a degenerate view.
    void validate() const;
};

/// Pose i sits at angle 2 pi i / count from the +x axis.
std::vector<PinholeCamera> orbit_path(const OrbitPath& path);

/// One ray through every pixel center of every camera, camera by camera in row order.
std::vector<Ray> capture_rays(std::span<const PinholeCamera> cameras);

}  // namespace blockrf
