#include "blockrf/camera_path.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "blockrf/error.hpp"

namespace blockrf {

void OrbitPath::validate() const {
    if (count < 1) throw InvalidArgument("camera path: count must be at least 1");
    if (!(radius > 0.0)) throw InvalidArgument("camera path: radius must be positive");
    if (width < 1 || height_px < 1) throw InvalidArgument("camera path: image must be non-empty");
    if (!(fov_y_deg > 0.0 && fov_y_deg < 180.0))
        throw InvalidArgument("camera path: fov_y_deg must lie in (0, 180)");
}

std::vector<PinholeCamera> orbit_path(const OrbitPath& path) {
    path.validate();
    std::vector<PinholeCamera> out;
    out.reserve(std::size_t(path.count));
    for (int i = 0; i < path.count; ++i) {
        const double a = 2.0 * std::numbers::pi * i / path.count;
        const Vec3 eye{path.center.x + path.radius * std::cos(a),
                       path.center.y + path.radius * std::sin(a), path.height};
        if (!(norm(path.target - eye) > 0.0))
            throw InvalidArgument("camera path: pose " + std::to_string(i) + " sits on its target");
        out.push_back(PinholeCamera::look_at(eye, path.target, {0.0, 0.0, 1.0}, path.fov_y_deg,
                                             path.width, path.height_px));
    }
    return out;
}

std::vector<Ray> capture_rays(std::span<const PinholeCamera> cameras) {
    std::vector<Ray> rays;
    for (const auto& cam : cameras) {
        cam.validate();
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) rays.push_back(cam.pixel_ray(x + 0.5, y + 0.5));
    }
    return rays;
}

}  // namespace blockrf
