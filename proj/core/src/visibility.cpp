#include "blockrf/visibility.hpp"

#include <array>
#include <vector>

namespace blockrf {

namespace {

constexpr double kNearPlane = 1e-6;

// Half-spaces a.q + b * depth >= 0 in camera coordinates, depth = -q.z.
struct HalfSpace {
    Vec3 n;
    double offset = 0.0;
    double eval(const Vec3& q) const { return dot(n, q) + offset; }
};

std::array<HalfSpace, 5> frustum_planes(const PinholeCamera& c) {
    const double w = c.width, h = c.height;
    // Image x = cx + fx * qx / d, image y = cy - fy * qy / d, with d = -qz.
    return {{
        {{c.fx, 0.0, -c.cx}, 0.0},             // x >= 0
        {{-c.fx, 0.0, -(w - c.cx)}, 0.0},      // x <= width
        {{0.0, -c.fy, -c.cy}, 0.0},            // y >= 0
        {{0.0, c.fy, -(h - c.cy)}, 0.0},       // y <= height
        {{0.0, 0.0, -1.0}, -kNearPlane},       // d >= near
    }};
}

std::vector<Vec3> clip(const std::vector<Vec3>& poly, const HalfSpace& hs) {
    std::vector<Vec3> out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& a = poly[i];
        const Vec3& b = poly[(i + 1) % n];
        const double da = hs.eval(a), db = hs.eval(b);
        if (da >= 0.0) out.push_back(a);
        if ((da >= 0.0) != (db >= 0.0)) out.push_back(a + (b - a) * (da / (da - db)));
    }
    return out;
}

}  // namespace

bool box_visible(const PinholeCamera& camera, const Box3& box) {
    const Vec3& lo = box.lo;
    const Vec3& hi = box.hi;
    std::array<Vec3, 8> corner;
    for (int c = 0; c < 8; ++c)
        corner[c] = camera.to_camera({(c & 1) ? hi.x : lo.x, (c & 2) ? hi.y : lo.y,
                                      (c & 4) ? hi.z : lo.z});
    static constexpr int kFaces[6][4] = {{0, 1, 3, 2}, {4, 5, 7, 6}, {0, 1, 5, 4},
                                         {2, 3, 7, 6}, {0, 2, 6, 4}, {1, 3, 7, 5}};
    const auto planes = frustum_planes(camera);
    for (const auto& face : kFaces) {
        std::vector<Vec3> poly{corner[face[0]], corner[face[1]], corner[face[2]],
                               corner[face[3]]};
        for (const auto& hs : planes) {
            poly = clip(poly, hs);
            if (poly.empty()) break;
        }
        if (!poly.empty()) return true;
    }
    return false;
}

bool block_visible(const PinholeCamera& camera, const BlockLayout& layout, const BlockId& id,
                   double z_top) {
    Box3 box = layout.block_box(id);
    const Vec3& p = camera.position;
    if (p.x >= box.lo.x && p.x <= box.hi.x && p.y >= box.lo.y && p.y <= box.hi.y) return true;
    box.hi.z = std::max(z_top, box.lo.z);
    return box_visible(camera, box);
}

}  // namespace blockrf
