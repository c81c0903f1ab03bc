#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "blockrf/math.hpp"

namespace blockrf {

struct Ray {
    Vec3 origin;
    Vec3 dir;  // unit length
    double t_near = 0.0;
    double t_far = 1e30;

    Vec3 at(double t) const { return origin + dir * t; }
};

/// Slab test; on a hit returns the parameter interval clipped to [t_near, t_far].
std::optional<std::pair<double, double>> intersect_box(const Ray& ray, const Box3& box);

/// Pinhole camera. `rotation` maps camera to world; its columns are the camera's
/// right, up and backward axes, so the camera looks along -column(2).
struct PinholeCamera {
    Vec3 position;
    Mat3 rotation = Mat3::identity();
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.5;
    double cy = 0.5;
    int width = 1;
    int height = 1;

    Vec3 forward() const { return -rotation.column(2); }

    /// Ray through image position (px, py); pixel centers sit at half-integers.
    Ray pixel_ray(double px, double py) const;
    /// Camera-space coordinates of a world point (camera looks along -z).
    Vec3 to_camera(const Vec3& world) const;

    /// Camera at `eye` looking at `target`; `up` is the world up hint.
    static PinholeCamera look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                                 double fov_y_deg, int width, int height);
    /// Same pose with new resolution; the field of view is preserved.
    PinholeCamera resized(int new_width, int new_height) const;

    /// Throws InvalidArgument for a zero-area image or degenerate intrinsics.
    void validate() const;
};

std::string camera_to_json(const PinholeCamera& cam);
PinholeCamera camera_from_json(std::string_view text);
PinholeCamera load_camera(const std::filesystem::path& path);
void save_camera(const PinholeCamera& cam, const std::filesystem::path& path);

}  // namespace blockrf
