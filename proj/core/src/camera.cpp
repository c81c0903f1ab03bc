#include "blockrf/camera.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "blockrf/error.hpp"

namespace blockrf {

using nlohmann::json;

std::optional<std::pair<double, double>> intersect_box(const Ray& ray, const Box3& box) {
    double t0 = ray.t_near;
    double t1 = ray.t_far;
    for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[a];
        const double d = ray.dir[a];
        if (d == 0.0) {
            if (o < box.lo[a] || o > box.hi[a]) return std::nullopt;
            continue;
        }
        double ta = (box.lo[a] - o) / d;
        double tb = (box.hi[a] - o) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 >= t1) return std::nullopt;
    }
    return std::make_pair(t0, t1);
}

Ray PinholeCamera::pixel_ray(double px, double py) const {
    const Vec3 d_cam{(px - cx) / fx, -(py - cy) / fy, -1.0};
    Ray r;
    r.origin = position;
    r.dir = normalize(rotation * d_cam);
    return r;
}

Vec3 PinholeCamera::to_camera(const Vec3& world) const {
    return rotation.transposed() * (world - position);
}

PinholeCamera PinholeCamera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                                     double fov_y_deg, int width, int height) {
    const Vec3 fwd = normalize(target - eye);
    Vec3 right = cross(fwd, up);
    if (norm(right) < 1e-12) right = cross(fwd, Vec3{0.0, 1.0, 0.0});
    if (norm(right) < 1e-12) right = cross(fwd, Vec3{1.0, 0.0, 0.0});
    right = normalize(right);
    const Vec3 cam_up = normalize(cross(right, fwd));
    PinholeCamera c;
    c.position = eye;
    c.rotation = Mat3::from_columns(right, cam_up, -fwd);
    c.width = width;
    c.height = height;
    const double f = 0.5 * height / std::tan(0.5 * fov_y_deg * std::numbers::pi / 180.0);
    c.fx = c.fy = f;
    c.cx = 0.5 * width;
    c.cy = 0.5 * height;
    return c;
}

PinholeCamera PinholeCamera::resized(int new_width, int new_height) const {
    PinholeCamera c = *this;
    const double sx = double(new_width) / width;
    const double sy = double(new_height) / height;
    c.width = new_width;
    c.height = new_height;
    c.fx *= sx;
    c.cx *= sx;
    c.fy *= sy;
    c.cy *= sy;
    return c;
}

void PinholeCamera::validate() const {
    if (width <= 0 || height <= 0) throw InvalidArgument("camera: zero-area image");
    if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("camera: focal lengths must be positive");
}

std::string camera_to_json(const PinholeCamera& cam) {
    json j;
    j["position"] = {cam.position.x, cam.position.y, cam.position.z};
    json rows = json::array();
    for (int i = 0; i < 3; ++i) rows.push_back({cam.rotation.m[i][0], cam.rotation.m[i][1], cam.rotation.m[i][2]});
    j["rotation"] = rows;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    return j.dump(2);
}

namespace {

Vec3 vec3_of(const json& j) {
    if (!j.is_array() || j.size() != 3) throw FormatError("camera: expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

PinholeCamera camera_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("camera: ") + e.what());
    }
    try {
        const int width = j.at("width").get<int>();
        const int height = j.at("height").get<int>();
        PinholeCamera cam;
        if (j.contains("look_at")) {
            const Vec3 up = j.contains("up") ? vec3_of(j["up"]) : Vec3{0, 0, 1};
            cam = PinholeCamera::look_at(vec3_of(j.at("position")), vec3_of(j["look_at"]), up,
                                         j.value("fov_y_deg", 60.0), width, height);
        } else {
            cam.position = vec3_of(j.at("position"));
            const json& rows = j.at("rotation");
            if (!rows.is_array() || rows.size() != 3) throw FormatError("camera: rotation must be 3x3");
            for (int i = 0; i < 3; ++i) {
                const Vec3 r = vec3_of(rows[i]);
                for (int k = 0; k < 3; ++k) cam.rotation.m[i][k] = r[k];
            }
            cam.width = width;
            cam.height = height;
            cam.fx = j.at("fx").get<double>();
            cam.fy = j.at("fy").get<double>();
            cam.cx = j.value("cx", 0.5 * width);
            cam.cy = j.value("cy", 0.5 * height);
        }
        cam.validate();
        return cam;
    } catch (const json::exception& e) {
        throw FormatError(std::string("camera: ") + e.what());
    }
}

PinholeCamera load_camera(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open camera file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return camera_from_json(ss.str());
}

void save_camera(const PinholeCamera& cam, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write camera file " + path.string());
    out << camera_to_json(cam) << "\n";
}

}  // namespace blockrf
