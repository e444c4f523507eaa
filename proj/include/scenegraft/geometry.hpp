#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace scenegraft {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        if (n == 0.0) throw std::invalid_argument("cannot normalize zero vector");
        return {x / n, y / n, z / n};
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Axis-aligned box given by center and full extents, both in meters.
struct AxisBox {
    Vec3 center;
    Vec3 size;

    Vec3 min() const { return {center.x - size.x / 2, center.y - size.y / 2, center.z - size.z / 2}; }
    Vec3 max() const { return {center.x + size.x / 2, center.y + size.y / 2, center.z + size.z / 2}; }
    double volume() const { return size.x * size.y * size.z; }
};

// Box with a yaw rotation about the world Z axis. yaw is kept in [0, 2pi).
struct OrientedBox {
    Vec3 center;
    Vec3 size;
    double yaw = 0.0;

    // World point -> box frame (rotation and translation only, no scale).
    Vec3 to_local(const Vec3& p) const {
        const double c = std::cos(yaw), s = std::sin(yaw);
        const Vec3 d = p - center;
        return {c * d.x + s * d.y, -s * d.x + c * d.y, d.z};
    }

    // Axis-aligned bounds of the rotated box.
    AxisBox aabb() const {
        const double c = std::abs(std::cos(yaw)), s = std::abs(std::sin(yaw));
        return {center, {size.x * c + size.y * s, size.x * s + size.y * c, size.z}};
    }
};

inline double wrap_angle(double a) {
    const double two_pi = 2.0 * M_PI;
    a = std::fmod(a, two_pi);
    if (a < 0) a += two_pi;
    return a;
}

double iou3d_axis(const AxisBox& a, const AxisBox& b);

// Fraction of entries with iou strictly greater than the threshold.
// Throws on an empty list (the metric is undefined there).
double accuracy_at(const std::vector<double>& ious, double k);

}  // namespace scenegraft
