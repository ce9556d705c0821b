// Shared value types and unit helpers.
//
// Unit conventions, used everywhere:
//   - internal angular frequencies in rad/s
//   - reported spectrum axes in Hz
//   - the 2*pi conversion happens exactly once, through hz_to_rad/rad_to_hz
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bbopm {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline double hz_to_rad(double f_hz) { return two_pi * f_hz; }
inline double rad_to_hz(double w_rad) { return w_rad / two_pi; }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double dot(const Vec3& a, const Vec3& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

// Value with a one-sigma standard error, the unit all derived report
// quantities are expressed in.
struct Measured {
    double value = 0.0;
    double stderr_ = 0.0;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace bbopm
