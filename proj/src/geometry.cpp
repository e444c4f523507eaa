#include "scenegraft/geometry.hpp"

namespace scenegraft {

double iou3d_axis(const AxisBox& a, const AxisBox& b) {
    const Vec3 lo_a = a.min(), hi_a = a.max();
    const Vec3 lo_b = b.min(), hi_b = b.max();
    const double ix = std::max(0.0, std::min(hi_a.x, hi_b.x) - std::max(lo_a.x, lo_b.x));
    const double iy = std::max(0.0, std::min(hi_a.y, hi_b.y) - std::max(lo_a.y, lo_b.y));
    const double iz = std::max(0.0, std::min(hi_a.z, hi_b.z) - std::max(lo_a.z, lo_b.z));
    const double inter = ix * iy * iz;
    const double uni = a.volume() + b.volume() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

double accuracy_at(const std::vector<double>& ious, double k) {
    if (ious.empty()) throw std::invalid_argument("accuracy_at: empty iou list");
    std::size_t hits = 0;
    for (double v : ious) {
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("accuracy_at: iou outside [0,1]");
        if (v > k) ++hits;  // strict inequality
    }
    return static_cast<double>(hits) / static_cast<double>(ious.size());
}

}  // namespace scenegraft
