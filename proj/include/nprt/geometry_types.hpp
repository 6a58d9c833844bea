#pragma once

#include <cstdint>

#include "nprt/common.hpp"

namespace nprt {

struct SurfaceSample {
    Vec3 position;
    Vec3 normal;  // unit
};

struct RayHit {
    bool hit = false;
    double t = INFINITY;
    Vec3 position;
    Vec3 normal;  // geometric normal (mesh) or SDF gradient direction
    std::uint32_t triangle = 0;
    Vec3 bary;  // mesh hits only
};

}  // namespace nprt
