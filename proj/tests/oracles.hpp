#pragma once

// Independent reference implementations shared by the test binaries.

#include <array>
#include <cmath>

#include "nprt/common.hpp"

namespace nprt::oracle {

// Closed-form real SH polynomials (bands 0-3), written out independently of
// the recurrence used by the library.
inline std::array<double, 16> closed_form_sh(const Vec3& d)
{
    const double x = d.x, y = d.y, z = d.z;
    const double pi = kPi;
    return {
        0.5 / std::sqrt(pi),
        std::sqrt(3.0 / (4.0 * pi)) * y,
        std::sqrt(3.0 / (4.0 * pi)) * z,
        std::sqrt(3.0 / (4.0 * pi)) * x,
        0.5 * std::sqrt(15.0 / pi) * x * y,
        0.5 * std::sqrt(15.0 / pi) * y * z,
        0.25 * std::sqrt(5.0 / pi) * (3.0 * z * z - 1.0),
        0.5 * std::sqrt(15.0 / pi) * x * z,
        0.25 * std::sqrt(15.0 / pi) * (x * x - y * y),
        0.25 * std::sqrt(35.0 / (2.0 * pi)) * y * (3.0 * x * x - y * y),
        0.5 * std::sqrt(105.0 / pi) * x * y * z,
        0.25 * std::sqrt(21.0 / (2.0 * pi)) * y * (5.0 * z * z - 1.0),
        0.25 * std::sqrt(7.0 / pi) * z * (5.0 * z * z - 3.0),
        0.25 * std::sqrt(21.0 / (2.0 * pi)) * x * (5.0 * z * z - 1.0),
        0.25 * std::sqrt(105.0 / pi) * z * (x * x - y * y),
        0.25 * std::sqrt(35.0 / (2.0 * pi)) * x * (x * x - 3.0 * y * y),
    };
}

// Composite Simpson on [0, 1] with a fixed, fine grid.
template <typename F>
inline double simpson01(F f, int n = 20000)
{
    const double h = 1.0 / n;
    double s = f(0.0) + f(1.0);
    for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// P_l for l <= 3, written out.
inline double legendre_poly(int l, double t)
{
    switch (l) {
    case 0: return 1.0;
    case 1: return t;
    case 2: return 0.5 * (3.0 * t * t - 1.0);
    case 3: return 0.5 * (5.0 * t * t * t - 3.0 * t);
    }
    return NAN;
}

inline double clamped_cosine_zonal(int l)
{
    return 2.0 * kPi * std::sqrt((2.0 * l + 1.0) / (4.0 * kPi)) * simpson01([&](double t) { return t * legendre_poly(l, t); });
}

}  // namespace nprt::oracle
