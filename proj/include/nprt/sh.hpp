#pragma once

// Real spherical harmonics: basis evaluation, projection, the triple product
// tensor and zonal (rotationally symmetric) convolution.
//
// Convention: orthonormal real basis without the Condon-Shortley phase,
// flat index i = l(l+1)+m for band l and -l <= m <= l. With z the polar axis:
//   y_{1,-1} ~ y,   y_{1,0} ~ z,   y_{1,1} ~ x.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "nprt/common.hpp"

namespace nprt {

inline constexpr int kDefaultShOrder = 4;
inline constexpr int kMaxShOrder = 8;

constexpr int sh_index(int l, int m) { return l * (l + 1) + m; }
constexpr int sh_count(int order) { return order * order; }

class SHVector {
public:
    explicit SHVector(int order = kDefaultShOrder);
    SHVector(int order, std::vector<double> coeffs);

    // Unit vector e_index.
    static SHVector unit(int order, int index);

    int order() const { return order_; }
    std::size_t size() const { return coeffs_.size(); }
    std::span<const double> coeffs() const { return coeffs_; }
    std::span<double> coeffs() { return coeffs_; }
    double operator[](std::size_t i) const { return coeffs_[i]; }
    double& operator[](std::size_t i) { return coeffs_[i]; }

    SHVector& operator+=(const SHVector& o);
    SHVector& operator*=(double s);
    friend SHVector operator+(SHVector a, const SHVector& b) { return a += b; }
    friend SHVector operator*(SHVector a, double s) { return a *= s; }
    bool operator==(const SHVector&) const = default;

    bool all_finite() const;

private:
    int order_;
    std::vector<double> coeffs_;
};

// --- basis -----------------------------------------------------------------

// Writes y_i(dir) for i < order^2 into out. dir must already be unit length;
// this is the hot-loop entry point and does not check it.
void sh_basis_into(const Vec3& dir, int order, std::span<double> out);

// Checked version: |dir| = 1 within 1e-6 and 1 <= order <= 8.
std::vector<double> sh_basis_eval(const Vec3& dir, int order);

// Legendre polynomial P_l(t).
double legendre(int l, double t);

// --- quadrature ------------------------------------------------------------

enum class QuadratureKind {
    StratifiedMonteCarlo,  // jittered equal-area grid, weight 4pi/N
    MonteCarlo,            // i.i.d. uniform directions, weight 4pi/N
    LatLong,               // Gauss-Legendre in cos(theta) x uniform phi
};

struct QuadratureSpec {
    QuadratureKind kind = QuadratureKind::StratifiedMonteCarlo;
    std::size_t count = 262144;
    std::uint64_t seed = 1;
};

// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

// Calls fn(direction, weight) for every point of the rule. Weights sum to 4pi.
void for_each_quadrature_point(const QuadratureSpec& spec,
                               const std::function<void(const Vec3&, double)>& fn);

// Fills dirs with a stratified jittered set of n uniform-sphere directions.
// Strata are an equal-area (z, phi) grid as close to square as n allows; any
// remainder is drawn i.i.d.
void stratified_sphere_directions(std::size_t n, Rng& rng, std::vector<Vec3>& dirs);

// --- projection ------------------------------------------------------------

using SphericalFunction = std::function<double(const Vec3&)>;

// coeffs_i = integral f(w) y_i(w) dw. Throws DataError if f returns a
// non-finite value.
SHVector project_function(const SphericalFunction& f, int order, const QuadratureSpec& quad);

// Sum_i f_i y_i(dir). |dir| = 1 within 1e-6.
double sh_eval_expansion(const SHVector& f, const Vec3& dir);

// Sum_i T_i L_i.
double diffuse_shade(const SHVector& transfer, const SHVector& light);

// --- triple products ---------------------------------------------------------

class TripleProductTensor {
public:
    struct Entry {
        std::uint16_t i, j, k;
        double value;
    };

    TripleProductTensor() = default;
    // Entries are taken as given and sorted; permutation closure is the
    // caller's responsibility (load_tau_cache checks it).
    TripleProductTensor(int order, std::vector<Entry> entries);

    int order() const { return order_; }
    std::span<const Entry> entries() const { return entries_; }
    // 0 for entries that are not stored.
    double at(int i, int j, int k) const;

private:
    int order_ = 0;
    std::vector<Entry> entries_;  // sorted by (i, j, k), all permutations present
};

inline constexpr double kTauSparsityEps = 1e-6;

// tau_ijk = integral y_i y_j y_k by quadrature. Each unordered triple is
// accumulated once and copied to all its permutations, so the result is
// exactly symmetric. order <= 6.
TripleProductTensor triple_product_tensor(int order, const QuadratureSpec& quad,
                                          double eps = kTauSparsityEps);

// H_k = sum_ij tau_ijk T_i L_j.
SHVector transferred_radiance(const SHVector& transfer, const SHVector& light,
                              const TripleProductTensor& tau);

// Row-major n x n matrix M with M[i*n+k] = sum_j tau_ijk L_j, so that
// H_k = sum_i T_i M[i*n+k]. This is the per-light "global light matrix".
std::vector<double> light_matrix(const SHVector& light, const TripleProductTensor& tau);

// Binary cache: "TPT1", u32 order, u64 count, (u16 i, u16 j, u16 k, f64 value)*.
void save_tau_cache(const TripleProductTensor& tau, const std::filesystem::path& path);
TripleProductTensor load_tau_cache(const std::filesystem::path& path);

// --- zonal kernels -----------------------------------------------------------

struct ZonalCoeffs {
    std::vector<double> values;  // one per band
    int order() const { return static_cast<int>(values.size()); }
};

// h_l = 2pi int_0^1 t^e N_l P_l(t) dt, N_l = sqrt((2l+1)/4pi): zonal projection
// of the unnormalized lobe max(cos, 0)^e about +z.
ZonalCoeffs phong_zonal_coeffs(double exponent, int order);

// (f * h)_lm = sqrt(4pi/(2l+1)) h_l f_lm.
SHVector zonal_convolve(const SHVector& f, const ZonalCoeffs& h);

}  // namespace nprt
