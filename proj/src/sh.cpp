#include "nprt/sh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <tuple>

#include "nprt/binary_io.hpp"

namespace nprt {

namespace {

void check_order(int order, int max_order = kMaxShOrder)
{
    if (order < 1 || order > max_order)
        throw InputError("SH order " + std::to_string(order) + " outside [1, " + std::to_string(max_order) + "]");
}

void check_unit(const Vec3& dir)
{
    if (!is_finite(dir) || std::abs(length(dir) - 1.0) > 1e-6) throw InputError("direction is not unit length");
}

void check_same_order(int a, int b)
{
    if (a != b) throw InputError("SH order mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

// K_lm = sqrt((2l+1)/(4pi) * (l-m)!/(l+m)!), m >= 0.
struct NormTable {
    std::array<std::array<double, kMaxShOrder>, kMaxShOrder> k{};
    NormTable()
    {
        for (int l = 0; l < kMaxShOrder; ++l) {
            for (int m = 0; m <= l; ++m) {
                double ratio = 1.0;
                for (int f = l - m + 1; f <= l + m; ++f) ratio /= f;
                k[l][m] = std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * ratio);
            }
        }
    }
};

const NormTable& norms()
{
    static const NormTable table;
    return table;
}

}  // namespace

// --- SHVector ----------------------------------------------------------------

SHVector::SHVector(int order) : order_(order), coeffs_(static_cast<std::size_t>(sh_count(order)), 0.0)
{
    check_order(order);
}

SHVector::SHVector(int order, std::vector<double> coeffs) : order_(order), coeffs_(std::move(coeffs))
{
    check_order(order);
    if (coeffs_.size() != static_cast<std::size_t>(sh_count(order)))
        throw InputError("SH vector of order " + std::to_string(order) + " needs " + std::to_string(sh_count(order)) +
                         " coefficients, got " + std::to_string(coeffs_.size()));
    if (!all_finite()) throw InputError("SH vector has non-finite coefficients");
}

SHVector SHVector::unit(int order, int index)
{
    SHVector v(order);
    v.coeffs_.at(static_cast<std::size_t>(index)) = 1.0;
    return v;
}

SHVector& SHVector::operator+=(const SHVector& o)
{
    check_same_order(order_, o.order_);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    return *this;
}

SHVector& SHVector::operator*=(double s)
{
    for (double& c : coeffs_) c *= s;
    return *this;
}

bool SHVector::all_finite() const
{
    return std::all_of(coeffs_.begin(), coeffs_.end(), [](double c) { return std::isfinite(c); });
}

// --- basis -----------------------------------------------------------------

void sh_basis_into(const Vec3& dir, int order, std::span<double> out)
{
    const auto& K = norms().k;
    const double x = dir.x, y = dir.y, z = dir.z;

    // (x + iy)^m = sin^m(theta) (cos m phi + i sin m phi)
    std::array<double, kMaxShOrder> cm{}, sm{};
    cm[0] = 1.0;
    sm[0] = 0.0;
    for (int m = 1; m < order; ++m) {
        cm[m] = cm[m - 1] * x - sm[m - 1] * y;
        sm[m] = cm[m - 1] * y + sm[m - 1] * x;
    }

    // Q_l^m(z) = P_l^m(z) / sin^m(theta), no Condon-Shortley phase.
    double qmm = 1.0;
    for (int m = 0; m < order; ++m) {
        if (m > 0) qmm *= (2.0 * m - 1.0);
        double q_prev = 0.0;
        double q = qmm;
        for (int l = m; l < order; ++l) {
            if (l == m + 1) {
                q_prev = q;
                q = z * (2.0 * m + 1.0) * qmm;
            } else if (l > m + 1) {
                const double next = ((2.0 * l - 1.0) * z * q - (l + m - 1.0) * q_prev) / (l - m);
                q_prev = q;
                q = next;
            }
            if (m == 0) {
                out[sh_index(l, 0)] = K[l][0] * q;
            } else {
                const double a = std::numbers::sqrt2 * K[l][m] * q;
                out[sh_index(l, m)] = a * cm[m];
                out[sh_index(l, -m)] = a * sm[m];
            }
        }
    }
}

std::vector<double> sh_basis_eval(const Vec3& dir, int order)
{
    check_order(order);
    check_unit(dir);
    std::vector<double> out(static_cast<std::size_t>(sh_count(order)));
    sh_basis_into(dir, order, out);
    return out;
}

double legendre(int l, double t)
{
    if (l == 0) return 1.0;
    double p0 = 1.0, p1 = t;
    for (int n = 2; n <= l; ++n) {
        const double p2 = ((2.0 * n - 1.0) * t * p1 - (n - 1.0) * p0) / n;
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

// --- quadrature ------------------------------------------------------------

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights)
{
    nodes.assign(static_cast<std::size_t>(n), 0.0);
    weights.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double pn = n == 1 ? t : p1;
            const double pn1 = n == 1 ? 1.0 : p0;
            dp = n * (t * pn - pn1) / (t * t - 1.0);
            const double dt = pn / dp;
            t -= dt;
            if (std::abs(dt) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - t * t) * dp * dp);
        nodes[static_cast<std::size_t>(i)] = -t;
        nodes[static_cast<std::size_t>(n - 1 - i)] = t;
        weights[static_cast<std::size_t>(i)] = w;
        weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
}

void stratified_sphere_directions(std::size_t n, Rng& rng, std::vector<Vec3>& dirs)
{
    dirs.clear();
    dirs.reserve(n);
    const std::size_t rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
    const std::size_t cols = n / rows;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double u = (static_cast<double>(r) + rng.uniform()) / static_cast<double>(rows);
            const double v = (static_cast<double>(c) + rng.uniform()) / static_cast<double>(cols);
            dirs.push_back(square_to_sphere(u, v));
        }
    }
    while (dirs.size() < n) {
        const double u = rng.uniform();
        dirs.push_back(square_to_sphere(u, rng.uniform()));
    }
}

void for_each_quadrature_point(const QuadratureSpec& spec, const std::function<void(const Vec3&, double)>& fn)
{
    if (spec.count == 0) throw InputError("quadrature needs at least one point");
    switch (spec.kind) {
    case QuadratureKind::StratifiedMonteCarlo: {
        Rng rng(spec.seed);
        std::vector<Vec3> dirs;
        stratified_sphere_directions(spec.count, rng, dirs);
        const double w = 4.0 * kPi / static_cast<double>(dirs.size());
        for (const Vec3& d : dirs) fn(d, w);
        break;
    }
    case QuadratureKind::MonteCarlo: {
        Rng rng(spec.seed);
        const double w = 4.0 * kPi / static_cast<double>(spec.count);
        for (std::size_t s = 0; s < spec.count; ++s) {
            const double u = rng.uniform();
            fn(square_to_sphere(u, rng.uniform()), w);
        }
        break;
    }
    case QuadratureKind::LatLong: {
        const int n_theta = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.count) / 2.0))));
        const int n_phi = 2 * n_theta;
        std::vector<double> zs, ws;
        gauss_legendre(n_theta, zs, ws);
        const double dphi = 2.0 * kPi / n_phi;
        for (int a = 0; a < n_theta; ++a) {
            const double z = zs[static_cast<std::size_t>(a)];
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            for (int b = 0; b < n_phi; ++b) {
                const double phi = (b + 0.5) * dphi;
                fn({r * std::cos(phi), r * std::sin(phi), z}, ws[static_cast<std::size_t>(a)] * dphi);
            }
        }
        break;
    }
    }
}

// --- projection ------------------------------------------------------------

SHVector project_function(const SphericalFunction& f, int order, const QuadratureSpec& quad)
{
    check_order(order);
    SHVector out(order);
    std::vector<double> y(static_cast<std::size_t>(sh_count(order)));
    for_each_quadrature_point(quad, [&](const Vec3& d, double w) {
        const double v = f(d);
        if (!std::isfinite(v)) throw DataError("spherical function returned a non-finite value");
        if (v == 0.0) return;
        sh_basis_into(d, order, y);
        for (std::size_t i = 0; i < y.size(); ++i) out[i] += w * v * y[i];
    });
    return out;
}

double sh_eval_expansion(const SHVector& f, const Vec3& dir)
{
    check_unit(dir);
    std::array<double, kMaxShOrder * kMaxShOrder> y{};
    sh_basis_into(dir, f.order(), y);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * y[i];
    return s;
}

double diffuse_shade(const SHVector& transfer, const SHVector& light)
{
    check_same_order(transfer.order(), light.order());
    double s = 0.0;
    for (std::size_t i = 0; i < transfer.size(); ++i) s += transfer[i] * light[i];
    return s;
}

// --- triple products ---------------------------------------------------------

TripleProductTensor::TripleProductTensor(int order, std::vector<Entry> entries)
    : order_(order), entries_(std::move(entries))
{
    check_order(order, 6);
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.i, a.j, a.k) < std::tie(b.i, b.j, b.k);
    });
}

double TripleProductTensor::at(int i, int j, int k) const
{
    const Entry key{static_cast<std::uint16_t>(i), static_cast<std::uint16_t>(j), static_cast<std::uint16_t>(k), 0.0};
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key, [](const Entry& a, const Entry& b) {
        return std::tie(a.i, a.j, a.k) < std::tie(b.i, b.j, b.k);
    });
    if (it != entries_.end() && it->i == key.i && it->j == key.j && it->k == key.k) return it->value;
    return 0.0;
}

TripleProductTensor triple_product_tensor(int order, const QuadratureSpec& quad, double eps)
{
    check_order(order, 6);
    const int n = sh_count(order);

    struct Triple {
        int i, j, k;
    };
    std::vector<Triple> triples;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            for (int k = j; k < n; ++k) triples.push_back({i, j, k});

    std::vector<double> acc(triples.size(), 0.0);
    std::vector<double> y(static_cast<std::size_t>(n));
    for_each_quadrature_point(quad, [&](const Vec3& d, double w) {
        sh_basis_into(d, order, y);
        for (std::size_t t = 0; t < triples.size(); ++t) {
            const Triple& tr = triples[t];
            acc[t] += w * (y[static_cast<std::size_t>(tr.i)] * y[static_cast<std::size_t>(tr.j)] *
                           y[static_cast<std::size_t>(tr.k)]);
        }
    });

    std::vector<TripleProductTensor::Entry> entries;
    for (std::size_t t = 0; t < triples.size(); ++t) {
        if (std::abs(acc[t]) <= eps) continue;
        std::array<int, 3> idx{triples[t].i, triples[t].j, triples[t].k};
        // idx is sorted, so next_permutation enumerates each distinct permutation once.
        do {
            entries.push_back({static_cast<std::uint16_t>(idx[0]), static_cast<std::uint16_t>(idx[1]),
                               static_cast<std::uint16_t>(idx[2]), acc[t]});
        } while (std::next_permutation(idx.begin(), idx.end()));
    }
    return TripleProductTensor(order, std::move(entries));
}

SHVector transferred_radiance(const SHVector& transfer, const SHVector& light, const TripleProductTensor& tau)
{
    check_same_order(transfer.order(), light.order());
    check_same_order(transfer.order(), tau.order());
    SHVector h(transfer.order());
    for (const auto& e : tau.entries()) h[e.k] += e.value * transfer[e.i] * light[e.j];
    return h;
}

std::vector<double> light_matrix(const SHVector& light, const TripleProductTensor& tau)
{
    check_same_order(light.order(), tau.order());
    const std::size_t n = light.size();
    std::vector<double> m(n * n, 0.0);
    for (const auto& e : tau.entries()) m[e.i * n + e.k] += e.value * light[e.j];
    return m;
}

void save_tau_cache(const TripleProductTensor& tau, const std::filesystem::path& path)
{
    io::ByteWriter w;
    w.magic("TPT1");
    w.u32(static_cast<std::uint32_t>(tau.order()));
    w.u64(tau.entries().size());
    for (const auto& e : tau.entries()) {
        w.u16(e.i);
        w.u16(e.j);
        w.u16(e.k);
        w.f64(e.value);
    }
    w.write_file(path);
}

TripleProductTensor load_tau_cache(const std::filesystem::path& path)
{
    auto r = io::ByteReader::from_file(path);
    if (!r.expect_magic("TPT1")) throw FormatError("'" + r.name() + "' is not a triple product cache (bad magic)");
    const auto order = static_cast<int>(r.u32());
    if (order < 1 || order > 6) throw FormatError("triple product cache has invalid order " + std::to_string(order));
    const std::uint64_t count = r.u64();
    if (count > r.remaining() / 14) throw FormatError("truncated file '" + r.name() + "'");
    const auto n = static_cast<std::uint16_t>(sh_count(order));
    std::vector<TripleProductTensor::Entry> entries;
    entries.reserve(count);
    for (std::uint64_t e = 0; e < count; ++e) {
        TripleProductTensor::Entry en{r.u16(), r.u16(), r.u16(), r.f64()};
        if (en.i >= n || en.j >= n || en.k >= n) throw FormatError("triple product cache index out of range");
        entries.push_back(en);
    }
    TripleProductTensor tau(order, std::move(entries));
    for (const auto& e : tau.entries()) {
        if (tau.at(e.j, e.k, e.i) != e.value || tau.at(e.k, e.j, e.i) != e.value)
            throw FormatError("triple product cache is not permutation symmetric");
    }
    return tau;
}

// --- zonal kernels -----------------------------------------------------------

namespace {

double simpson(double a, double b, double fa, double fm, double fb)
{
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth)
{
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol)
{
    // Split up front so peaked integrands (high exponents) are not missed by
    // the first coarse estimate.
    constexpr int kPieces = 16;
    double total = 0.0;
    for (int p = 0; p < kPieces; ++p) {
        const double x0 = a + (b - a) * p / kPieces;
        const double x1 = a + (b - a) * (p + 1) / kPieces;
        const double f0 = f(x0), f1 = f(x1), fm = f(0.5 * (x0 + x1));
        total += adaptive_simpson(f, x0, x1, f0, fm, f1, simpson(x0, x1, f0, fm, f1), tol / kPieces, 40);
    }
    return total;
}

}  // namespace

ZonalCoeffs phong_zonal_coeffs(double exponent, int order)
{
    check_order(order);
    if (!std::isfinite(exponent)) throw InputError("Phong exponent must be finite");
    if (exponent < 0.0) throw InputError("Phong exponent must be non-negative");
    ZonalCoeffs h;
    for (int l = 0; l < order; ++l) {
        const double nl = std::sqrt((2.0 * l + 1.0) / (4.0 * kPi));
        const double integral = integrate(
            [&](double t) { return (exponent == 0.0 ? 1.0 : std::pow(t, exponent)) * legendre(l, t); }, 0.0, 1.0,
            1e-13);
        h.values.push_back(2.0 * kPi * nl * integral);
    }
    return h;
}

SHVector zonal_convolve(const SHVector& f, const ZonalCoeffs& h)
{
    check_same_order(f.order(), h.order());
    SHVector out(f.order());
    for (int l = 0; l < f.order(); ++l) {
        const double s = std::sqrt(4.0 * kPi / (2.0 * l + 1.0)) * h.values[static_cast<std::size_t>(l)];
        for (int m = -l; m <= l; ++m) out[sh_index(l, m)] = s * f[sh_index(l, m)];
    }
    return out;
}

}  // namespace nprt
