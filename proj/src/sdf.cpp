#include "nprt/sdf.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace nprt {

SdfScene::SdfScene(std::vector<SdfNode> nodes, int root, Aabb bounds)
    : nodes_(std::move(nodes)), root_(root), bounds_(bounds)
{
    if (nodes_.empty()) throw InputError("SDF scene has no nodes");
    if (root_ < 0 || root_ >= static_cast<int>(nodes_.size())) throw InputError("SDF root index out of range");
    if (bounds_.empty() || !is_finite(bounds_.lo) || !is_finite(bounds_.hi)) throw InputError("SDF scene needs finite bounds");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        const bool is_op = n.kind == SdfNode::Kind::Union || n.kind == SdfNode::Kind::Intersection ||
                           n.kind == SdfNode::Kind::Subtraction || n.kind == SdfNode::Kind::SmoothUnion;
        // Operands must be defined earlier, which also rules out cycles.
        if (is_op && (n.a < 0 || n.b < 0 || n.a >= static_cast<int>(i) || n.b >= static_cast<int>(i)))
            throw InputError("SDF operator " + std::to_string(i) + " has invalid operands");
        if (n.kind == SdfNode::Kind::SmoothUnion) {
            has_blends_ = true;
            if (!(n.k > 0.0)) throw InputError("smooth_union needs k > 0");
        }
    }
}

double SdfScene::eval_node(int index, const Vec3& p) const
{
    const SdfNode& n = nodes_[static_cast<std::size_t>(index)];
    switch (n.kind) {
    case SdfNode::Kind::Sphere:
        return length(p - n.center) - n.radius;
    case SdfNode::Kind::Box:
    case SdfNode::Kind::RoundBox: {
        const double r = n.kind == SdfNode::Kind::RoundBox ? n.radius : 0.0;
        const Vec3 q = p - n.center;
        const Vec3 d{std::abs(q.x) - n.half.x + r, std::abs(q.y) - n.half.y + r, std::abs(q.z) - n.half.z + r};
        const Vec3 outside = vmax(d, Vec3{});
        return length(outside) + std::min(max_component(d), 0.0) - r;
    }
    case SdfNode::Kind::Torus: {
        const Vec3 q = p - n.center;
        const double ring = std::sqrt(q.x * q.x + q.y * q.y) - n.major;
        return std::sqrt(ring * ring + q.z * q.z) - n.radius;
    }
    case SdfNode::Kind::Plane:
        return dot(p, n.normal) - n.offset;
    case SdfNode::Kind::Union:
        return std::min(eval_node(n.a, p), eval_node(n.b, p));
    case SdfNode::Kind::Intersection:
        return std::max(eval_node(n.a, p), eval_node(n.b, p));
    case SdfNode::Kind::Subtraction:
        return std::max(eval_node(n.a, p), -eval_node(n.b, p));
    case SdfNode::Kind::SmoothUnion: {
        const double da = eval_node(n.a, p), db = eval_node(n.b, p);
        const double h = std::clamp(0.5 + 0.5 * (db - da) / n.k, 0.0, 1.0);
        return db + (da - db) * h - n.k * h * (1.0 - h);
    }
    }
    return INFINITY;
}

// --- parsing ---------------------------------------------------------------------

namespace {

struct LineParser {
    const std::string& source;
    int line;

    [[noreturn]] void fail(const std::string& what) const
    {
        throw FormatError(source + ":" + std::to_string(line) + ": " + what);
    }

    double number(const std::string& tok) const
    {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) fail("invalid number '" + tok + "'");
        return v;
    }

    Vec3 vec(const std::string& tok) const
    {
        const auto c1 = tok.find(',');
        const auto c2 = c1 == std::string::npos ? std::string::npos : tok.find(',', c1 + 1);
        if (c2 == std::string::npos || tok.find(',', c2 + 1) != std::string::npos) fail("expected x,y,z but got '" + tok + "'");
        return {number(tok.substr(0, c1)), number(tok.substr(c1 + 1, c2 - c1 - 1)), number(tok.substr(c2 + 1))};
    }
};

}  // namespace

SdfScene SdfScene::parse(const std::string& text, const std::string& source_name)
{
    std::vector<SdfNode> nodes;
    std::map<std::string, int> ids;
    int root = -1;
    Aabb bounds;
    bool have_bounds = false;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const LineParser lp{source_name, line_no};
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
        std::istringstream ls(raw);
        std::vector<std::string> words;
        for (std::string w; ls >> w;) words.push_back(w);
        if (words.empty()) continue;

        std::string kind = words[0];
        std::size_t first_kv = 1;
        if (kind == "op") {
            if (words.size() < 2) lp.fail("op needs an operator name");
            kind = words[1];
            first_kv = 2;
        } else if (kind == "root") {
            if (words.size() != 2) lp.fail("root takes exactly one reference");
            words.push_back("");  // keep the lookup below uniform
        }

        std::map<std::string, std::string> kv;
        if (words[0] != "root") {
            for (std::size_t i = first_kv; i < words.size(); ++i) {
                const auto eq = words[i].find('=');
                if (eq == std::string::npos) lp.fail("expected key=value, got '" + words[i] + "'");
                kv[words[i].substr(0, eq)] = words[i].substr(eq + 1);
            }
        }
        auto need = [&](const std::string& key) -> const std::string& {
            auto it = kv.find(key);
            if (it == kv.end()) lp.fail(kind + " is missing '" + key + "='");
            return it->second;
        };
        auto ref = [&](const std::string& name) {
            if (auto it = ids.find(name); it != ids.end()) return it->second;
            int idx = -1;
            auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), idx);
            if (ec != std::errc() || ptr != name.data() + name.size() || idx < 0 || idx >= static_cast<int>(nodes.size()))
                lp.fail("unknown node reference '" + name + "'");
            return idx;
        };

        if (words[0] == "root") {
            root = ref(words[1]);
            continue;
        }
        if (kind == "bounds") {
            bounds = Aabb{};
            bounds.expand(lp.vec(need("min")));
            bounds.expand(lp.vec(need("max")));
            have_bounds = true;
            continue;
        }

        SdfNode n;
        if (kind == "sphere") {
            n.kind = SdfNode::Kind::Sphere;
            n.center = lp.vec(need("c"));
            n.radius = lp.number(need("r"));
            if (!(n.radius > 0)) lp.fail("sphere radius must be positive");
        } else if (kind == "box" || kind == "roundbox") {
            n.kind = kind == "box" ? SdfNode::Kind::Box : SdfNode::Kind::RoundBox;
            n.center = lp.vec(need("c"));
            n.half = lp.vec(need("h"));
            if (!(n.half.x > 0 && n.half.y > 0 && n.half.z > 0)) lp.fail("box half-extents must be positive");
            if (kind == "roundbox") {
                n.radius = lp.number(need("r"));
                if (n.radius < 0 || n.radius > std::min({n.half.x, n.half.y, n.half.z})) lp.fail("invalid rounding radius");
            }
        } else if (kind == "torus") {
            n.kind = SdfNode::Kind::Torus;
            n.center = lp.vec(need("c"));
            n.major = lp.number(need("R"));
            n.radius = lp.number(need("r"));
            if (!(n.major > 0 && n.radius > 0)) lp.fail("torus radii must be positive");
        } else if (kind == "plane") {
            n.kind = SdfNode::Kind::Plane;
            const Vec3 nn = lp.vec(need("n"));
            if (!(length(nn) > 0)) lp.fail("plane normal must be non-zero");
            n.normal = normalize(nn);
            n.offset = lp.number(need("d"));
        } else if (kind == "union" || kind == "intersection" || kind == "subtraction" || kind == "smooth_union") {
            n.kind = kind == "union"          ? SdfNode::Kind::Union
                     : kind == "intersection" ? SdfNode::Kind::Intersection
                     : kind == "subtraction"  ? SdfNode::Kind::Subtraction
                                              : SdfNode::Kind::SmoothUnion;
            n.a = ref(need("a"));
            n.b = ref(need("b"));
            if (n.kind == SdfNode::Kind::SmoothUnion) {
                n.k = lp.number(need("k"));
                if (!(n.k > 0)) lp.fail("smooth_union needs k > 0");
            }
        } else {
            lp.fail("unknown record '" + words[0] + "'");
        }
        if (auto it = kv.find("id"); it != kv.end()) {
            if (!ids.emplace(it->second, static_cast<int>(nodes.size())).second) lp.fail("duplicate id '" + it->second + "'");
        }
        nodes.push_back(n);
    }
    if (nodes.empty()) throw FormatError(source_name + ": no SDF nodes");
    if (!have_bounds) throw FormatError(source_name + ": missing 'bounds' record");
    if (root < 0) root = static_cast<int>(nodes.size()) - 1;
    return SdfScene(std::move(nodes), root, bounds);
}

SdfScene SdfScene::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open SDF scene '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

// --- queries ---------------------------------------------------------------------

SdfParams SdfParams::defaults_for(const SdfScene& scene)
{
    const double diag = scene.diagonal();
    SdfParams p;
    p.hit_eps = 1e-4 * diag;
    p.max_steps = 256;
    p.t_max = 4.0 * diag;
    p.normal_h = 1e-4 * diag;
    p.project_eps = 1e-6 * diag;
    p.step_scale = scene.has_blends() ? 0.9 : 1.0;
    return p;
}

double sdf_eval(const SdfScene& scene, const Vec3& p)
{
    if (!is_finite(p)) throw InputError("sdf_eval: non-finite point");
    return scene.eval(p);
}

namespace {

Vec3 gradient(const SdfScene& scene, const Vec3& p, double h)
{
    const Vec3 g{scene.eval({p.x + h, p.y, p.z}) - scene.eval({p.x - h, p.y, p.z}),
                 scene.eval({p.x, p.y + h, p.z}) - scene.eval({p.x, p.y - h, p.z}),
                 scene.eval({p.x, p.y, p.z + h}) - scene.eval({p.x, p.y, p.z - h})};
    return g / (2.0 * h);
}

}  // namespace

Vec3 sdf_normal(const SdfScene& scene, const Vec3& p, double h)
{
    const Vec3 g = gradient(scene, p, h);
    if (!(length(g) >= 1e-9)) throw DegenerateNormalError("SDF gradient vanishes; normal is undefined");
    return normalize(g);
}

namespace {

// Parametric interval of the ray inside the bounds; false when it misses.
bool clip_to_bounds(const Aabb& b, const Ray& ray, double& t0, double& t1)
{
    for (int a = 0; a < 3; ++a) {
        const double inv = 1.0 / ray.dir[a];
        double tn = (b.lo[a] - ray.origin[a]) * inv;
        double tf = (b.hi[a] - ray.origin[a]) * inv;
        if (tn > tf) std::swap(tn, tf);
        t0 = tn > t0 ? tn : t0;
        t1 = tf < t1 ? tf : t1;
        if (t0 > t1) return false;
    }
    return true;
}

constexpr double kMiss = -1.0;
constexpr double kExhausted = -2.0;

// Hit distance, kMiss when the ray leaves the marching range, or kExhausted
// when the step budget runs out first.
double march(const SdfScene& scene, const Ray& ray, const SdfParams& params)
{
    double t = 0.0, t_end = params.t_max;
    if (!clip_to_bounds(scene.bounds(), ray, t, t_end)) return kMiss;
    for (int step = 0; step < params.max_steps; ++step) {
        const double d = scene.eval(ray.at(t));
        if (d < params.hit_eps) return t;
        t += params.step_scale * d;
        if (t > t_end) return kMiss;
    }
    return kExhausted;
}

}  // namespace

RayHit sphere_trace(const SdfScene& scene, const Ray& ray, const SdfParams& params)
{
    RayHit hit;
    double t = march(scene, ray, params);
    if (t < 0.0) return hit;
    // Near-tangent rays satisfy sdf < hit_eps long before the surface; Newton
    // steps on f(t) = sdf(o + t d) pull t onto the zero set.
    double f = scene.eval(ray.at(t));
    for (int i = 0; i < 8 && std::abs(f) > 1e-3 * params.hit_eps; ++i) {
        const double slope = dot(gradient(scene, ray.at(t), params.normal_h), ray.dir);
        if (!(std::abs(slope) > 1e-6)) break;
        const double tn = t - f / slope;
        const double fn = scene.eval(ray.at(tn));
        if (!(std::abs(fn) < std::abs(f)) || tn < 0.0) break;
        t = tn;
        f = fn;
    }
    hit.hit = true;
    hit.t = t;
    hit.position = ray.at(t);
    hit.normal = sdf_normal(scene, hit.position, params.normal_h);
    return hit;
}

bool sphere_trace_occluded(const SdfScene& scene, const Ray& ray, const SdfParams& params)
{
    return march(scene, ray, params) != kMiss;
}

SurfaceSample project_to_sdf_surface(const SdfScene& scene, const Vec3& start, const SdfParams& params, int iters)
{
    Vec3 p = start;
    for (int i = 0; i <= iters; ++i) {
        const double d = scene.eval(p);
        if (std::abs(d) < params.project_eps) return {p, sdf_normal(scene, p, params.normal_h)};
        if (i == iters) break;
        p -= sdf_normal(scene, p, params.normal_h) * d;
        if (!is_finite(p)) break;
    }
    throw ProjectionError("surface projection did not converge");
}

}  // namespace nprt
