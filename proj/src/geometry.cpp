#include "modalform/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

#include "modalform/delaunay.hpp"
#include "modalform/error.hpp"

namespace modalform {
namespace {

std::string fmt17(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace

std::string geometry_ref_for(const GeometryParams& params) {
    if (const auto* pp = std::get_if<ProfileParams>(&params)) {
        return "profile(L=" + fmt17(pp->length) + ",p=" + std::to_string(pp->node_count) + ")";
    }
    const auto& cp = std::get<CapParams>(params);
    return "cap(R=" + fmt17(cp.radius) + ",alpha=" + fmt17(cp.half_angle) +
           ",p=" + std::to_string(cp.node_count) + ")";
}

GeometryKind Geometry::kind() const noexcept {
    return std::holds_alternative<ProfileParams>(params_) ? GeometryKind::Profile1D
                                                          : GeometryKind::SphericalCap;
}

Vec3 Geometry::reference_point() const {
    if (kind() == GeometryKind::SphericalCap) return Vec3::Zero();
    Vec3 c = Vec3::Zero();
    for (const auto& x : nodes_) c += x;
    return c / static_cast<double>(nodes_.size());
}

double Geometry::total_measure() const {
    double total = 0.0;
    for (const auto& s : segments_) total += (nodes_[s[1]] - nodes_[s[0]]).norm();
    for (const auto& t : triangles_) total += triangle_area(nodes_[t[0]], nodes_[t[1]], nodes_[t[2]]);
    return total;
}

std::vector<double> Geometry::nearest_neighbor_distances() const {
    const int p = node_count();
    std::vector<double> out(p, std::numeric_limits<double>::infinity());
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) {
            const double d = (nodes_[i] - nodes_[j]).norm();
            out[i] = std::min(out[i], d);
            out[j] = std::min(out[j], d);
        }
    }
    return out;
}

void Geometry::validate() const {
    const int p = node_count();
    if (static_cast<int>(normals_.size()) != p) {
        throw InvalidInput("geometry: " + std::to_string(normals_.size()) + " normals for " +
                           std::to_string(p) + " nodes");
    }
    for (int i = 0; i < p; ++i) {
        if (!nodes_[i].allFinite() || !normals_[i].allFinite()) {
            throw InvalidInput("geometry: non-finite coordinate at node " + std::to_string(i));
        }
        if (std::abs(normals_[i].norm() - 1.0) > 1e-12) {
            throw InvalidInput("geometry: normal " + std::to_string(i) + " is not unit length");
        }
    }
    auto check_index = [p](int idx) {
        if (idx < 0 || idx >= p) {
            throw InvalidInput("geometry: element references node " + std::to_string(idx) +
                               " outside 0.." + std::to_string(p - 1));
        }
    };
    if (const auto* pp = std::get_if<ProfileParams>(&params_)) {
        if (p < 2 || pp->node_count != p) throw InvalidInput("geometry: profile node count mismatch");
        if (!triangles_.empty()) throw InvalidInput("geometry: profile cannot carry triangles");
        for (std::size_t e = 0; e < segments_.size(); ++e) {
            check_index(segments_[e][0]);
            check_index(segments_[e][1]);
            if ((nodes_[segments_[e][0]] - nodes_[segments_[e][1]]).norm() <= 0.0) {
                throw InvalidInput("geometry: zero-length segment " + std::to_string(e));
            }
        }
    } else {
        const auto& cp = std::get<CapParams>(params_);
        if (p < 4 || cp.node_count != p) throw InvalidInput("geometry: cap node count mismatch");
        if (!segments_.empty()) throw InvalidInput("geometry: cap cannot carry segments");
        for (int i = 0; i < p; ++i) {
            if (std::abs(nodes_[i].norm() - cp.radius) > 1e-9 * cp.radius) {
                throw InvalidInput("geometry: node " + std::to_string(i) + " is off the sphere");
            }
        }
        const double area_floor = 1e-14 * cp.radius * cp.radius;
        for (std::size_t e = 0; e < triangles_.size(); ++e) {
            const auto& t = triangles_[e];
            for (int k : t) check_index(k);
            if (triangle_area(nodes_[t[0]], nodes_[t[1]], nodes_[t[2]]) <= area_floor) {
                throw InvalidInput("geometry: degenerate triangle " + std::to_string(e));
            }
        }
    }
}

Geometry Geometry::from_parts(GeometryParams params, std::vector<Vec3> nodes,
                              std::vector<Vec3> normals,
                              std::vector<std::array<int, 2>> segments,
                              std::vector<std::array<int, 3>> triangles) {
    Geometry g;
    g.params_ = std::move(params);
    g.nodes_ = std::move(nodes);
    g.normals_ = std::move(normals);
    g.segments_ = std::move(segments);
    g.triangles_ = std::move(triangles);
    g.ref_ = geometry_ref_for(g.params_);
    g.validate();
    return g;
}

Geometry build_profile(double length, int node_count) {
    if (!(length > 0.0) || !std::isfinite(length)) {
        throw InvalidParameter("build_profile: length must be positive, got " + fmt17(length));
    }
    if (node_count < 2) {
        throw InvalidParameter("build_profile: node_count must be >= 2, got " +
                               std::to_string(node_count));
    }
    std::vector<Vec3> nodes(node_count), normals(node_count, Vec3::UnitZ());
    std::vector<std::array<int, 2>> segments;
    segments.reserve(node_count - 1);
    const double spacing = length / (node_count - 1);
    for (int i = 0; i < node_count; ++i) {
        nodes[i] = Vec3(i == node_count - 1 ? length : i * spacing, 0.0, 0.0);
        if (i > 0) segments.push_back({i - 1, i});
    }
    return Geometry::from_parts(ProfileParams{length, node_count}, std::move(nodes),
                                std::move(normals), std::move(segments), {});
}

Geometry build_spherical_cap(double radius, double half_angle, int node_count) {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw InvalidParameter("build_spherical_cap: radius must be positive");
    }
    if (!(half_angle > 0.0) || half_angle > std::numbers::pi / 2) {
        throw InvalidParameter("build_spherical_cap: half_angle must lie in (0, pi/2]");
    }
    if (node_count < 4) {
        throw InvalidParameter("build_spherical_cap: node_count must be >= 4");
    }

    // Fibonacci spiral: uniform steps in z give equal-area bands on the sphere.
    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double z_span = 1.0 - std::cos(half_angle);
    std::vector<Vec3> nodes(node_count), normals(node_count);
    std::vector<Eigen::Vector2d> projected(node_count);
    for (int i = 0; i < node_count; ++i) {
        const double z = 1.0 - z_span * (i + 0.5) / node_count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = std::fmod(i * golden_angle, 2.0 * std::numbers::pi);
        Vec3 n(r * std::cos(phi), r * std::sin(phi), z);
        n.normalize();
        normals[i] = n;
        nodes[i] = radius * n;
        // Azimuthal equidistant projection about the pole.
        const double polar = std::atan2(std::hypot(n.x(), n.y()), n.z());
        const double azimuth = std::atan2(n.y(), n.x());
        projected[i] = Eigen::Vector2d(polar * std::cos(azimuth), polar * std::sin(azimuth));
    }
    auto triangles = delaunay_triangulate(projected);
    return Geometry::from_parts(CapParams{radius, half_angle, node_count}, std::move(nodes),
                                std::move(normals), {}, std::move(triangles));
}

Geometry build_geometry(const GeometryParams& params) {
    if (const auto* pp = std::get_if<ProfileParams>(&params)) {
        return build_profile(pp->length, pp->node_count);
    }
    const auto& cp = std::get<CapParams>(params);
    return build_spherical_cap(cp.radius, cp.half_angle, cp.node_count);
}

SampleSet SampleSet::full(const Geometry& geometry) {
    SampleSet s;
    s.geometry_ref_ = geometry.ref();
    s.parent_node_count_ = geometry.node_count();
    s.indices_.resize(geometry.node_count());
    for (int i = 0; i < geometry.node_count(); ++i) s.indices_[i] = i;
    return s;
}

SampleSet SampleSet::from_indices(const Geometry& geometry, std::vector<int> indices) {
    return from_indices(geometry.ref(), geometry.node_count(), std::move(indices));
}

SampleSet SampleSet::from_indices(std::string geometry_ref, int node_count,
                                  std::vector<int> indices) {
    std::sort(indices.begin(), indices.end());
    if (std::adjacent_find(indices.begin(), indices.end()) != indices.end()) {
        throw InvalidInput("sample set: duplicate node index");
    }
    if (!indices.empty() && (indices.front() < 0 || indices.back() >= node_count)) {
        throw InvalidInput("sample set: node index outside 0.." + std::to_string(node_count - 1));
    }
    SampleSet s;
    s.geometry_ref_ = std::move(geometry_ref);
    s.parent_node_count_ = node_count;
    s.indices_ = std::move(indices);
    return s;
}

SampleSet uniform_subsample(const Geometry& geometry, int q, std::uint64_t seed) {
    const int p = geometry.node_count();
    if (q < 1 || q > p) {
        throw InvalidParameter("uniform_subsample: q must lie in 1.." + std::to_string(p) +
                               ", got " + std::to_string(q));
    }
    if (q == p) return SampleSet::full(geometry);

    const auto& nodes = geometry.nodes();
    std::vector<double> dist(p, std::numeric_limits<double>::infinity());
    std::vector<int> chosen;
    chosen.reserve(q);
    int next = static_cast<int>(seed % static_cast<std::uint64_t>(p));
    while (static_cast<int>(chosen.size()) < q) {
        chosen.push_back(next);
        dist[next] = -1.0;
        int best = -1;
        double best_d = -1.0;
        for (int i = 0; i < p; ++i) {
            if (dist[i] < 0.0) continue;
            dist[i] = std::min(dist[i], (nodes[i] - nodes[next]).norm());
            if (dist[i] > best_d) {
                best_d = dist[i];
                best = i;
            }
        }
        next = best;
    }
    return SampleSet::from_indices(geometry, std::move(chosen));
}

}  // namespace modalform
