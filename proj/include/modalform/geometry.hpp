#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace modalform {

using Vec3 = Eigen::Vector3d;

enum class GeometryKind { Profile1D, SphericalCap };

struct ProfileParams {
    double length = 0.0;  // mm
    int node_count = 0;
};

struct CapParams {
    double radius = 0.0;      // mm
    double half_angle = 0.0;  // rad, measured from the +z pole
    int node_count = 0;
};

using GeometryParams = std::variant<ProfileParams, CapParams>;

/// Nominal shape sampled at nodes. Deviations live on the nodes, one scalar
/// per node measured along the outward normal.
///
/// Profiles are planar height maps along x with normals +z and segment
/// elements. Caps are centered at the origin, opened around +z, with
/// radial normals and triangle elements.
class Geometry {
public:
    /// Builds a geometry from explicit parts and checks every invariant.
    /// Used by deserialization; the builders below are the usual entry points.
    static Geometry from_parts(GeometryParams params, std::vector<Vec3> nodes,
                               std::vector<Vec3> normals,
                               std::vector<std::array<int, 2>> segments,
                               std::vector<std::array<int, 3>> triangles);

    GeometryKind kind() const noexcept;
    const GeometryParams& params() const noexcept { return params_; }

    int node_count() const noexcept { return static_cast<int>(nodes_.size()); }
    const std::vector<Vec3>& nodes() const noexcept { return nodes_; }
    const std::vector<Vec3>& normals() const noexcept { return normals_; }
    const std::vector<std::array<int, 2>>& segments() const noexcept { return segments_; }
    const std::vector<std::array<int, 3>>& triangles() const noexcept { return triangles_; }

    /// Stable textual identity derived from the construction parameters.
    const std::string& ref() const noexcept { return ref_; }

    /// Rotation reference point: sphere center for caps, node centroid for profiles.
    Vec3 reference_point() const;

    /// Total element measure (profile length or sum of triangle areas).
    double total_measure() const;

    /// Distance from each node to its nearest other node.
    std::vector<double> nearest_neighbor_distances() const;

    void validate() const;

private:
    Geometry() = default;

    GeometryParams params_;
    std::vector<Vec3> nodes_;
    std::vector<Vec3> normals_;
    std::vector<std::array<int, 2>> segments_;
    std::vector<std::array<int, 3>> triangles_;
    std::string ref_;
};

/// Node indices of a (possibly degraded) measurement over a geometry.
class SampleSet {
public:
    /// All nodes 0..p-1.
    static SampleSet full(const Geometry& geometry);
    /// Sorts and validates; duplicates or out-of-range indices throw InvalidInput.
    static SampleSet from_indices(const Geometry& geometry, std::vector<int> indices);
    static SampleSet from_indices(std::string geometry_ref, int node_count,
                                  std::vector<int> indices);

    const std::string& geometry_ref() const noexcept { return geometry_ref_; }
    const std::vector<int>& indices() const noexcept { return indices_; }
    int count() const noexcept { return static_cast<int>(indices_.size()); }
    int parent_node_count() const noexcept { return parent_node_count_; }
    bool is_full() const noexcept { return count() == parent_node_count_; }

    bool operator==(const SampleSet&) const = default;

private:
    std::string geometry_ref_;
    int parent_node_count_ = 0;
    std::vector<int> indices_;
};

std::string geometry_ref_for(const GeometryParams& params);

Geometry build_profile(double length, int node_count);
Geometry build_spherical_cap(double radius, double half_angle, int node_count);
Geometry build_geometry(const GeometryParams& params);

/// Farthest-point sampling of q nodes. The first node is `seed % p`; each
/// following node maximizes its distance to the nodes already chosen, ties
/// going to the lower index.
SampleSet uniform_subsample(const Geometry& geometry, int q, std::uint64_t seed);

}  // namespace modalform
