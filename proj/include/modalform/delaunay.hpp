#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace modalform {

/// Bowyer-Watson Delaunay triangulation of planar points. Triangles are
/// returned counter-clockwise, sorted lexicographically for reproducibility.
std::vector<std::array<int, 3>> delaunay_triangulate(std::span<const Eigen::Vector2d> points);

}  // namespace modalform
