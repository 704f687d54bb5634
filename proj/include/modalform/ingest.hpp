#pragma once

#include <filesystem>
#include <string>

#include "modalform/decomposition.hpp"
#include "modalform/geometry.hpp"

namespace modalform {

struct IngestResult {
    DeviationField field;
    int duplicate_rows = 0;  // rows that overwrote an earlier value for the same node
};

/// Reads a deviation CSV. Two-column rows are (node_index, deviation_mm);
/// three-column rows are measured (x, y, z) points, matched to the nearest
/// node within half that node's nearest-neighbor spacing and converted to
/// signed normal deviations. A non-numeric first row is taken as a header.
IngestResult ingest_point_cloud_text(const std::string& text, const Geometry& geometry);
IngestResult ingest_point_cloud(const std::filesystem::path& path, const Geometry& geometry);

}  // namespace modalform
