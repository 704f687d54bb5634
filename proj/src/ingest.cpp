#include "modalform/ingest.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "modalform/error.hpp"
#include "modalform/serialization.hpp"

namespace modalform {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string_view rest(line);
    while (true) {
        const auto comma = rest.find(',');
        out.push_back(trim(rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const char* end = s.data() + s.size();
    const char* begin = s.data();
    if (begin != end && *begin == '+') ++begin;
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end && std::isfinite(out);
}

std::string row_list(const std::vector<int>& rows) {
    std::string s;
    for (std::size_t k = 0; k < rows.size() && k < 20; ++k) {
        if (k) s += ",";
        s += std::to_string(rows[k]);
    }
    if (rows.size() > 20) s += ",...";
    return s;
}

}  // namespace

IngestResult ingest_point_cloud_text(const std::string& text, const Geometry& geometry) {
    struct Row {
        int line;
        std::vector<double> values;
    };
    std::vector<Row> rows;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::size_t width = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        std::vector<double> values(cells.size());
        bool numeric = true;
        for (std::size_t k = 0; k < cells.size(); ++k) numeric = numeric && parse_double(cells[k], values[k]);
        if (first) {
            first = false;
            width = cells.size();
            if (width != 2 && width != 3) {
                throw InvalidInput("ingest: line " + std::to_string(line_no) +
                                   ": expected 2 (node_index,deviation_mm) or 3 (x,y,z) columns");
            }
            if (!numeric) continue;  // header
        }
        if (cells.size() != width) {
            throw InvalidInput("ingest: line " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " columns, expected " +
                               std::to_string(width));
        }
        if (!numeric) {
            throw InvalidInput("ingest: line " + std::to_string(line_no) + " is not numeric");
        }
        rows.push_back({line_no, std::move(values)});
    }
    if (rows.empty()) throw InvalidInput("ingest: no data rows");

    const int p = geometry.node_count();
    std::map<int, double> by_node;
    int duplicates = 0;
    auto store = [&](int node, double value) {
        if (!by_node.insert_or_assign(node, value).second) ++duplicates;
    };

    if (width == 2) {
        for (const auto& r : rows) {
            const double idx = r.values[0];
            if (idx != std::floor(idx) || idx < 0 || idx >= p) {
                throw InvalidInput("ingest: line " + std::to_string(r.line) + ": node index " +
                                   format_double(idx) + " outside 0.." + std::to_string(p - 1));
            }
            store(static_cast<int>(idx), r.values[1]);
        }
    } else {
        const auto spacing = geometry.nearest_neighbor_distances();
        const auto& nodes = geometry.nodes();
        std::vector<int> unmatched;
        for (const auto& r : rows) {
            const Vec3 x(r.values[0], r.values[1], r.values[2]);
            int best = 0;
            double best_d = (x - nodes[0]).squaredNorm();
            for (int i = 1; i < p; ++i) {
                const double d = (x - nodes[i]).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            if (std::sqrt(best_d) > 0.5 * spacing[best]) {
                unmatched.push_back(r.line);
                continue;
            }
            store(best, (x - nodes[best]).dot(geometry.normals()[best]));
        }
        if (!unmatched.empty()) {
            throw InvalidInput("ingest: " + std::to_string(unmatched.size()) +
                               " point(s) match no node, lines " + row_list(unmatched));
        }
    }

    std::vector<int> indices;
    Eigen::VectorXd values(static_cast<Eigen::Index>(by_node.size()));
    Eigen::Index k = 0;
    for (const auto& [node, v] : by_node) {
        indices.push_back(node);
        values[k++] = v;
    }
    return {DeviationField::over(SampleSet::from_indices(geometry, std::move(indices)),
                                 std::move(values)),
            duplicates};
}

IngestResult ingest_point_cloud(const std::filesystem::path& path, const Geometry& geometry) {
    return ingest_point_cloud_text(read_text_file(path), geometry);
}

}  // namespace modalform
