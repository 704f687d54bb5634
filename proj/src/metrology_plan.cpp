#include "modalform/metrology_plan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "modalform/error.hpp"

namespace modalform {
namespace {

double dist(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

// Fixed-point with 6 decimals; anything that rounds to zero prints unsigned.
std::string fixed6(double v) {
    if (std::abs(v) < 5e-7) v = 0.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::vector<int> nearest_neighbor_order(std::span<const Vec3> pts) {
    const int n = static_cast<int>(pts.size());
    std::vector<int> order{0};
    std::vector<bool> used(n, false);
    used[0] = true;
    for (int step = 1; step < n; ++step) {
        const Vec3& here = pts[order.back()];
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (used[j]) continue;
            const double d = dist(here, pts[j]);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        used[best] = true;
        order.push_back(best);
    }
    return order;
}

// Reversing order[i..j] of an open path; a missing neighbour contributes nothing.
std::pair<int, bool> two_opt(std::span<const Vec3> pts, std::vector<int>& order, int max_passes) {
    const int n = static_cast<int>(order.size());
    int passes = 0;
    while (passes < max_passes) {
        ++passes;
        bool improved = false;
        for (int i = 0; i < n - 1; ++i) {
            for (int j = i + 1; j < n; ++j) {
                double before = 0.0, after = 0.0;
                if (i > 0) {
                    before += dist(pts[order[i - 1]], pts[order[i]]);
                    after += dist(pts[order[i - 1]], pts[order[j]]);
                }
                if (j < n - 1) {
                    before += dist(pts[order[j]], pts[order[j + 1]]);
                    after += dist(pts[order[i]], pts[order[j + 1]]);
                }
                if (after < before - 1e-12 * std::max(1.0, before)) {
                    std::reverse(order.begin() + i, order.begin() + j + 1);
                    improved = true;
                }
            }
        }
        if (!improved) return {passes, true};
    }
    return {passes, false};
}

}  // namespace

const char* to_string(TourMethod m) noexcept {
    switch (m) {
        case TourMethod::AsGiven: return "as_given";
        case TourMethod::NearestNeighbor: return "nearest_neighbor";
        case TourMethod::NearestNeighbor2Opt: return "nn_plus_2opt";
    }
    return "as_given";
}

TourMethod tour_method_from_string(const std::string& s) {
    if (s == "as_given") return TourMethod::AsGiven;
    if (s == "nearest_neighbor") return TourMethod::NearestNeighbor;
    if (s == "nn_plus_2opt") return TourMethod::NearestNeighbor2Opt;
    throw InvalidInput("unknown tour method '" + s + "'");
}

double open_path_length(std::span<const Vec3> points, std::span<const int> order) {
    double total = 0.0;
    for (std::size_t k = 1; k < order.size(); ++k) total += dist(points[order[k - 1]], points[order[k]]);
    return total;
}

TourResult order_tour(std::span<const Vec3> points, TourMethod method, int max_passes) {
    if (points.empty()) throw InvalidInput("order_tour: no points");
    TourResult out;
    if (method == TourMethod::AsGiven) {
        out.order.resize(points.size());
        std::iota(out.order.begin(), out.order.end(), 0);
    } else {
        out.order = nearest_neighbor_order(points);
        if (method == TourMethod::NearestNeighbor2Opt) {
            std::tie(out.passes, out.converged) = two_opt(points, out.order, max_passes);
        }
    }
    out.length = open_path_length(points, out.order);
    return out;
}

void MeasurementPlan::validate() const {
    if (ordered_points.empty()) throw InvalidInput("measurement plan: no points");
    std::vector<int> nodes;
    std::vector<Vec3> pos;
    for (const auto& p : ordered_points) {
        if (std::abs(p.approach.norm() - 1.0) > 1e-9) {
            throw InvalidInput("measurement plan: approach vector of node " +
                               std::to_string(p.node) + " is not unit");
        }
        nodes.push_back(p.node);
        pos.push_back(p.position);
    }
    std::sort(nodes.begin(), nodes.end());
    if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) {
        throw InvalidInput("measurement plan: a node is probed twice");
    }
    std::vector<int> seq(pos.size());
    std::iota(seq.begin(), seq.end(), 0);
    const double len = open_path_length(pos, seq);
    if (std::abs(len - tour_length) > 1e-9 * std::max(1.0, len)) {
        throw InvalidInput("measurement plan: tour_length disagrees with the point sequence");
    }
}

MeasurementPlan plan_measurement(const Geometry& geometry, const SampleSet& sample,
                                 TourMethod method, int max_passes) {
    if (sample.geometry_ref() != geometry.ref()) {
        throw InvalidInput("plan_measurement: sample is not over this geometry");
    }
    if (sample.count() == 0) throw InvalidInput("plan_measurement: empty sample");
    std::vector<Vec3> positions;
    for (int node : sample.indices()) positions.push_back(geometry.nodes()[node]);
    const TourResult tour = order_tour(positions, method, max_passes);

    MeasurementPlan plan;
    plan.geometry_ref = geometry.ref();
    plan.geometry_params = geometry.params();
    plan.method = method;
    plan.two_opt_passes = tour.passes;
    plan.converged = tour.converged;
    for (int k : tour.order) {
        const int node = sample.indices()[k];
        plan.ordered_points.push_back({node, geometry.nodes()[node], -geometry.normals()[node]});
    }
    std::vector<int> seq(tour.order.size());
    std::iota(seq.begin(), seq.end(), 0);
    std::vector<Vec3> ordered;
    for (const auto& p : plan.ordered_points) ordered.push_back(p.position);
    plan.tour_length = open_path_length(ordered, seq);
    return plan;
}

std::string emit_dmis(const MeasurementPlan& plan, const std::string& feature_name) {
    if (feature_name.empty()) throw InvalidInput("emit_dmis: feature name is empty");
    if (feature_name.find_first_of("()'\n\r,") != std::string::npos) {
        throw InvalidInput("emit_dmis: feature name contains a DMIS delimiter");
    }
    if (plan.ordered_points.empty()) throw InvalidInput("emit_dmis: plan has no points");

    std::ostringstream out;
    out << "DMISMN/'" << feature_name << " inspection',05.0\n";
    out << "FILNAM/'" << feature_name << "',05.0\n";
    out << "UNITS/MM,ANGDEC\n";
    std::string feat_type;
    if (const auto* cp = std::get_if<CapParams>(&plan.geometry_params)) {
        feat_type = "SPHERE";
        out << "F(" << feature_name << ")=FEAT/SPHERE,INNER,CART," << fixed6(0.0) << ","
            << fixed6(0.0) << "," << fixed6(0.0) << "," << fixed6(2.0 * cp->radius) << "\n";
    } else {
        const auto& pp = std::get<ProfileParams>(plan.geometry_params);
        feat_type = "GCURVE";
        out << "F(" << feature_name << ")=FEAT/GCURVE,CART," << fixed6(0.0) << "," << fixed6(0.0)
            << "," << fixed6(0.0) << "," << fixed6(1.0) << "," << fixed6(0.0) << ","
            << fixed6(0.0) << "," << fixed6(pp.length) << "\n";
    }
    out << "MEAS/" << feat_type << ",F(" << feature_name << ")," << plan.ordered_points.size()
        << "\n";
    for (const auto& p : plan.ordered_points) {
        out << "PTMEAS/CART, " << fixed6(p.position.x()) << ", " << fixed6(p.position.y()) << ", "
            << fixed6(p.position.z()) << ", " << fixed6(p.approach.x()) << ", "
            << fixed6(p.approach.y()) << ", " << fixed6(p.approach.z()) << "\n";
    }
    out << "ENDMES\n";
    out << "ENDFIL\n";
    return out.str();
}

DeviationField simulate_probing(const MeasurementPlan& plan, const DeviationField& true_field,
                                double noise_sigma, std::uint64_t seed) {
    true_field.validate();
    if (plan.geometry_ref != true_field.geometry_ref) {
        throw InvalidInput("simulate_probing: plan and field are on different geometries");
    }
    if (!(noise_sigma >= 0.0)) throw InvalidParameter("simulate_probing: noise_sigma must be >= 0");
    const auto& have = true_field.sample.indices();
    std::vector<std::pair<int, double>> probed;
    probed.reserve(plan.ordered_points.size());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
    for (const auto& p : plan.ordered_points) {
        const auto it = std::lower_bound(have.begin(), have.end(), p.node);
        if (it == have.end() || *it != p.node) {
            throw InvalidInput("simulate_probing: planned node " + std::to_string(p.node) +
                               " has no true deviation");
        }
        double v = true_field.values[it - have.begin()];
        if (noise_sigma > 0.0) v += noise(rng);
        probed.emplace_back(p.node, v);
    }
    std::sort(probed.begin(), probed.end());
    std::vector<int> nodes;
    Eigen::VectorXd values(static_cast<Eigen::Index>(probed.size()));
    for (std::size_t k = 0; k < probed.size(); ++k) {
        nodes.push_back(probed[k].first);
        values[static_cast<Eigen::Index>(k)] = probed[k].second;
    }
    return DeviationField::over(
        SampleSet::from_indices(true_field.geometry_ref, true_field.sample.parent_node_count(),
                                std::move(nodes)),
        std::move(values));
}

}  // namespace modalform
