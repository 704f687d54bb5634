#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modalform/decomposition.hpp"
#include "modalform/geometry.hpp"

namespace modalform {

enum class TourMethod { AsGiven, NearestNeighbor, NearestNeighbor2Opt };

const char* to_string(TourMethod m) noexcept;
TourMethod tour_method_from_string(const std::string& s);

inline constexpr int kDefaultMaxTwoOptPasses = 50;

struct TourResult {
    std::vector<int> order;  // permutation of the input indices
    double length = 0.0;     // open path
    int passes = 0;          // 2-opt passes performed
    bool converged = true;   // false when the pass bound stopped 2-opt
};

/// Open-path ordering. Nearest neighbor starts at point 0; ties go to the
/// lower index. 2-opt reversals (including path ends) are applied until no
/// improving move remains or `max_passes` is reached.
TourResult order_tour(std::span<const Vec3> points, TourMethod method,
                      int max_passes = kDefaultMaxTwoOptPasses);

double open_path_length(std::span<const Vec3> points, std::span<const int> order);

struct ProbePoint {
    int node = 0;  // geometry node index
    Vec3 position = Vec3::Zero();
    Vec3 approach = Vec3::Zero();  // unit, inward (-normal)
};

struct MeasurementPlan {
    std::string geometry_ref;
    GeometryParams geometry_params;
    std::vector<ProbePoint> ordered_points;
    double tour_length = 0.0;
    TourMethod method = TourMethod::AsGiven;
    int two_opt_passes = 0;
    bool converged = true;

    void validate() const;
};

/// Probe points for the sampled nodes, ordered by `method`.
MeasurementPlan plan_measurement(const Geometry& geometry, const SampleSet& sample,
                                 TourMethod method, int max_passes = kDefaultMaxTwoOptPasses);

/// DMIS program: header, feature declaration, one PTMEAS per planned point.
std::string emit_dmis(const MeasurementPlan& plan, const std::string& feature_name);

/// True deviations at the planned nodes plus i.i.d. Gaussian noise. The
/// returned field is indexed by node (ascending), not by tour order.
DeviationField simulate_probing(const MeasurementPlan& plan, const DeviationField& true_field,
                                double noise_sigma, std::uint64_t seed);

}  // namespace modalform
