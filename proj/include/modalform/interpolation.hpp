#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "modalform/decomposition.hpp"
#include "modalform/geometry.hpp"
#include "modalform/modal_basis.hpp"

namespace modalform {

inline constexpr double kInterpolationConditionLimit = 1e10;
/// Default sampled points per fitted mode when the caller does not fix the mode count.
inline constexpr double kDefaultOversampling = 1.5;

/// Rows of an infinity-normed basis restricted to the sampled nodes, keeping
/// the n' = min(max_modes, q, n) least complex modes.
///
/// Changing between the Euclidean and infinity normalizations only rescales
/// columns, and moving between complete and degraded degrees of freedom is a
/// row restriction, so a least-squares fit on these rows followed by a
/// full-basis reconstruction is the whole interpolation.
struct DegradedProjection {
    std::string basis_ref;
    SampleSet sample;
    Eigen::MatrixXd restricted_modes;  // q x n'
    std::vector<int> kept_mode_indices;
    double condition_number = 1.0;
    int basis_mode_count = 0;

    int kept() const noexcept { return static_cast<int>(kept_mode_indices.size()); }
};

DegradedProjection build_degraded_projection(const ModalBasis& basis, const SampleSet& sample,
                                             int max_modes);

struct Interpolation {
    ModalSignature coefficients;  // length n, zero beyond the kept modes
    DeviationField field;         // over every node of the geometry
};

/// Throws InterpolationFailure when the restricted system's condition number
/// exceeds kInterpolationConditionLimit.
Interpolation interpolate(const DeviationField& degraded, const DegradedProjection& projection,
                          const ModalBasis& basis);

struct SweepConfig {
    std::vector<int> complexities;   // highest participating mode index (1-based)
    std::vector<int> sample_counts;  // ascending
    int trials = 5;
    double noise_sigma = 0.0;  // mm, added to the sampled values
    std::uint64_t seed = 0;
    double defect_range = 3.0;  // peak-to-valley of every synthesized dense defect
    int max_modes = 0;          // 0: fit as many modes as the defect complexity
    double oversampling = kDefaultOversampling;  // sampled points per fitted mode, >= 1
    std::uint64_t sample_seed = 0;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// Default axes: complexities 3..60 step 3, sample counts 10..250 step 10,
/// clipped to the basis and geometry sizes.
SweepConfig default_sweep_config(int node_count, int basis_size);

struct SweepResult {
    std::vector<int> complexities;
    std::vector<int> sample_counts;
    Eigen::MatrixXd rms_grid;    // complexities x sample_counts, NaN marks a failed cell
    Eigen::MatrixXd rms_stderr;  // standard error of the cell mean
    int trials_per_cell = 0;
    std::uint64_t rng_seed = 0;

    bool missing(int ci, int qi) const { return std::isnan(rms_grid(ci, qi)); }
};

/// Coefficients of a random dense defect on modes 1..complexity, uniform in
/// [-1, 1] and rescaled so the field's range equals `range`.
Eigen::VectorXd synthesize_defect(const ModalBasis& basis, int complexity, double range,
                                  std::uint64_t stream_seed);

SweepResult run_sweep(const Geometry& geometry, const ModalBasis& basis, const SweepConfig& config);

/// Mixes the sweep seed with cell coordinates into an independent stream seed.
std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0);

}  // namespace modalform
