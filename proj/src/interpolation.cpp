#include "modalform/interpolation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "modalform/error.hpp"

namespace modalform {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double condition_of(const Eigen::MatrixXd& a) {
    if (a.cols() == 0) return 1.0;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
    const auto& s = svd.singularValues();
    const double smallest = s[s.size() - 1];
    return smallest > 0.0 ? s[0] / smallest : std::numeric_limits<double>::infinity();
}

}  // namespace

std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    return splitmix64(h ^ c);
}

DegradedProjection build_degraded_projection(const ModalBasis& basis, const SampleSet& sample,
                                             int max_modes) {
    if (basis.norm_kind != NormKind::Infinity) {
        throw InvalidInput("build_degraded_projection: basis must be infinity-normed");
    }
    if (sample.count() == 0) throw InvalidInput("build_degraded_projection: empty sample");
    if (sample.geometry_ref() != basis.geometry_ref || sample.parent_node_count() != basis.dof()) {
        throw InvalidInput("build_degraded_projection: sample is not over the basis geometry");
    }
    if (max_modes < 1) throw InvalidParameter("build_degraded_projection: max_modes must be >= 1");

    const int kept = std::min({max_modes, sample.count(), basis.size()});
    DegradedProjection proj;
    proj.basis_ref = basis.ref();
    proj.sample = sample;
    proj.basis_mode_count = basis.size();
    proj.restricted_modes.resize(sample.count(), kept);
    for (int r = 0; r < sample.count(); ++r) {
        proj.restricted_modes.row(r) = basis.modes.row(sample.indices()[r]).head(kept);
    }
    proj.kept_mode_indices.resize(kept);
    for (int j = 0; j < kept; ++j) proj.kept_mode_indices[j] = j;
    proj.condition_number = condition_of(proj.restricted_modes);
    return proj;
}

Interpolation interpolate(const DeviationField& degraded, const DegradedProjection& projection,
                          const ModalBasis& basis) {
    degraded.validate();
    if (projection.basis_ref != basis.ref()) {
        throw InvalidInput("interpolate: projection was built from another basis");
    }
    if (!(degraded.sample == projection.sample)) {
        throw InvalidInput("interpolate: measurement sample differs from the projection sample");
    }
    if (!(projection.condition_number <= kInterpolationConditionLimit)) {
        throw InterpolationFailure("interpolate: restricted basis with " +
                                       std::to_string(projection.kept()) +
                                       " modes is rank deficient (condition " +
                                       std::to_string(projection.condition_number) + ")",
                                   projection.kept());
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(projection.restricted_modes);
    const Eigen::VectorXd kept_coeffs = qr.solve(degraded.values);

    Interpolation out;
    out.coefficients.basis_ref = projection.basis_ref;
    out.coefficients.condition_number = projection.condition_number;
    out.coefficients.coefficients = Eigen::VectorXd::Zero(basis.size());
    for (int j = 0; j < projection.kept(); ++j) {
        out.coefficients.coefficients[projection.kept_mode_indices[j]] = kept_coeffs[j];
    }
    if (projection.condition_number > kIllConditioned) {
        out.coefficients.warning = "ill-conditioned restricted basis: condition number " +
                                   std::to_string(projection.condition_number);
    }
    out.field = reconstruct_all(out.coefficients, basis);
    return out;
}

SweepConfig default_sweep_config(int node_count, int basis_size) {
    SweepConfig cfg;
    for (int c = 3; c <= 60 && c <= basis_size; c += 3) cfg.complexities.push_back(c);
    for (int q = 10; q <= 250 && q <= node_count; q += 10) cfg.sample_counts.push_back(q);
    return cfg;
}

Eigen::VectorXd synthesize_defect(const ModalBasis& basis, int complexity, double range,
                                  std::uint64_t stream_seed) {
    if (complexity < 1 || complexity > basis.size()) {
        throw InvalidParameter("synthesize_defect: complexity must lie in 1.." +
                               std::to_string(basis.size()));
    }
    std::mt19937_64 rng(stream_seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(basis.size());
    for (int i = 0; i < complexity; ++i) coeffs[i] = unit(rng);
    const Eigen::VectorXd field = basis.modes * coeffs;
    const double span = field.maxCoeff() - field.minCoeff();
    // A single constant mode has no range to rescale.
    if (span > 1e-12 * std::max(1.0, field.cwiseAbs().maxCoeff())) coeffs *= range / span;
    return coeffs;
}

SweepResult run_sweep(const Geometry& geometry, const ModalBasis& basis, const SweepConfig& config) {
    if (basis.geometry_ref != geometry.ref()) {
        throw InvalidInput("run_sweep: basis was built on another geometry");
    }
    if (basis.norm_kind != NormKind::Infinity) {
        throw InvalidInput("run_sweep: basis must be infinity-normed");
    }
    if (config.trials < 1) throw InvalidParameter("run_sweep: trials must be >= 1");
    if (config.noise_sigma < 0.0) throw InvalidParameter("run_sweep: noise_sigma must be >= 0");
    if (!(config.oversampling >= 1.0)) throw InvalidParameter("run_sweep: oversampling must be >= 1");
    for (int c : config.complexities) {
        if (c < 1 || c > basis.size()) {
            throw InvalidParameter("run_sweep: complexity " + std::to_string(c) +
                                   " outside the basis (1.." + std::to_string(basis.size()) + ")");
        }
    }
    for (std::size_t i = 0; i < config.sample_counts.size(); ++i) {
        const int q = config.sample_counts[i];
        if (q < 1 || q > geometry.node_count()) {
            throw InvalidParameter("run_sweep: sample count " + std::to_string(q) +
                                   " outside 1.." + std::to_string(geometry.node_count()));
        }
        if (i > 0 && q <= config.sample_counts[i - 1]) {
            throw InvalidParameter("run_sweep: sample counts must be strictly ascending");
        }
    }

    const int nc = static_cast<int>(config.complexities.size());
    const int nq = static_cast<int>(config.sample_counts.size());
    SweepResult result;
    result.complexities = config.complexities;
    result.sample_counts = config.sample_counts;
    result.trials_per_cell = config.trials;
    result.rng_seed = config.seed;
    result.rms_grid = Eigen::MatrixXd::Zero(nc, nq);
    result.rms_stderr = Eigen::MatrixXd::Zero(nc, nq);

    std::vector<SampleSet> samples;
    samples.reserve(nq);
    for (int q : config.sample_counts) {
        samples.push_back(uniform_subsample(geometry, q, config.sample_seed));
    }
    const double root_p = std::sqrt(static_cast<double>(geometry.node_count()));

    auto run_cell = [&](int cell) {
        const int ci = cell / nq, qi = cell % nq;
        const int c = config.complexities[ci];
        const int q = config.sample_counts[qi];
        // Square restricted systems interpolate wildly between samples, so the
        // fit keeps `oversampling` points per mode.
        const int affordable = std::max(1, static_cast<int>(q / config.oversampling));
        const int fit = std::min(config.max_modes > 0 ? config.max_modes : c, affordable);
        const DegradedProjection proj = build_degraded_projection(basis, samples[qi], fit);
        std::vector<double> rms(config.trials);
        try {
            for (int t = 0; t < config.trials; ++t) {
                // The coefficient stream depends on the trial only: every sample
                // count sees the same defect, and complexity c uses the first c
                // draws of the sequence shared by all complexities.
                const Eigen::VectorXd coeffs = synthesize_defect(
                    basis, c, config.defect_range, derive_stream_seed(config.seed, 1, t));
                const Eigen::VectorXd dense = basis.modes * coeffs;
                DeviationField measured =
                    DeviationField::full(geometry, dense).restrict_to(samples[qi]);
                if (config.noise_sigma > 0.0) {
                    std::mt19937_64 rng(derive_stream_seed(config.seed, 2, (std::uint64_t(c) << 32) | q, t));
                    std::normal_distribution<double> noise(0.0, config.noise_sigma);
                    for (auto& v : measured.values) v += noise(rng);
                }
                const Interpolation interp = interpolate(measured, proj, basis);
                rms[t] = (interp.field.values - dense).norm() / root_p;
            }
        } catch (const InterpolationFailure&) {
            result.rms_grid(ci, qi) = std::numeric_limits<double>::quiet_NaN();
            result.rms_stderr(ci, qi) = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        double mean = 0.0;
        for (double v : rms) mean += v;
        mean /= config.trials;
        double var = 0.0;
        for (double v : rms) var += (v - mean) * (v - mean);
        const double sd = config.trials > 1 ? std::sqrt(var / (config.trials - 1)) : 0.0;
        result.rms_grid(ci, qi) = mean;
        result.rms_stderr(ci, qi) = sd / std::sqrt(static_cast<double>(config.trials));
    };

    const int cells = nc * nq;
    unsigned threads = config.threads ? config.threads : std::thread::hardware_concurrency();
    threads = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(std::max(cells, 1)));
    if (threads == 1) {
        for (int cell = 0; cell < cells; ++cell) run_cell(cell);
        return result;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (int cell = next++; cell < cells && !failed; cell = next++) {
                    try {
                        run_cell(cell);
                    } catch (...) {
                        if (!failed.exchange(true)) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
    return result;
}

}  // namespace modalform
