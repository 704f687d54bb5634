#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "modalform/error.hpp"
#include "modalform/interpolation.hpp"

using namespace modalform;

namespace {

const Geometry& profile() {
    static const Geometry g = build_profile(250.0, 250);
    return g;
}

const ModalBasis& profile_basis() {
    static const ModalBasis b = build_modal_basis(profile(), {60, true, NormKind::Infinity});
    return b;
}

double direct_condition(const Eigen::MatrixXd& a) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& s = svd.singularValues();
    return s[0] / s[s.size() - 1];
}

SweepConfig small_sweep() {
    SweepConfig cfg;
    cfg.complexities = {4, 8, 12};
    cfg.sample_counts = {15, 30, 60, 120, 250};
    cfg.trials = 4;
    cfg.seed = 31;
    cfg.threads = 1;
    return cfg;
}

}  // namespace

TEST_SUITE("interpolation") {

TEST_CASE("full sample keeps the full mode matrix") {
    const auto& b = profile_basis();
    const auto proj = build_degraded_projection(b, SampleSet::full(profile()), b.size());
    CHECK(proj.kept() == b.size());
    CHECK(proj.restricted_modes == b.modes);
    CHECK(proj.condition_number == doctest::Approx(direct_condition(b.modes)).epsilon(1e-8));
    CHECK(proj.basis_mode_count == b.size());
}

TEST_CASE("mode count is capped by the point count") {
    const Geometry g = build_profile(1.0, 400);
    const auto b = build_modal_basis(g, {200, true, NormKind::Infinity});
    const auto proj = build_degraded_projection(b, uniform_subsample(g, 5, 0), 200);
    CHECK(proj.kept() == 5);
    CHECK(proj.restricted_modes.rows() == 5);
    CHECK(proj.kept_mode_indices == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("restricted rows are exact copies") {
    const auto& b = profile_basis();
    const auto s = uniform_subsample(profile(), 40, 9);
    const auto proj = build_degraded_projection(b, s, 25);
    CHECK(proj.kept() == 25);
    for (int r = 0; r < 40; ++r) {
        for (int c = 0; c < 25; ++c) CHECK(proj.restricted_modes(r, c) == b.modes(s.indices()[r], c));
    }
}

TEST_CASE("fifteen farthest-point samples give a usable system") {
    const auto proj = build_degraded_projection(profile_basis(), uniform_subsample(profile(), 15, 0), 15);
    CHECK(proj.kept() == 15);
    const double cond = direct_condition(proj.restricted_modes);
    CHECK(std::isfinite(cond));
    CHECK(cond < 1e8);
    CHECK(proj.condition_number == doctest::Approx(cond).epsilon(1e-6));
}

TEST_CASE("projection preconditions") {
    const auto& b = profile_basis();
    CHECK_THROWS_AS(build_degraded_projection(b, SampleSet::from_indices(profile(), {}), 5),
                    InvalidInput);
    CHECK_THROWS_AS(build_degraded_projection(renormalize(b, NormKind::Euclidean),
                                              SampleSet::full(profile()), 5),
                    InvalidInput);
    const Geometry other = build_profile(100.0, 250);
    CHECK_THROWS_AS(build_degraded_projection(b, SampleSet::full(other), 5), InvalidInput);
}

TEST_CASE("exact data in the kept modes is recovered") {
    const auto& b = profile_basis();
    const auto s = uniform_subsample(profile(), 30, 0);
    const auto proj = build_degraded_projection(b, s, 20);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(b.size());
    for (int i = 0; i < 20; ++i) lambda[i] = u(rng);
    const Eigen::VectorXd dense = b.modes * lambda;
    const auto measured = DeviationField::full(profile(), dense).restrict_to(s);
    const auto out = interpolate(measured, proj, b);
    CHECK((out.coefficients.coefficients - lambda).norm() <= 1e-9 * lambda.norm());
    CHECK((out.field.values - dense).norm() <= 1e-9 * dense.norm());
    CHECK(out.field.sample.is_full());
}

TEST_CASE("zero measurement interpolates to zero") {
    const auto& b = profile_basis();
    const auto s = uniform_subsample(profile(), 20, 0);
    const auto proj = build_degraded_projection(b, s, 20);
    const auto out = interpolate(DeviationField::over(s, Eigen::VectorXd::Zero(20)), proj, b);
    CHECK(out.coefficients.coefficients.cwiseAbs().maxCoeff() == 0.0);
    CHECK(out.field.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("full-sample interpolation equals decompose then reconstruct") {
    const auto& b = profile_basis();
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    Eigen::VectorXd v(250);
    for (auto& x : v) x = nd(rng);
    const auto field = DeviationField::full(profile(), v);
    const auto proj = build_degraded_projection(b, SampleSet::full(profile()), b.size());
    const auto interp = interpolate(field, proj, b);
    const auto sig = decompose(field, b);
    CHECK((interp.coefficients.coefficients - sig.coefficients).norm() <= 1e-10 * sig.coefficients.norm());
    CHECK((interp.field.values - reconstruct_all(sig, b).values).norm() <= 1e-10 * v.norm());
}

TEST_CASE("a pure mode is recovered from sparse samples") {
    const auto& b = profile_basis();
    for (int c : {3, 7, 12}) {
        const auto s = uniform_subsample(profile(), 2 * c, 0);
        const auto proj = build_degraded_projection(b, s, c + 1);
        REQUIRE(proj.condition_number < 1e8);
        const Eigen::VectorXd dense = b.modes.col(c);
        const auto out = interpolate(DeviationField::full(profile(), dense).restrict_to(s), proj, b);
        CAPTURE(c);
        CHECK((out.field.values - dense).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("rank-deficient restricted bases raise an interpolation failure") {
    auto b = profile_basis();
    b.modes.col(5) = b.modes.col(4);
    const auto s = uniform_subsample(profile(), 20, 0);
    const auto proj = build_degraded_projection(b, s, 8);
    CHECK(proj.condition_number > kInterpolationConditionLimit);
    const auto measured = DeviationField::over(s, Eigen::VectorXd::Zero(20));
    try {
        interpolate(measured, proj, b);
        FAIL("expected InterpolationFailure");
    } catch (const InterpolationFailure& e) {
        CHECK(e.mode_count() == 8);
    }
}

TEST_CASE("interpolate rejects a sample mismatch") {
    const auto& b = profile_basis();
    const auto proj = build_degraded_projection(b, uniform_subsample(profile(), 20, 0), 10);
    const auto other = uniform_subsample(profile(), 20, 1);
    if (!(other == proj.sample)) {
        CHECK_THROWS_AS(interpolate(DeviationField::over(other, Eigen::VectorXd::Zero(20)), proj, b),
                        InvalidInput);
    }
}

TEST_CASE("synthesized defects hit the requested range") {
    const auto& b = profile_basis();
    for (int c : {1, 5, 40}) {
        const auto coeffs = synthesize_defect(b, c, 3.0, 123 + c);
        CHECK(coeffs.tail(b.size() - c).cwiseAbs().maxCoeff() == 0.0);
        if (c > 1) {
            const Eigen::VectorXd f = b.modes * coeffs;
            CHECK(f.maxCoeff() - f.minCoeff() == doctest::Approx(3.0).epsilon(1e-12));
        }
    }
    CHECK(synthesize_defect(b, 9, 3.0, 5) == synthesize_defect(b, 9, 3.0, 5));
    CHECK_THROWS_AS(synthesize_defect(b, 0, 3.0, 5), InvalidParameter);
    CHECK_THROWS_AS(synthesize_defect(b, 61, 3.0, 5), InvalidParameter);
}

TEST_CASE("default sweep axes") {
    const auto cfg = default_sweep_config(250, 60);
    CHECK(cfg.complexities.size() == 20);
    CHECK(cfg.complexities.front() == 3);
    CHECK(cfg.complexities.back() == 60);
    CHECK(cfg.sample_counts.size() == 25);
    CHECK(cfg.sample_counts.back() == 250);
    CHECK(cfg.trials >= 2);
    CHECK(static_cast<int>(cfg.complexities.size() * cfg.sample_counts.size()) * cfg.trials > 2000);
    const auto clipped = default_sweep_config(100, 20);
    CHECK(clipped.complexities.back() == 18);
    CHECK(clipped.sample_counts.back() == 100);
}

TEST_CASE("sweep: no degradation recovers exactly") {
    auto cfg = small_sweep();
    const auto r = run_sweep(profile(), profile_basis(), cfg);
    REQUIRE(r.rms_grid.rows() == 3);
    REQUIRE(r.rms_grid.cols() == 5);
    for (int ci = 0; ci < 3; ++ci) CHECK(r.rms_grid(ci, 4) <= 1e-9);
    CHECK((r.rms_grid.array() >= 0.0).all());
    CHECK(r.rms_grid.allFinite());
}

TEST_CASE("sweep: error shrinks as samples grow") {
    auto cfg = small_sweep();
    cfg.complexities = {30, 45};
    cfg.sample_counts = {30, 45, 60, 75, 90};
    const auto r = run_sweep(profile(), profile_basis(), cfg);
    for (int ci = 0; ci < r.rms_grid.rows(); ++ci) {
        for (int qi = 1; qi < r.rms_grid.cols(); ++qi) {
            const double slack = std::max(r.rms_stderr(ci, qi), r.rms_stderr(ci, qi - 1)) + 1e-9;
            CAPTURE(ci);
            CAPTURE(qi);
            CHECK(r.rms_grid(ci, qi) <= r.rms_grid(ci, qi - 1) + slack);
        }
    }
    CHECK(r.rms_grid(1, 0) > 0.01);
}

TEST_CASE("sweep fits at most q / oversampling modes") {
    SweepConfig cfg;
    cfg.complexities = {20};
    cfg.sample_counts = {20, 30};
    cfg.trials = 3;
    cfg.threads = 1;
    const auto r = run_sweep(profile(), profile_basis(), cfg);
    CHECK(r.rms_grid(0, 0) > 1e-3);   // 13 modes fitted to a 20-mode defect
    CHECK(r.rms_grid(0, 1) <= 1e-9);  // 20 modes fitted from 30 points
    cfg.oversampling = 1.0;
    CHECK(run_sweep(profile(), profile_basis(), cfg).rms_grid(0, 0) <= 1e-9);
    cfg.oversampling = 0.5;
    CHECK_THROWS_AS(run_sweep(profile(), profile_basis(), cfg), InvalidParameter);
}

TEST_CASE("sweep: complex defects are badly interpolated from few points") {
    SweepConfig cfg;
    cfg.complexities = {40};
    cfg.sample_counts = {15};
    cfg.trials = 4;
    cfg.seed = 2;
    cfg.threads = 1;
    const auto r = run_sweep(profile(), profile_basis(), cfg);
    CHECK(r.rms_grid(0, 0) > 0.1 * cfg.defect_range);
}

TEST_CASE("sweep is deterministic and schedule independent") {
    auto cfg = small_sweep();
    cfg.noise_sigma = 0.01;
    const auto a = run_sweep(profile(), profile_basis(), cfg);
    const auto b = run_sweep(profile(), profile_basis(), cfg);
    cfg.threads = 3;
    const auto c = run_sweep(profile(), profile_basis(), cfg);
    CHECK(a.rms_grid == b.rms_grid);
    CHECK(a.rms_grid == c.rms_grid);
    CHECK(a.rms_stderr == c.rms_stderr);
    cfg.seed = 32;
    const auto d = run_sweep(profile(), profile_basis(), cfg);
    CHECK(!(a.rms_grid == d.rms_grid));
}

TEST_CASE("sweep records failed cells as missing") {
    auto b = profile_basis();
    b.modes.col(5) = b.modes.col(4);
    SweepConfig cfg;
    cfg.complexities = {3, 8};
    cfg.sample_counts = {20};
    cfg.threads = 1;
    const auto r = run_sweep(profile(), b, cfg);
    CHECK(!r.missing(0, 0));
    CHECK(r.missing(1, 0));
}

TEST_CASE("sweep rejects bad configurations") {
    auto cfg = small_sweep();
    cfg.sample_counts = {30, 20};
    CHECK_THROWS_AS(run_sweep(profile(), profile_basis(), cfg), InvalidParameter);
    cfg = small_sweep();
    cfg.complexities = {61};
    CHECK_THROWS_AS(run_sweep(profile(), profile_basis(), cfg), InvalidParameter);
    cfg = small_sweep();
    cfg.trials = 0;
    CHECK_THROWS_AS(run_sweep(profile(), profile_basis(), cfg), InvalidParameter);
}

TEST_CASE("stream seeds differ across coordinates") {
    CHECK(derive_stream_seed(1, 1, 2, 3) == derive_stream_seed(1, 1, 2, 3));
    CHECK(derive_stream_seed(1, 1, 2, 3) != derive_stream_seed(1, 1, 3, 2));
    CHECK(derive_stream_seed(1, 1, 2, 3) != derive_stream_seed(2, 1, 2, 3));
}

}
