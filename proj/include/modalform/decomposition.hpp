#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "modalform/geometry.hpp"
#include "modalform/modal_basis.hpp"

namespace modalform {

/// Scalar deviations (mm) along node normals, one per sampled node.
struct DeviationField {
    std::string geometry_ref;
    SampleSet sample;
    Eigen::VectorXd values;

    static DeviationField full(const Geometry& geometry, Eigen::VectorXd values);
    static DeviationField over(SampleSet sample, Eigen::VectorXd values);

    /// Values at the nodes of `subset`, which must be contained in `sample`.
    DeviationField restrict_to(const SampleSet& subset) const;

    void validate() const;
};

struct ModalSignature {
    std::string basis_ref;
    Eigen::VectorXd coefficients;  // mm per infinity-normed mode
    double condition_number = 1.0;
    std::optional<std::string> warning;
};

struct ResidualReport {
    DeviationField residual_field;
    /// e_curve[m-1]: RMS residual after refitting the first m modes.
    std::vector<double> e_curve;
};

enum class Band { PositionOrientation, Size, Form, Waviness };

inline constexpr int kDefaultFormCutoff = 15;
inline constexpr double kIllConditioned = 1e8;

const char* to_string(Band band) noexcept;
Band band_from_string(const std::string& s);

/// Least-squares modal coefficients of a full-sample field. The system is
/// solved by Householder QR; a condition number above 1e8 attaches a warning.
ModalSignature decompose(const DeviationField& field, const ModalBasis& basis);

/// Sum of lambda_i * Q_i over the selected (0-based) mode indices.
DeviationField reconstruct(const ModalSignature& signature, const ModalBasis& basis,
                           std::span<const int> selection);
DeviationField reconstruct_all(const ModalSignature& signature, const ModalBasis& basis);

ResidualReport residual_report(const DeviationField& field, const ModalSignature& signature,
                               const ModalBasis& basis);

/// Pearson coefficient via centered-reduced vectors. Zero variance throws
/// UndefinedCorrelation.
double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double pearson_correlation(const ModalSignature& a, const ModalSignature& b);

/// Mode indices (0-based, ascending) belonging to a band. The four bands
/// partition the basis: rigid tags, size tags, then natural modes split at
/// `form_cutoff` counted among natural modes only.
std::vector<int> band_filter(const ModalSignature& signature, const ModalBasis& basis, Band band,
                             int form_cutoff = kDefaultFormCutoff);

/// Indices of the k largest |lambda_i|, descending; ties go to the lower index.
std::vector<int> significant_modes(const ModalSignature& signature, int k);

}  // namespace modalform
