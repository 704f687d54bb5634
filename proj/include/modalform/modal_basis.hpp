#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "modalform/geometry.hpp"

namespace modalform {

/// Stiffness and mass operators over the scalar normal-deviation field.
struct OperatorPair {
    Eigen::MatrixXd stiffness;
    Eigen::MatrixXd mass;
    std::string geometry_ref;
    /// Optional B with stiffness = B^T B. With a diagonal mass it lets the
    /// eigenproblem be solved as an SVD, which keeps the exact kernel of B and
    /// small eigenvalues free of the dense solver's eps * lambda_max error.
    Eigen::MatrixXd stiffness_factor;
};

enum class ModeClass { Rigid, Size, Natural };
enum class NormKind { Euclidean, Infinity };

const char* to_string(ModeClass c) noexcept;
const char* to_string(NormKind k) noexcept;
ModeClass mode_class_from_string(const std::string& s);
NormKind norm_kind_from_string(const std::string& s);

/// Ordered modal basis: columns of `modes` are mode shapes, least complex first.
///
/// `inf_norms[i]` is the peak amplitude (mm) that a unit coefficient on the
/// Euclidean-normalized column i produces. For an infinity-normed basis it
/// is the factor that was divided out, so `modes.col(i) * inf_norms[i]`
/// recovers the Euclidean-kind column.
struct ModalBasis {
    std::string geometry_ref;
    Eigen::MatrixXd modes;
    Eigen::VectorXd eigenvalues;
    std::vector<ModeClass> mode_class;
    NormKind norm_kind = NormKind::Euclidean;
    Eigen::VectorXd inf_norms;

    int dof() const noexcept { return static_cast<int>(modes.rows()); }
    int size() const noexcept { return static_cast<int>(modes.cols()); }

    /// Content identity: geometry ref plus a hash of the mode matrix and tags.
    std::string ref() const;

    int count(ModeClass c) const;

    /// Throws InvalidInput on any violated invariant.
    void validate() const;
};

/// Extra field injected into a basis (rigid-body motion or size defect).
struct TaggedField {
    Eigen::VectorXd values;
    ModeClass tag = ModeClass::Rigid;
    std::string label;
};

/// Unit material constants. Profiles: Euler-Bernoulli bending with rotations
/// statically condensed and tributary-length lumped mass. Caps: cotangent
/// Laplace-Beltrami stiffness with mixed-Voronoi lumped mass.
OperatorPair assemble_operators(const Geometry& geometry);

/// First n generalized eigenpairs of (K, M), ascending, Euclidean-normalized,
/// largest-magnitude entry positive. Modes below the rigid tolerance are
/// tagged Rigid.
ModalBasis solve_modes(const OperatorPair& ops, int n);

/// Number of near-zero eigenvalues detected from the largest spectral gap
/// among the first eight, and the matching tolerance.
struct RigidDetection {
    int count = 0;
    double tolerance = 0.0;
};
RigidDetection detect_rigid_modes(const Eigen::VectorXd& ascending_eigenvalues);

/// Normal projections of unit translations and rotations, plus the size
/// field on caps. Fields with norm below 1e-9 * sqrt(p) are dropped.
std::vector<TaggedField> rigid_and_size_fields(const Geometry& geometry);

/// Places rigid fields, then size fields, then the natural modes
/// Gram-Schmidt-orthogonalized against everything before them. Natural
/// modes that collapse (residual < 1e-8 of their norm) are dropped.
ModalBasis enrich_basis(const ModalBasis& natural, std::span<const TaggedField> extra_fields);

ModalBasis renormalize(const ModalBasis& basis, NormKind kind);

struct BasisOptions {
    int modes = 50;  // column count of the final basis
    bool enrich = true;
    NormKind norm = NormKind::Infinity;
};

/// assemble -> solve -> (enrich) -> renormalize, solving enough natural
/// modes that the final basis has exactly `options.modes` columns.
ModalBasis build_modal_basis(const Geometry& geometry, const BasisOptions& options);

/// Smallest over largest singular value.
double inverse_condition(const Eigen::MatrixXd& columns);

}  // namespace modalform
