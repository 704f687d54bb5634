#include "modalform/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "modalform/error.hpp"

namespace modalform {
namespace {

void require_full_field(const DeviationField& field, const ModalBasis& basis, const char* op) {
    field.validate();
    if (field.geometry_ref != basis.geometry_ref) {
        throw InvalidInput(std::string(op) + ": field geometry " + field.geometry_ref +
                           " does not match basis geometry " + basis.geometry_ref);
    }
    if (!field.sample.is_full() || field.values.size() != basis.dof()) {
        throw InvalidInput(std::string(op) + ": field must cover all " +
                           std::to_string(basis.dof()) + " nodes of the basis geometry");
    }
}

void require_matching(const ModalSignature& sig, const ModalBasis& basis, const char* op) {
    if (sig.coefficients.size() != basis.size()) {
        throw InvalidInput(std::string(op) + ": signature has " +
                           std::to_string(sig.coefficients.size()) + " coefficients, basis has " +
                           std::to_string(basis.size()) + " modes");
    }
    if (!sig.basis_ref.empty() && sig.basis_ref != basis.ref()) {
        throw InvalidInput(std::string(op) + ": signature was computed in another basis");
    }
}

double condition_of(const Eigen::MatrixXd& a) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
    const auto& s = svd.singularValues();
    const double smallest = s[s.size() - 1];
    return smallest > 0.0 ? s[0] / smallest : std::numeric_limits<double>::infinity();
}

}  // namespace

DeviationField DeviationField::full(const Geometry& geometry, Eigen::VectorXd values) {
    DeviationField f{geometry.ref(), SampleSet::full(geometry), std::move(values)};
    f.validate();
    return f;
}

DeviationField DeviationField::over(SampleSet sample, Eigen::VectorXd values) {
    std::string ref = sample.geometry_ref();
    DeviationField f{std::move(ref), std::move(sample), std::move(values)};
    f.validate();
    return f;
}

DeviationField DeviationField::restrict_to(const SampleSet& subset) const {
    if (subset.geometry_ref() != geometry_ref) {
        throw InvalidInput("restrict_to: sample belongs to another geometry");
    }
    const auto& have = sample.indices();
    Eigen::VectorXd out(subset.count());
    for (int k = 0; k < subset.count(); ++k) {
        const int node = subset.indices()[k];
        const auto it = std::lower_bound(have.begin(), have.end(), node);
        if (it == have.end() || *it != node) {
            throw InvalidInput("restrict_to: node " + std::to_string(node) + " was not measured");
        }
        out[k] = values[it - have.begin()];
    }
    return over(subset, std::move(out));
}

void DeviationField::validate() const {
    if (values.size() != sample.count()) {
        throw InvalidInput("deviation field: " + std::to_string(values.size()) +
                           " values for " + std::to_string(sample.count()) + " sampled nodes");
    }
    if (sample.geometry_ref() != geometry_ref) {
        throw InvalidInput("deviation field: sample and field disagree on the geometry");
    }
    if (!values.allFinite()) throw InvalidInput("deviation field: non-finite value");
}

const char* to_string(Band band) noexcept {
    switch (band) {
        case Band::PositionOrientation: return "position_orientation";
        case Band::Size: return "size";
        case Band::Form: return "form";
        case Band::Waviness: return "waviness";
    }
    return "form";
}

Band band_from_string(const std::string& s) {
    if (s == "position_orientation") return Band::PositionOrientation;
    if (s == "size") return Band::Size;
    if (s == "form") return Band::Form;
    if (s == "waviness") return Band::Waviness;
    throw InvalidInput("unknown band '" + s + "'");
}

ModalSignature decompose(const DeviationField& field, const ModalBasis& basis) {
    require_full_field(field, basis, "decompose");
    ModalSignature sig;
    sig.basis_ref = basis.ref();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis.modes);
    sig.coefficients = qr.solve(field.values);
    sig.condition_number = condition_of(basis.modes);
    if (!sig.coefficients.allFinite()) {
        throw NumericalError("decompose: least-squares solution is not finite (condition " +
                             std::to_string(sig.condition_number) + ")");
    }
    if (sig.condition_number > kIllConditioned) {
        std::ostringstream os;
        os << "ill-conditioned projection: condition number " << sig.condition_number;
        sig.warning = os.str();
    }
    return sig;
}

DeviationField reconstruct(const ModalSignature& signature, const ModalBasis& basis,
                           std::span<const int> selection) {
    require_matching(signature, basis, "reconstruct");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(basis.dof());
    for (int idx : selection) {
        if (idx < 0 || idx >= basis.size()) {
            throw InvalidInput("reconstruct: mode index " + std::to_string(idx) +
                               " outside 0.." + std::to_string(basis.size() - 1));
        }
        out += signature.coefficients[idx] * basis.modes.col(idx);
    }
    SampleSet full = SampleSet::from_indices(basis.geometry_ref, basis.dof(), [&] {
        std::vector<int> all(basis.dof());
        std::iota(all.begin(), all.end(), 0);
        return all;
    }());
    return DeviationField::over(std::move(full), std::move(out));
}

DeviationField reconstruct_all(const ModalSignature& signature, const ModalBasis& basis) {
    std::vector<int> all(basis.size());
    std::iota(all.begin(), all.end(), 0);
    return reconstruct(signature, basis, all);
}

ResidualReport residual_report(const DeviationField& field, const ModalSignature& signature,
                               const ModalBasis& basis) {
    require_full_field(field, basis, "residual_report");
    require_matching(signature, basis, "residual_report");
    const int p = basis.dof();
    const int n = basis.size();
    const double root_p = std::sqrt(static_cast<double>(p));

    // Prefix least squares: with A = QR, the residual of the fit on the
    // first m columns is the tail of Q^T V starting at row m.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis.modes);
    const Eigen::VectorXd rotated = qr.householderQ().adjoint() * field.values;
    std::vector<double> tail_sq(p + 1, 0.0);
    for (int k = p - 1; k >= 0; --k) tail_sq[k] = tail_sq[k + 1] + rotated[k] * rotated[k];

    ResidualReport report{
        DeviationField::over(field.sample, field.values - basis.modes * signature.coefficients),
        std::vector<double>(n)};
    for (int m = 1; m <= n; ++m) report.e_curve[m - 1] = std::sqrt(tail_sq[m]) / root_p;
    report.e_curve[n - 1] = report.residual_field.values.norm() / root_p;
    return report;
}

double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw InvalidInput("pearson_correlation: vectors must share a length of at least 2");
    }
    const double q = static_cast<double>(a.size());
    const Eigen::VectorXd ca = a.array() - a.mean();
    const Eigen::VectorXd cb = b.array() - b.mean();
    const double sa = std::sqrt(ca.squaredNorm() / q);
    const double sb = std::sqrt(cb.squaredNorm() / q);
    const double floor_a = 1e-14 * std::max(1.0, a.cwiseAbs().maxCoeff());
    const double floor_b = 1e-14 * std::max(1.0, b.cwiseAbs().maxCoeff());
    if (!(sa > floor_a) || !(sb > floor_b)) {
        throw UndefinedCorrelation("pearson_correlation: zero-variance input");
    }
    const double r = (ca / sa).dot(cb / sb) / q;
    return std::clamp(r, -1.0, 1.0);
}

double pearson_correlation(const ModalSignature& a, const ModalSignature& b) {
    return pearson_correlation(a.coefficients, b.coefficients);
}

std::vector<int> band_filter(const ModalSignature& signature, const ModalBasis& basis, Band band,
                             int form_cutoff) {
    require_matching(signature, basis, "band_filter");
    if (form_cutoff < 0) throw InvalidParameter("band_filter: form_cutoff must be >= 0");
    std::vector<int> out;
    int natural_rank = 0;
    for (int i = 0; i < basis.size(); ++i) {
        Band b;
        switch (basis.mode_class[i]) {
            case ModeClass::Rigid: b = Band::PositionOrientation; break;
            case ModeClass::Size: b = Band::Size; break;
            default: b = ++natural_rank <= form_cutoff ? Band::Form : Band::Waviness; break;
        }
        if (b == band) out.push_back(i);
    }
    return out;
}

std::vector<int> significant_modes(const ModalSignature& signature, int k) {
    const int n = static_cast<int>(signature.coefficients.size());
    if (k < 0 || k > n) {
        throw InvalidParameter("significant_modes: k must lie in 0.." + std::to_string(n));
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    const auto& c = signature.coefficients;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::abs(c[a]) > std::abs(c[b]); });
    order.resize(k);
    return order;
}

}  // namespace modalform
