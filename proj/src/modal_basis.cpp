#include "modalform/modal_basis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "modalform/error.hpp"

namespace modalform {
namespace {

constexpr double kRigidRatio = 1e-8;
constexpr int kRigidSearchWindow = 8;

void append_bytes(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
}

// Largest-magnitude entry made positive; the first such entry wins ties.
void orient_column(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    if (v[at] < 0.0) v = -v;
}

OperatorPair assemble_beam(const Geometry& g) {
    const int p = g.node_count();
    const auto& nodes = g.nodes();
    std::vector<double> h(g.segments().size());
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t e = 0; e < g.segments().size(); ++e) {
        const auto [a, b] = g.segments()[e];
        if (a != static_cast<int>(e) || b != a + 1) {
            throw AssemblyError("assemble_operators: profile segments must chain consecutive nodes");
        }
        h[e] = (nodes[b] - nodes[a]).norm();
        if (!(h[e] > 0.0)) {
            throw AssemblyError("assemble_operators: segment " + std::to_string(e) +
                                " has zero length");
        }
        mass(a, a) += h[e] / 2;
        mass(b, b) += h[e] / 2;
    }
    // Condensing the Hermite rotations minimizes bending energy over them,
    // which leaves the natural cubic spline energy (Dw)^T H^-1 (Dw): D takes
    // second differences at interior nodes, H is the spline moment matrix.
    // This form annihilates constant and linear fields exactly, where the
    // explicit Schur complement loses them to rounding as p grows.
    const int m = p - 2;
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(p, p);
    if (m > 0) {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, p);
        Eigen::MatrixXd moments = Eigen::MatrixXd::Zero(m, m);
        for (int r = 0; r < m; ++r) {
            const double hl = h[r], hr = h[r + 1];
            d(r, r) = 1.0 / hl;
            d(r, r + 1) = -1.0 / hl - 1.0 / hr;
            d(r, r + 2) = 1.0 / hr;
            moments(r, r) = (hl + hr) / 3.0;
            if (r + 1 < m) moments(r, r + 1) = moments(r + 1, r) = hr / 6.0;
        }
        Eigen::LLT<Eigen::MatrixXd> llt(moments);
        if (llt.info() != Eigen::Success) {
            throw AssemblyError("assemble_operators: spline moment matrix is not positive definite");
        }
        Eigen::MatrixXd half = llt.matrixL().solve(d);
        k = half.transpose() * half;
        k = 0.5 * (k + k.transpose()).eval();
        return {std::move(k), std::move(mass), g.ref(), std::move(half)};
    }
    return {std::move(k), std::move(mass), g.ref(), {}};
}

OperatorPair assemble_laplacian(const Geometry& g) {
    const int p = g.node_count();
    const auto& x = g.nodes();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd area = Eigen::VectorXd::Zero(p);
    const auto& cp = std::get<CapParams>(g.params());
    const double area_floor = 1e-14 * cp.radius * cp.radius;
    for (std::size_t e = 0; e < g.triangles().size(); ++e) {
        const auto& t = g.triangles()[e];
        const double twice_area = (x[t[1]] - x[t[0]]).cross(x[t[2]] - x[t[0]]).norm();
        if (!(twice_area / 2 > area_floor)) {
            throw AssemblyError("assemble_operators: triangle " + std::to_string(e) + " (" +
                                std::to_string(t[0]) + "," + std::to_string(t[1]) + "," +
                                std::to_string(t[2]) + ") is degenerate");
        }
        double cot[3];
        bool obtuse_at[3];
        for (int c = 0; c < 3; ++c) {
            const Vec3 u = x[t[(c + 1) % 3]] - x[t[c]];
            const Vec3 v = x[t[(c + 2) % 3]] - x[t[c]];
            cot[c] = u.dot(v) / twice_area;
            obtuse_at[c] = u.dot(v) < 0.0;
        }
        for (int c = 0; c < 3; ++c) {
            // Corner c is opposite edge (i, j).
            const int i = t[(c + 1) % 3], j = t[(c + 2) % 3];
            const double w = 0.5 * cot[c];
            k(i, j) -= w;
            k(j, i) -= w;
            k(i, i) += w;
            k(j, j) += w;
        }
        const double tri_area = twice_area / 2;
        if (obtuse_at[0] || obtuse_at[1] || obtuse_at[2]) {
            for (int c = 0; c < 3; ++c) area[t[c]] += obtuse_at[c] ? tri_area / 2 : tri_area / 4;
        } else {
            for (int c = 0; c < 3; ++c) {
                const int i = t[c], j = t[(c + 1) % 3], l = t[(c + 2) % 3];
                // Voronoi region of corner c: edges to j and l weighted by the opposite cotangents.
                area[i] += ((x[j] - x[i]).squaredNorm() * cot[(c + 2) % 3] +
                            (x[l] - x[i]).squaredNorm() * cot[(c + 1) % 3]) / 8.0;
            }
        }
    }
    for (int i = 0; i < p; ++i) {
        if (!(area[i] > 0.0)) {
            throw AssemblyError("assemble_operators: node " + std::to_string(i) +
                                " belongs to no triangle");
        }
    }
    return {std::move(k), area.asDiagonal().toDenseMatrix(), g.ref()};
}

ModalBasis take_columns(const ModalBasis& b, int count) {
    ModalBasis out;
    out.geometry_ref = b.geometry_ref;
    out.modes = b.modes.leftCols(count);
    out.eigenvalues = b.eigenvalues.head(count);
    out.mode_class.assign(b.mode_class.begin(), b.mode_class.begin() + count);
    out.norm_kind = b.norm_kind;
    out.inf_norms = b.inf_norms.head(count);
    return out;
}

}  // namespace

const char* to_string(ModeClass c) noexcept {
    switch (c) {
        case ModeClass::Rigid: return "rigid";
        case ModeClass::Size: return "size";
        case ModeClass::Natural: return "natural";
    }
    return "natural";
}

const char* to_string(NormKind k) noexcept {
    return k == NormKind::Infinity ? "infinity" : "euclidean";
}

ModeClass mode_class_from_string(const std::string& s) {
    if (s == "rigid") return ModeClass::Rigid;
    if (s == "size") return ModeClass::Size;
    if (s == "natural") return ModeClass::Natural;
    throw InvalidInput("unknown mode class '" + s + "'");
}

NormKind norm_kind_from_string(const std::string& s) {
    if (s == "infinity") return NormKind::Infinity;
    if (s == "euclidean") return NormKind::Euclidean;
    throw InvalidInput("unknown norm kind '" + s + "'");
}

double inverse_condition(const Eigen::MatrixXd& columns) {
    if (columns.cols() == 0) return 1.0;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(columns);
    const auto& s = svd.singularValues();
    if (s.size() < columns.cols() || s[0] == 0.0) return 0.0;
    return s[s.size() - 1] / s[0];
}

std::string ModalBasis::ref() const {
    std::uint64_t h = 1469598103934665603ULL;
    append_bytes(h, geometry_ref.data(), geometry_ref.size());
    const int kind = static_cast<int>(norm_kind);
    append_bytes(h, &kind, sizeof kind);
    for (auto c : mode_class) {
        const int v = static_cast<int>(c);
        append_bytes(h, &v, sizeof v);
    }
    const Eigen::Index rows = modes.rows(), cols = modes.cols();
    append_bytes(h, &rows, sizeof rows);
    append_bytes(h, &cols, sizeof cols);
    append_bytes(h, modes.data(), sizeof(double) * static_cast<std::size_t>(modes.size()));
    std::ostringstream os;
    os << "basis:" << std::hex << h << "@" << geometry_ref;
    return os.str();
}

int ModalBasis::count(ModeClass c) const {
    return static_cast<int>(std::count(mode_class.begin(), mode_class.end(), c));
}

void ModalBasis::validate() const {
    const int n = size();
    const int p = dof();
    if (n < 1) throw InvalidInput("modal basis: no modes");
    if (n > p) throw InvalidInput("modal basis: more modes than degrees of freedom");
    if (eigenvalues.size() != n || static_cast<int>(mode_class.size()) != n ||
        inf_norms.size() != n) {
        throw InvalidInput("modal basis: per-mode field lengths disagree with mode count");
    }
    if (!modes.allFinite() || !eigenvalues.allFinite() || !inf_norms.allFinite()) {
        throw InvalidInput("modal basis: non-finite entries");
    }
    const double scale = std::max(1.0, eigenvalues.cwiseAbs().maxCoeff());
    for (int i = 1; i < n; ++i) {
        if (eigenvalues[i] < eigenvalues[i - 1] - 1e-9 * scale) {
            throw InvalidInput("modal basis: eigenvalues not ascending at mode " +
                               std::to_string(i));
        }
    }
    for (int i = 0; i < n; ++i) {
        const double norm = norm_kind == NormKind::Infinity ? modes.col(i).cwiseAbs().maxCoeff()
                                                            : modes.col(i).norm();
        const double tol = norm_kind == NormKind::Infinity ? 1e-12 : 1e-10;
        if (std::abs(norm - 1.0) > tol) {
            throw InvalidInput("modal basis: column " + std::to_string(i) + " is not " +
                               to_string(norm_kind) + "-normalized");
        }
        if (!(inf_norms[i] > 0.0)) {
            throw InvalidInput("modal basis: non-positive inf_norm at mode " + std::to_string(i));
        }
    }
    const double rcond = inverse_condition(modes);
    if (!(rcond > 1e-10)) {
        throw InvalidInput("modal basis: columns are not linearly independent (1/cond = " +
                           std::to_string(rcond) + ")");
    }
}

OperatorPair assemble_operators(const Geometry& geometry) {
    return geometry.kind() == GeometryKind::Profile1D ? assemble_beam(geometry)
                                                      : assemble_laplacian(geometry);
}

RigidDetection detect_rigid_modes(const Eigen::VectorXd& ev) {
    RigidDetection out;
    const int window = std::min<int>(kRigidSearchWindow, static_cast<int>(ev.size()));
    if (window < 2) return out;
    const double floor = std::numeric_limits<double>::epsilon() *
                         std::max(1e-300, ev.cwiseAbs().maxCoeff());
    int split = 0;
    double best = 0.0;
    for (int k = 1; k < window; ++k) {
        const double ratio = std::abs(ev[k]) / std::max(std::abs(ev[k - 1]), floor);
        if (ratio > best) {
            best = ratio;
            split = k;
        }
    }
    out.tolerance = kRigidRatio * std::abs(ev[split]);
    for (int i = 0; i < split; ++i) {
        if (ev[i] <= out.tolerance) ++out.count;
    }
    return out;
}

ModalBasis solve_modes(const OperatorPair& ops, int n) {
    const auto p = ops.stiffness.rows();
    if (ops.stiffness.cols() != p || ops.mass.rows() != p || ops.mass.cols() != p) {
        throw InvalidInput("solve_modes: operator dimensions disagree");
    }
    if (n < 1 || n > p) {
        throw InvalidParameter("solve_modes: n must lie in 1.." + std::to_string(p));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(ops.mass);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> mass_eig(ops.mass,
                                                                Eigen::EigenvaluesOnly);
        std::ostringstream os;
        os << "solve_modes: mass matrix is not positive definite (eigenvalue range ["
           << mass_eig.eigenvalues().minCoeff() << ", " << mass_eig.eigenvalues().maxCoeff()
           << "])";
        throw NumericalError(os.str());
    }
    Eigen::VectorXd all;
    Eigen::MatrixXd vectors;
    const bool diagonal_mass = ops.mass.isDiagonal(0.0);
    if (ops.stiffness_factor.size() > 0 && ops.stiffness_factor.cols() == p && diagonal_mass) {
        // K x = lambda M x with K = B^T B and M = D^2 becomes the SVD of B D^-1.
        const Eigen::VectorXd inv_sqrt_mass = ops.mass.diagonal().cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd c = ops.stiffness_factor * inv_sqrt_mass.asDiagonal();
        Eigen::BDCSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeFullV);
        const Eigen::VectorXd& sigma = svd.singularValues();  // descending
        const auto rank_slots = sigma.size();
        all = Eigen::VectorXd::Zero(p);
        vectors.resize(p, p);
        // Columns beyond the singular values span the exact null space of B.
        for (Eigen::Index j = 0; j < p - rank_slots; ++j) {
            vectors.col(j) = inv_sqrt_mass.asDiagonal() * svd.matrixV().col(rank_slots + j);
        }
        for (Eigen::Index j = 0; j < rank_slots; ++j) {
            const Eigen::Index src = rank_slots - 1 - j;
            all[p - rank_slots + j] = sigma[src] * sigma[src];
            vectors.col(p - rank_slots + j) = inv_sqrt_mass.asDiagonal() * svd.matrixV().col(src);
        }
    } else {
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(
            ops.stiffness, ops.mass, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
        if (ges.info() != Eigen::Success) {
            throw NumericalError("solve_modes: generalized eigen solver did not converge (p = " +
                                 std::to_string(p) + ")");
        }
        all = ges.eigenvalues();
        vectors = ges.eigenvectors();
    }
    const RigidDetection rigid = detect_rigid_modes(all);

    ModalBasis b;
    b.geometry_ref = ops.geometry_ref;
    b.norm_kind = NormKind::Euclidean;
    b.modes = vectors.leftCols(n);
    b.eigenvalues = all.head(n);
    b.inf_norms.resize(n);
    b.mode_class.resize(n);
    for (int i = 0; i < n; ++i) {
        auto col = b.modes.col(i);
        col.normalize();
        orient_column(col);
        b.inf_norms[i] = col.cwiseAbs().maxCoeff();
        b.mode_class[i] = i < rigid.count ? ModeClass::Rigid : ModeClass::Natural;
    }
    return b;
}

std::vector<TaggedField> rigid_and_size_fields(const Geometry& geometry) {
    const int p = geometry.node_count();
    const auto& x = geometry.nodes();
    const auto& nrm = geometry.normals();
    const Vec3 center = geometry.reference_point();
    const double drop_below = 1e-9 * std::sqrt(static_cast<double>(p));
    static const char* axes[3] = {"x", "y", "z"};

    std::vector<TaggedField> out;
    auto keep = [&](Eigen::VectorXd f, ModeClass tag, std::string label) {
        if (f.norm() >= drop_below) out.push_back({std::move(f), tag, std::move(label)});
    };
    for (int a = 0; a < 3; ++a) {
        const Vec3 t = Vec3::Unit(a);
        Eigen::VectorXd f(p);
        for (int i = 0; i < p; ++i) f[i] = nrm[i].dot(t);
        keep(std::move(f), ModeClass::Rigid, std::string("translation_") + axes[a]);
    }
    for (int a = 0; a < 3; ++a) {
        const Vec3 w = Vec3::Unit(a);
        Eigen::VectorXd f(p);
        for (int i = 0; i < p; ++i) f[i] = w.cross(x[i] - center).dot(nrm[i]);
        keep(std::move(f), ModeClass::Rigid, std::string("rotation_") + axes[a]);
    }
    if (geometry.kind() == GeometryKind::SphericalCap) {
        keep(Eigen::VectorXd::Ones(p), ModeClass::Size, "size");
    }
    return out;
}

ModalBasis enrich_basis(const ModalBasis& natural, std::span<const TaggedField> extra_fields) {
    if (extra_fields.empty()) return natural;
    const int p = natural.dof();
    std::vector<const TaggedField*> ordered;
    for (const auto& f : extra_fields) {
        if (f.values.size() != p) {
            throw InvalidInput("enrich_basis: field '" + f.label + "' has wrong length");
        }
        if (f.tag == ModeClass::Natural) {
            throw InvalidInput("enrich_basis: injected field '" + f.label +
                               "' must be tagged rigid or size");
        }
        if (f.tag == ModeClass::Rigid) ordered.push_back(&f);
    }
    for (const auto& f : extra_fields) {
        if (f.tag == ModeClass::Size) ordered.push_back(&f);
    }
    const int k = static_cast<int>(ordered.size());
    if (k > 0) {
        Eigen::MatrixXd extras(p, k);
        for (int j = 0; j < k; ++j) extras.col(j) = ordered[j]->values;
        if (!(inverse_condition(extras) > 1e-10)) {
            throw InvalidInput("enrich_basis: injected fields are linearly dependent");
        }
    }

    std::vector<Eigen::VectorXd> cols;
    std::vector<double> eig;
    std::vector<ModeClass> cls;
    Eigen::MatrixXd onb(p, k + natural.size());
    int onb_cols = 0;
    auto project_out = [&](Eigen::VectorXd v) {
        for (int pass = 0; pass < 2; ++pass) {
            if (onb_cols > 0) v -= onb.leftCols(onb_cols) * (onb.leftCols(onb_cols).transpose() * v);
        }
        return v;
    };
    for (const auto* f : ordered) {
        Eigen::VectorXd r = project_out(f->values);
        onb.col(onb_cols++) = r / r.norm();
        cols.push_back(f->values);
        eig.push_back(0.0);
        cls.push_back(f->tag);
    }
    for (int i = 0; i < natural.size(); ++i) {
        const Eigen::VectorXd v = natural.modes.col(i);
        Eigen::VectorXd r = project_out(v);
        const double rn = r.norm();
        if (rn < 1e-8 * v.norm()) continue;
        onb.col(onb_cols++) = r / rn;
        cols.push_back(std::move(r));
        eig.push_back(natural.eigenvalues[i]);
        cls.push_back(natural.mode_class[i]);
    }

    const int n = static_cast<int>(cols.size());
    if (n > p) throw InvalidInput("enrich_basis: enriched basis exceeds the dof count");
    ModalBasis out;
    out.geometry_ref = natural.geometry_ref;
    out.norm_kind = NormKind::Euclidean;
    out.modes.resize(p, n);
    out.eigenvalues.resize(n);
    out.inf_norms.resize(n);
    out.mode_class = std::move(cls);
    for (int j = 0; j < n; ++j) {
        out.modes.col(j) = cols[j] / cols[j].norm();
        out.eigenvalues[j] = eig[j];
        out.inf_norms[j] = out.modes.col(j).cwiseAbs().maxCoeff();
    }
    return natural.norm_kind == NormKind::Infinity ? renormalize(out, NormKind::Infinity) : out;
}

ModalBasis renormalize(const ModalBasis& basis, NormKind kind) {
    ModalBasis out = basis;
    out.norm_kind = kind;
    for (int i = 0; i < basis.size(); ++i) {
        auto col = out.modes.col(i);
        const double inf = col.cwiseAbs().maxCoeff();
        if (!(inf > 0.0)) {
            throw InvalidInput("renormalize: column " + std::to_string(i) + " is zero");
        }
        if (kind == NormKind::Infinity) {
            col /= inf;
            out.inf_norms[i] = basis.norm_kind == NormKind::Infinity ? basis.inf_norms[i] * inf
                                                                     : inf;
        } else {
            col /= col.norm();
            out.inf_norms[i] = col.cwiseAbs().maxCoeff();
        }
    }
    return out;
}

ModalBasis build_modal_basis(const Geometry& geometry, const BasisOptions& options) {
    const int p = geometry.node_count();
    if (options.modes < 1 || options.modes > p) {
        throw InvalidParameter("build_modal_basis: mode count must lie in 1.." + std::to_string(p));
    }
    const OperatorPair ops = assemble_operators(geometry);
    if (!options.enrich) {
        return renormalize(solve_modes(ops, options.modes), options.norm);
    }
    const ModalBasis all = solve_modes(ops, p);
    const auto extras = rigid_and_size_fields(geometry);
    int natural_count = std::min(p, options.modes);
    while (true) {
        ModalBasis enriched = enrich_basis(take_columns(all, natural_count), extras);
        if (enriched.size() >= options.modes) {
            return renormalize(take_columns(enriched, options.modes), options.norm);
        }
        if (natural_count == p) {
            throw InvalidParameter("build_modal_basis: cannot reach " +
                                   std::to_string(options.modes) + " independent modes");
        }
        natural_count = std::min(p, natural_count + options.modes - enriched.size());
    }
}

}  // namespace modalform
