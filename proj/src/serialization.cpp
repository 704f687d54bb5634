#include "modalform/serialization.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "modalform/error.hpp"

namespace modalform {
namespace {

template <typename F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Json::exception& e) {
        throw InvalidInput(std::string(what) + ": " + e.what());
    }
}

Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const Json& j) {
    if (!j.is_array() || j.size() != 3) throw InvalidInput("expected a 3-vector");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Json vector_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(x);
    return a;
}

Eigen::VectorXd vector_from(const Json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

Json geometry_params_to_json(const GeometryParams& params) {
    if (const auto* pp = std::get_if<ProfileParams>(&params)) {
        return {{"kind", "profile"}, {"length", pp->length}, {"node_count", pp->node_count}};
    }
    const auto& cp = std::get<CapParams>(params);
    return {{"kind", "spherical_cap"},
            {"radius", cp.radius},
            {"half_angle", cp.half_angle},
            {"node_count", cp.node_count}};
}

GeometryParams geometry_params_from_json(const Json& j) {
    return guarded("geometry params", [&]() -> GeometryParams {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "profile") {
            return ProfileParams{j.at("length").get<double>(), j.at("node_count").get<int>()};
        }
        if (kind == "spherical_cap") {
            return CapParams{j.at("radius").get<double>(), j.at("half_angle").get<double>(),
                             j.at("node_count").get<int>()};
        }
        throw InvalidInput("geometry params: unknown kind '" + kind + "'");
    });
}

Json to_json(const Geometry& g) {
    Json nodes = Json::array(), normals = Json::array(), elements = Json::array();
    for (const auto& x : g.nodes()) nodes.push_back(vec3_json(x));
    for (const auto& n : g.normals()) normals.push_back(vec3_json(n));
    for (const auto& s : g.segments()) elements.push_back({s[0], s[1]});
    for (const auto& t : g.triangles()) elements.push_back({t[0], t[1], t[2]});
    Json params = geometry_params_to_json(g.params());
    const std::string kind = params["kind"];
    params.erase("kind");
    return {{"kind", kind},
            {"params", params},
            {"nodes", nodes},
            {"normals", normals},
            {"elements", elements}};
}

Geometry geometry_from_json(const Json& j) {
    return guarded("geometry", [&] {
        Json params = j.at("params");
        params["kind"] = j.at("kind");
        GeometryParams gp = geometry_params_from_json(params);
        std::vector<Vec3> nodes, normals;
        for (const auto& x : j.at("nodes")) nodes.push_back(vec3_from(x));
        for (const auto& n : j.at("normals")) normals.push_back(vec3_from(n));
        std::vector<std::array<int, 2>> segments;
        std::vector<std::array<int, 3>> triangles;
        const bool profile = std::holds_alternative<ProfileParams>(gp);
        for (const auto& e : j.at("elements")) {
            if (profile && e.size() == 2) {
                segments.push_back({e[0].get<int>(), e[1].get<int>()});
            } else if (!profile && e.size() == 3) {
                triangles.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>()});
            } else {
                throw InvalidInput("geometry: element arity does not match the geometry kind");
            }
        }
        return Geometry::from_parts(std::move(gp), std::move(nodes), std::move(normals),
                                    std::move(segments), std::move(triangles));
    });
}

Json to_json(const ModalBasis& b) {
    Json modes = Json::array();
    for (int r = 0; r < b.dof(); ++r) {
        Json row = Json::array();
        for (int c = 0; c < b.size(); ++c) row.push_back(b.modes(r, c));
        modes.push_back(std::move(row));
    }
    Json classes = Json::array();
    for (auto c : b.mode_class) classes.push_back(to_string(c));
    return {{"geometry_ref", b.geometry_ref},
            {"norm_kind", to_string(b.norm_kind)},
            {"eigenvalues", vector_json(b.eigenvalues)},
            {"mode_class", classes},
            {"inf_norms", vector_json(b.inf_norms)},
            {"modes", modes}};
}

ModalBasis basis_from_json(const Json& j) {
    return guarded("modal basis", [&] {
        ModalBasis b;
        b.geometry_ref = j.at("geometry_ref").get<std::string>();
        b.norm_kind = norm_kind_from_string(j.at("norm_kind").get<std::string>());
        b.eigenvalues = vector_from(j.at("eigenvalues"));
        for (const auto& c : j.at("mode_class")) b.mode_class.push_back(mode_class_from_string(c));
        b.inf_norms = vector_from(j.at("inf_norms"));
        const auto& rows = j.at("modes");
        const auto p = static_cast<Eigen::Index>(rows.size());
        const auto n = p > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
        b.modes.resize(p, n);
        for (Eigen::Index r = 0; r < p; ++r) {
            if (static_cast<Eigen::Index>(rows[r].size()) != n) {
                throw InvalidInput("modal basis: ragged mode matrix at row " + std::to_string(r));
            }
            for (Eigen::Index c = 0; c < n; ++c) b.modes(r, c) = rows[r][c].get<double>();
        }
        b.validate();
        return b;
    });
}

Json to_json(const ModalSignature& sig, const ModalBasis& basis, const std::vector<double>* e_curve) {
    Json classes = Json::array();
    for (auto c : basis.mode_class) classes.push_back(to_string(c));
    Json j = {{"basis_ref", sig.basis_ref},
              {"geometry_ref", basis.geometry_ref},
              {"coefficients", vector_json(sig.coefficients)},
              {"condition_number", sig.condition_number},
              {"mode_class", classes},
              {"eigenvalues", vector_json(basis.eigenvalues)}};
    if (sig.warning) j["warning"] = *sig.warning;
    if (e_curve) j["e_curve"] = *e_curve;
    return j;
}

ModalSignature signature_from_json(const Json& j) {
    return guarded("signature", [&] {
        ModalSignature sig;
        sig.basis_ref = j.at("basis_ref").get<std::string>();
        sig.coefficients = vector_from(j.at("coefficients"));
        sig.condition_number = j.at("condition_number").get<double>();
        if (j.contains("warning")) sig.warning = j["warning"].get<std::string>();
        if (!sig.coefficients.allFinite()) throw InvalidInput("signature: non-finite coefficient");
        return sig;
    });
}

Json to_json(const MeasurementPlan& plan) {
    Json pts = Json::array();
    for (const auto& p : plan.ordered_points) {
        pts.push_back({{"node", p.node},
                       {"position", vec3_json(p.position)},
                       {"approach", vec3_json(p.approach)}});
    }
    return {{"geometry_ref", plan.geometry_ref},
            {"geometry", geometry_params_to_json(plan.geometry_params)},
            {"method", to_string(plan.method)},
            {"tour_length", plan.tour_length},
            {"two_opt_passes", plan.two_opt_passes},
            {"converged", plan.converged},
            {"ordered_points", pts}};
}

MeasurementPlan plan_from_json(const Json& j) {
    return guarded("measurement plan", [&] {
        MeasurementPlan plan;
        plan.geometry_ref = j.at("geometry_ref").get<std::string>();
        plan.geometry_params = geometry_params_from_json(j.at("geometry"));
        plan.method = tour_method_from_string(j.at("method").get<std::string>());
        plan.tour_length = j.at("tour_length").get<double>();
        plan.two_opt_passes = j.value("two_opt_passes", 0);
        plan.converged = j.value("converged", true);
        for (const auto& p : j.at("ordered_points")) {
            plan.ordered_points.push_back(
                {p.at("node").get<int>(), vec3_from(p.at("position")), vec3_from(p.at("approach"))});
        }
        plan.validate();
        return plan;
    });
}

Json to_json(const SweepResult& s) {
    Json grid = Json::array(), se = Json::array();
    for (Eigen::Index i = 0; i < s.rms_grid.rows(); ++i) {
        Json row = Json::array(), row_se = Json::array();
        for (Eigen::Index k = 0; k < s.rms_grid.cols(); ++k) {
            row.push_back(std::isnan(s.rms_grid(i, k)) ? Json() : Json(s.rms_grid(i, k)));
            row_se.push_back(std::isnan(s.rms_stderr(i, k)) ? Json() : Json(s.rms_stderr(i, k)));
        }
        grid.push_back(std::move(row));
        se.push_back(std::move(row_se));
    }
    return {{"complexities", s.complexities},
            {"sample_counts", s.sample_counts},
            {"trials_per_cell", s.trials_per_cell},
            {"rng_seed", s.rng_seed},
            {"rms_grid_mm", grid},
            {"rms_stderr_mm", se}};
}

std::string signature_csv(const ModalSignature& sig, const ModalBasis& basis) {
    std::ostringstream os;
    os << "mode_index,class,eigenvalue,lambda_mm\n";
    for (int i = 0; i < basis.size(); ++i) {
        os << (i + 1) << "," << to_string(basis.mode_class[i]) << ","
           << format_double(basis.eigenvalues[i]) << "," << format_double(sig.coefficients[i])
           << "\n";
    }
    return os.str();
}

std::string e_curve_csv(const std::vector<double>& e_curve) {
    std::ostringstream os;
    os << "modes,e_mm\n";
    for (std::size_t m = 0; m < e_curve.size(); ++m) {
        os << (m + 1) << "," << format_double(e_curve[m]) << "\n";
    }
    return os.str();
}

std::string field_csv(const DeviationField& field) {
    std::ostringstream os;
    os << "node_index,deviation_mm\n";
    for (int k = 0; k < field.sample.count(); ++k) {
        os << field.sample.indices()[k] << "," << format_double(field.values[k]) << "\n";
    }
    return os.str();
}

std::string sweep_csv(const SweepResult& s) {
    std::ostringstream os;
    os << "complexity,sample_count,rms_mm,rms_stderr_mm,trials\n";
    for (std::size_t i = 0; i < s.complexities.size(); ++i) {
        for (std::size_t k = 0; k < s.sample_counts.size(); ++k) {
            const auto ii = static_cast<Eigen::Index>(i), kk = static_cast<Eigen::Index>(k);
            os << s.complexities[i] << "," << s.sample_counts[k] << ",";
            if (s.missing(static_cast<int>(i), static_cast<int>(k))) {
                os << "NA,NA,";
            } else {
                os << format_double(s.rms_grid(ii, kk)) << ","
                   << format_double(s.rms_stderr(ii, kk)) << ",";
            }
            os << s.trials_per_cell << "\n";
        }
    }
    return os.str();
}

std::string interpolation_csv(const Geometry& geometry, const DeviationField& degraded,
                              const DeviationField& interpolated,
                              const std::optional<DeviationField>& dense) {
    std::ostringstream os;
    os << "node_index,x_mm,y_mm,z_mm,measured_mm,interpolated_mm";
    if (dense) os << ",dense_mm";
    os << "\n";
    const auto& sampled = degraded.sample.indices();
    for (int i = 0; i < geometry.node_count(); ++i) {
        const auto& x = geometry.nodes()[i];
        os << i << "," << format_double(x.x()) << "," << format_double(x.y()) << ","
           << format_double(x.z()) << ",";
        const auto it = std::lower_bound(sampled.begin(), sampled.end(), i);
        if (it != sampled.end() && *it == i) os << format_double(degraded.values[it - sampled.begin()]);
        os << "," << format_double(interpolated.values[i]);
        if (dense) os << "," << format_double(dense->values[i]);
        os << "\n";
    }
    return os.str();
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::ostringstream os;
    os << in.rdbuf();
    if (in.bad()) throw IoError("error while reading " + path.string());
    return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("error while writing " + path.string());
}

Json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    write_text_file(path, j.dump(1) + "\n");
}

}  // namespace modalform
