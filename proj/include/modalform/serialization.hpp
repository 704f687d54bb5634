#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "modalform/decomposition.hpp"
#include "modalform/geometry.hpp"
#include "modalform/interpolation.hpp"
#include "modalform/metrology_plan.hpp"
#include "modalform/modal_basis.hpp"

namespace modalform {

using Json = nlohmann::json;

Json geometry_params_to_json(const GeometryParams& params);
GeometryParams geometry_params_from_json(const Json& j);

Json to_json(const Geometry& geometry);
Geometry geometry_from_json(const Json& j);

/// Modes are stored row-major (p rows of n values). Loading validates.
Json to_json(const ModalBasis& basis);
ModalBasis basis_from_json(const Json& j);

Json to_json(const ModalSignature& sig, const ModalBasis& basis,
             const std::vector<double>* e_curve = nullptr);
ModalSignature signature_from_json(const Json& j);

Json to_json(const MeasurementPlan& plan);
MeasurementPlan plan_from_json(const Json& j);

Json to_json(const SweepResult& sweep);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

std::string signature_csv(const ModalSignature& sig, const ModalBasis& basis);
std::string e_curve_csv(const std::vector<double>& e_curve);
/// node_index,deviation_mm over the sampled nodes.
std::string field_csv(const DeviationField& field);
std::string sweep_csv(const SweepResult& sweep);
/// Per-node comparison of a dense field, the degraded samples and the interpolation.
std::string interpolation_csv(const Geometry& geometry, const DeviationField& degraded,
                              const DeviationField& interpolated,
                              const std::optional<DeviationField>& dense);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace modalform
