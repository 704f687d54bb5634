#include "modalform/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "modalform/error.hpp"
#include "modalform/ingest.hpp"

namespace modalform {
namespace fs = std::filesystem;

namespace {

std::shared_ptr<spdlog::logger> logger() {
    static auto log = [] {
        auto l = spdlog::stderr_logger_mt("modalform");
        l->set_pattern("modalform [%l] %v");
        const char* env = std::getenv("MODALFORM_LOG");
        l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
        return l;
    }();
    return log;
}

void reject_unknown(const Json& section, const char* name, std::initializer_list<const char*> keys) {
    if (!section.is_object()) throw ConfigError(std::string("config: '") + name + "' must be an object");
    for (const auto& [k, _] : section.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* key) { return k == key; })) {
            throw ConfigError(std::string("config: unknown key '") + name + "." + k + "'");
        }
    }
}

Geometry load_geometry(const PipelineConfig& cfg) {
    if (cfg.geometry_file) return geometry_from_json(read_json_file(*cfg.geometry_file));
    return build_geometry(cfg.geometry);
}

ModalBasis load_basis(const PipelineConfig& cfg, const Geometry& geometry) {
    ModalBasis basis = basis_from_json(read_json_file(cfg.input_or_default(cfg.basis_path, "basis.json")));
    if (basis.geometry_ref != geometry.ref()) {
        throw InvalidInput("basis geometry " + basis.geometry_ref +
                           " does not match configured geometry " + geometry.ref());
    }
    return basis;
}

DeviationField load_measurement(const PipelineConfig& cfg, const Geometry& geometry) {
    const fs::path path = cfg.input_or_default(cfg.measurement_path, "measurement.csv");
    if (!fs::exists(path)) throw IoError("measurement file " + path.string() + " not found");
    IngestResult r = ingest_point_cloud(path, geometry);
    if (r.duplicate_rows > 0) {
        logger()->warn("{}: {} duplicate node row(s), last value kept", path.string(), r.duplicate_rows);
    }
    return std::move(r.field);
}

SampleSet configured_sample(const PipelineConfig& cfg, const Geometry& geometry) {
    if (cfg.sample_q == 0 || cfg.sample_q == geometry.node_count()) return SampleSet::full(geometry);
    return uniform_subsample(geometry, cfg.sample_q, cfg.sample_seed);
}

fs::path out(const PipelineConfig& cfg, const char* name) { return cfg.output_dir / name; }

void cmd_plan(const PipelineConfig& cfg) {
    const Geometry geometry = load_geometry(cfg);
    const MeasurementPlan plan =
        plan_measurement(geometry, configured_sample(cfg, geometry), cfg.tour_method, cfg.max_passes);
    if (!plan.converged) {
        logger()->warn("2-opt stopped at the pass bound ({}) before reaching a local optimum",
                       cfg.max_passes);
    }
    write_json_file(out(cfg, "geometry.json"), to_json(geometry));
    write_json_file(out(cfg, "plan.json"), to_json(plan));
    write_text_file(out(cfg, "plan.dmis"), emit_dmis(plan, cfg.feature_name));
    logger()->info("plan: {} points, tour length {:.6f} mm", plan.ordered_points.size(), plan.tour_length);
}

Eigen::VectorXd synthesize_true_field(const PipelineConfig& cfg, const Geometry& geometry) {
    const int p = geometry.node_count();
    const DefectSpec& d = cfg.defect;
    Eigen::VectorXd field = Eigen::VectorXd::Constant(p, d.size);
    int needed = d.random_complexity;
    for (const auto& m : d.modes) needed = std::max(needed, m.index);
    if (needed == 0) return field;
    if (needed > p) throw InvalidParameter("simulate: defect mode index exceeds node count");
    const ModalBasis natural =
        build_modal_basis(geometry, {needed, false, NormKind::Infinity});
    for (const auto& m : d.modes) {
        if (m.index < 1) throw InvalidParameter("simulate: defect mode indices are 1-based");
        field += m.amplitude * natural.modes.col(m.index - 1);
    }
    if (d.random_complexity > 0) {
        field += natural.modes * synthesize_defect(natural, d.random_complexity, d.random_range,
                                                   d.random_seed);
    }
    return field;
}

void cmd_simulate(const PipelineConfig& cfg) {
    const Geometry geometry = load_geometry(cfg);
    const MeasurementPlan plan =
        plan_from_json(read_json_file(cfg.input_or_default(cfg.plan_path, "plan.json")));
    if (plan.geometry_ref != geometry.ref()) {
        throw InvalidInput("plan geometry " + plan.geometry_ref + " does not match " + geometry.ref());
    }
    const DeviationField truth = DeviationField::full(geometry, synthesize_true_field(cfg, geometry));
    const DeviationField probed = simulate_probing(plan, truth, cfg.probe_noise_sigma, cfg.probe_seed);
    write_text_file(out(cfg, "true_field.csv"), field_csv(truth));
    write_text_file(out(cfg, "measurement.csv"), field_csv(probed));
    logger()->info("simulate: {} probed points, noise sigma {} mm", probed.sample.count(),
                   cfg.probe_noise_sigma);
}

void cmd_basis(const PipelineConfig& cfg) {
    const Geometry geometry = load_geometry(cfg);
    const ModalBasis basis =
        build_modal_basis(geometry, {cfg.basis_modes, cfg.enrich, NormKind::Infinity});
    write_json_file(out(cfg, "basis.json"), to_json(basis));
    logger()->info("basis: {} modes ({} rigid, {} size) over {} nodes", basis.size(),
                   basis.count(ModeClass::Rigid), basis.count(ModeClass::Size), basis.dof());
}

void cmd_decompose(const PipelineConfig& cfg) {
    const Geometry geometry = load_geometry(cfg);
    const ModalBasis basis = load_basis(cfg, geometry);
    const DeviationField measured = load_measurement(cfg, geometry);
    if (!measured.sample.is_full()) {
        throw InvalidInput("decompose: measurement covers " + std::to_string(measured.sample.count()) +
                           " of " + std::to_string(geometry.node_count()) +
                           " nodes; use 'interpolate' for degraded measurements");
    }
    const ModalSignature sig = decompose(measured, basis);
    if (sig.warning) logger()->warn("decompose: {}", *sig.warning);
    const ResidualReport report = residual_report(measured, sig, basis);
    write_json_file(out(cfg, "signature.json"), to_json(sig, basis, &report.e_curve));
    write_text_file(out(cfg, "signature.csv"), signature_csv(sig, basis));
    write_text_file(out(cfg, "e_curve.csv"), e_curve_csv(report.e_curve));
    write_text_file(out(cfg, "residual.csv"), field_csv(report.residual_field));
    logger()->info("decompose: e = {:.3e} mm with {} modes", report.e_curve.back(), basis.size());
}

void cmd_reconstruct(const PipelineConfig& cfg) {
    const Geometry geometry = load_geometry(cfg);
    const ModalBasis basis = load_basis(cfg, geometry);
    const ModalSignature sig =
        signature_from_json(read_json_file(cfg.input_or_default(cfg.signature_path, "signature.json")));
    std::set<int> selection;
    for (const auto& b : cfg.bands) {
        for (int i : band_filter(sig, basis, band_from_string(b), cfg.form_cutoff)) selection.insert(i);
    }
    for (int m : cfg.modes) selection.insert(m - 1);
    if (cfg.bands.empty() && cfg.modes.empty()) {
        for (int i = 0; i < basis.size(); ++i) selection.insert(i);
    }
    const std::vector<int> chosen(selection.begin(), selection.end());
    write_text_file(out(cfg, "reconstruction.csv"), field_csv(reconstruct(sig, basis, chosen)));
    logger()->info("reconstruct: {} modes selected", chosen.size());
}

void cmd_interpolate(const PipelineConfig& cfg) {
    const Geometry geometry = load_geometry(cfg);
    const ModalBasis basis = load_basis(cfg, geometry);
    DeviationField measured = load_measurement(cfg, geometry);
    std::optional<DeviationField> dense;
    if (measured.sample.is_full() && cfg.sample_q > 0 && cfg.sample_q < geometry.node_count()) {
        dense = measured;
        measured = measured.restrict_to(uniform_subsample(geometry, cfg.sample_q, cfg.sample_seed));
    }
    const int affordable = std::max(1, static_cast<int>(measured.sample.count() / kDefaultOversampling));
    const int max_modes =
        cfg.interpolate_max_modes > 0 ? cfg.interpolate_max_modes : std::min(basis.size(), affordable);
    const DegradedProjection proj = build_degraded_projection(basis, measured.sample, max_modes);
    const Interpolation interp = interpolate(measured, proj, basis);
    if (interp.coefficients.warning) logger()->warn("interpolate: {}", *interp.coefficients.warning);
    write_text_file(out(cfg, "interpolation.csv"),
                    interpolation_csv(geometry, measured, interp.field, dense));
    write_json_file(out(cfg, "interpolation_signature.json"), to_json(interp.coefficients, basis));
    logger()->info("interpolate: {} points, {} modes fitted, condition {:.3e}",
                   measured.sample.count(), proj.kept(), proj.condition_number);
}

void cmd_sweep(const PipelineConfig& cfg) {
    const Geometry geometry = load_geometry(cfg);
    SweepConfig sweep = cfg.sweep;
    if (!cfg.sweep_axes_given) {
        const SweepConfig defaults = default_sweep_config(geometry.node_count(), geometry.node_count());
        sweep.complexities = defaults.complexities;
        sweep.sample_counts = defaults.sample_counts;
    }
    int modes = cfg.basis_modes;
    for (int c : sweep.complexities) modes = std::max(modes, c);
    for (int q : sweep.sample_counts) {
        if (sweep.max_modes > 0) modes = std::max(modes, std::min(q, sweep.max_modes));
    }
    modes = std::min(modes, geometry.node_count());
    const ModalBasis basis = build_modal_basis(geometry, {modes, cfg.enrich, NormKind::Infinity});
    const SweepResult result = run_sweep(geometry, basis, sweep);
    write_text_file(out(cfg, "sweep.csv"), sweep_csv(result));
    write_json_file(out(cfg, "sweep.json"), to_json(result));
    logger()->info("sweep: {} x {} cells, {} trials each", result.complexities.size(),
                   result.sample_counts.size(), result.trials_per_cell);
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

}  // namespace

fs::path PipelineConfig::input_or_default(const std::optional<fs::path>& given,
                                          const char* default_name) const {
    return given ? *given : output_dir / default_name;
}

void PipelineConfig::validate() const {
    if (basis_modes < 1) throw ConfigError("config: basis.modes must be >= 1");
    if (form_cutoff < 0) throw ConfigError("config: basis.form_cutoff must be >= 0");
    if (sample_q < 0) throw ConfigError("config: sampling.q must be >= 0");
    if (max_passes < 1) throw ConfigError("config: plan.max_passes must be >= 1");
    if (probe_noise_sigma < 0) throw ConfigError("config: simulate.noise_sigma must be >= 0");
    if (interpolate_max_modes < 0) throw ConfigError("config: interpolate.max_modes must be >= 0");
    if (sweep.trials < 1) throw ConfigError("config: sweep.trials must be >= 1");
    if (sweep.noise_sigma < 0) throw ConfigError("config: sweep.noise_sigma must be >= 0");
    for (const auto& b : bands) band_from_string(b);
    for (int m : modes) {
        if (m < 1) throw ConfigError("config: reconstruct.modes are 1-based");
    }
    std::vector<fs::path> inputs;
    for (const auto* p : {&geometry_file, &basis_path, &measurement_path, &plan_path, &signature_path}) {
        if (*p) inputs.push_back(fs::absolute(**p).lexically_normal());
    }
    std::sort(inputs.begin(), inputs.end());
    if (std::adjacent_find(inputs.begin(), inputs.end()) != inputs.end()) {
        throw ConfigError("config: two input paths refer to the same file");
    }
}

PipelineConfig config_from_json(const Json& doc) {
    PipelineConfig cfg;
    try {
        reject_unknown(doc, "<root>", {"geometry", "basis", "sampling", "plan", "simulate",
                                       "reconstruct", "interpolate", "sweep", "paths"});
        if (doc.contains("geometry")) {
            if (!doc["geometry"].is_object()) throw ConfigError("config: geometry must be an object");
            // Partial geometry sections refine the default geometry of the same kind.
            Json g = geometry_params_to_json(cfg.geometry);
            if (doc["geometry"].contains("kind") && doc["geometry"]["kind"] != g["kind"]) g = Json::object();
            g.update(doc["geometry"]);
            if (g["kind"] == "profile") {
                reject_unknown(g, "geometry", {"kind", "length", "node_count"});
            } else {
                reject_unknown(g, "geometry", {"kind", "radius", "half_angle", "node_count"});
            }
            cfg.geometry = geometry_params_from_json(g);
        }
        if (doc.contains("basis")) {
            const Json& b = doc["basis"];
            reject_unknown(b, "basis", {"modes", "enrich", "form_cutoff"});
            cfg.basis_modes = b.value("modes", cfg.basis_modes);
            cfg.enrich = b.value("enrich", cfg.enrich);
            cfg.form_cutoff = b.value("form_cutoff", cfg.form_cutoff);
        }
        if (doc.contains("sampling")) {
            const Json& s = doc["sampling"];
            reject_unknown(s, "sampling", {"q", "seed"});
            cfg.sample_q = s.value("q", cfg.sample_q);
            cfg.sample_seed = s.value("seed", cfg.sample_seed);
        }
        if (doc.contains("plan")) {
            const Json& p = doc["plan"];
            reject_unknown(p, "plan", {"method", "feature_name", "max_passes"});
            if (p.contains("method")) cfg.tour_method = tour_method_from_string(p["method"]);
            cfg.feature_name = p.value("feature_name", cfg.feature_name);
            cfg.max_passes = p.value("max_passes", cfg.max_passes);
        }
        if (doc.contains("simulate")) {
            const Json& s = doc["simulate"];
            reject_unknown(s, "simulate", {"noise_sigma", "seed", "defect"});
            cfg.probe_noise_sigma = s.value("noise_sigma", cfg.probe_noise_sigma);
            cfg.probe_seed = s.value("seed", cfg.probe_seed);
            if (s.contains("defect")) {
                const Json& d = s["defect"];
                reject_unknown(d, "simulate.defect",
                               {"size", "modes", "random_complexity", "random_range", "random_seed"});
                cfg.defect.size = d.value("size", 0.0);
                cfg.defect.random_complexity = d.value("random_complexity", 0);
                cfg.defect.random_range = d.value("random_range", 0.0);
                cfg.defect.random_seed = d.value("random_seed", std::uint64_t{0});
                for (const auto& m : d.value("modes", Json::array())) {
                    cfg.defect.modes.push_back({m.at("index").get<int>(), m.at("amplitude").get<double>()});
                }
            }
        }
        if (doc.contains("reconstruct")) {
            const Json& r = doc["reconstruct"];
            reject_unknown(r, "reconstruct", {"bands", "modes"});
            cfg.bands = r.value("bands", std::vector<std::string>{});
            cfg.modes = r.value("modes", std::vector<int>{});
        }
        if (doc.contains("interpolate")) {
            const Json& i = doc["interpolate"];
            reject_unknown(i, "interpolate", {"max_modes"});
            cfg.interpolate_max_modes = i.value("max_modes", 0);
        }
        if (doc.contains("sweep")) {
            const Json& s = doc["sweep"];
            reject_unknown(s, "sweep", {"complexities", "sample_counts", "trials", "noise_sigma", "seed",
                                        "defect_range", "max_modes", "oversampling", "sample_seed", "threads"});
            const bool has_c = s.contains("complexities"), has_q = s.contains("sample_counts");
            if (has_c != has_q) throw ConfigError("config: sweep axes must be given together");
            cfg.sweep_axes_given = has_c;
            if (has_c) {
                cfg.sweep.complexities = s["complexities"].get<std::vector<int>>();
                cfg.sweep.sample_counts = s["sample_counts"].get<std::vector<int>>();
            }
            cfg.sweep.trials = s.value("trials", cfg.sweep.trials);
            cfg.sweep.noise_sigma = s.value("noise_sigma", cfg.sweep.noise_sigma);
            cfg.sweep.seed = s.value("seed", cfg.sweep.seed);
            cfg.sweep.defect_range = s.value("defect_range", cfg.sweep.defect_range);
            cfg.sweep.max_modes = s.value("max_modes", cfg.sweep.max_modes);
            cfg.sweep.oversampling = s.value("oversampling", cfg.sweep.oversampling);
            cfg.sweep.sample_seed = s.value("sample_seed", cfg.sweep.sample_seed);
            cfg.sweep.threads = s.value("threads", cfg.sweep.threads);
        }
        if (doc.contains("paths")) {
            const Json& p = doc["paths"];
            reject_unknown(p, "paths", {"output_dir", "geometry", "basis", "measurement", "plan", "signature"});
            auto opt = [&](const char* key) -> std::optional<fs::path> {
                if (!p.contains(key) || p[key].is_null()) return std::nullopt;
                return fs::path(p[key].get<std::string>());
            };
            if (auto d = opt("output_dir")) cfg.output_dir = *d;
            cfg.geometry_file = opt("geometry");
            cfg.basis_path = opt("basis");
            cfg.measurement_path = opt("measurement");
            cfg.plan_path = opt("plan");
            cfg.signature_path = opt("signature");
        }
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    cfg.validate();
    return cfg;
}

Json config_to_json(const PipelineConfig& c) {
    Json modes = Json::array();
    for (const auto& m : c.defect.modes) modes.push_back({{"index", m.index}, {"amplitude", m.amplitude}});
    Json paths = {{"output_dir", c.output_dir.string()}};
    auto put = [&](const char* key, const std::optional<fs::path>& p) {
        if (p) paths[key] = p->string();
    };
    put("geometry", c.geometry_file);
    put("basis", c.basis_path);
    put("measurement", c.measurement_path);
    put("plan", c.plan_path);
    put("signature", c.signature_path);
    Json sweep = {{"trials", c.sweep.trials},           {"noise_sigma", c.sweep.noise_sigma},
                  {"seed", c.sweep.seed},               {"defect_range", c.sweep.defect_range},
                  {"max_modes", c.sweep.max_modes},     {"oversampling", c.sweep.oversampling},
                  {"sample_seed", c.sweep.sample_seed},
                  {"threads", c.sweep.threads}};
    if (c.sweep_axes_given) {
        sweep["complexities"] = c.sweep.complexities;
        sweep["sample_counts"] = c.sweep.sample_counts;
    }
    return {{"geometry", geometry_params_to_json(c.geometry)},
            {"basis", {{"modes", c.basis_modes}, {"enrich", c.enrich}, {"form_cutoff", c.form_cutoff}}},
            {"sampling", {{"q", c.sample_q}, {"seed", c.sample_seed}}},
            {"plan", {{"method", to_string(c.tour_method)}, {"feature_name", c.feature_name}, {"max_passes", c.max_passes}}},
            {"simulate",
             {{"noise_sigma", c.probe_noise_sigma},
              {"seed", c.probe_seed},
              {"defect",
               {{"size", c.defect.size},
                {"modes", modes},
                {"random_complexity", c.defect.random_complexity},
                {"random_range", c.defect.random_range},
                {"random_seed", c.defect.random_seed}}}}},
            {"reconstruct", {{"bands", c.bands}, {"modes", c.modes}}},
            {"interpolate", {{"max_modes", c.interpolate_max_modes}}},
            {"sweep", sweep},
            {"paths", paths}};
}

void apply_override(Json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(raw);
    } catch (const Json::parse_error&) {
        value = raw;
    }
    Json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
        if (!node->is_object()) throw ConfigError("override '" + assignment + "' descends into a value");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = Json::object();
        start = dot + 1;
    }
}

void run_subcommand(const std::string& name, const PipelineConfig& config) {
    if (name == "plan") return cmd_plan(config);
    if (name == "simulate") return cmd_simulate(config);
    if (name == "basis") return cmd_basis(config);
    if (name == "decompose") return cmd_decompose(config);
    if (name == "reconstruct") return cmd_reconstruct(config);
    if (name == "interpolate") return cmd_interpolate(config);
    if (name == "sweep") return cmd_sweep(config);
    throw ConfigError("unknown subcommand '" + name + "'");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e)) return kExitIo;
    if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const AssemblyError*>(&e)) {
        return kExitNumerical;
    }
    if (dynamic_cast<const InvalidInput*>(&e) || dynamic_cast<const InvalidParameter*>(&e)) {
        return kExitConfig;
    }
    return kExitFailure;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Modal decomposition of measured form defects"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    std::string config_path;
    std::string output_dir;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "JSON pipeline configuration");
    app.add_option("--output-dir", output_dir, "Directory receiving the artifacts");
    app.add_option("--set", overrides, "Override a config field: section.key=value")->take_all();

    struct Named {
        const char* flag;
        const char* key;
        const char* help;
        std::string value;
    };
    std::vector<Named> named{
        {"--modes", "basis.modes", "Basis column count", {}},
        {"--q", "sampling.q", "Number of sampled nodes (0 = all)", {}},
        {"--seed", "sampling.seed", "Sampling seed", {}},
        {"--basis", "paths.basis", "Basis JSON input", {}},
        {"--measurement", "paths.measurement", "Measurement CSV input", {}},
        {"--plan", "paths.plan", "Plan JSON input", {}},
        {"--signature", "paths.signature", "Signature JSON input", {}},
        {"--geometry", "paths.geometry", "Geometry JSON input", {}},
        {"--noise-sigma", "simulate.noise_sigma", "Probe noise sigma (mm)", {}},
        {"--trials", "sweep.trials", "Trials per sweep cell", {}},
    };
    for (auto& n : named) app.add_option(n.flag, n.value, n.help);
    for (const auto& name : subcommand_names()) app.add_subcommand(name);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    const std::string sub = app.get_subcommands().front()->get_name();

    try {
        Json doc = Json::object();
        if (!config_path.empty()) doc = read_json_file(config_path);
        for (const auto& n : named) {
            if (n.value.empty()) continue;
            const bool is_path = std::string_view(n.key).starts_with("paths.");
            apply_override(doc, std::string(n.key) + "=" + (is_path ? Json(n.value).dump() : n.value));
        }
        if (!output_dir.empty()) apply_override(doc, "paths.output_dir=" + Json(output_dir).dump());
        for (const auto& o : overrides) apply_override(doc, o);
        const PipelineConfig cfg = config_from_json(doc);
        logger()->debug("running '{}' into {}", sub, cfg.output_dir.string());
        run_subcommand(sub, cfg);
        return kExitOk;
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        logger()->error("{}: {}", sub, one_line(e.what()));
        return code;
    }
}

}  // namespace modalform
