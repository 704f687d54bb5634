#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "modalform/error.hpp"
#include "modalform/interpolation.hpp"
#include "modalform/metrology_plan.hpp"
#include "modalform/modal_basis.hpp"
#include "modalform/serialization.hpp"

namespace modalform {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitNumerical = 3,
    kExitIo = 4,
};

/// Raised for configuration problems detected before any operation runs.
class ConfigError : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

struct ModeAmplitude {
    int index = 1;  // 1-based natural mode number
    double amplitude = 0.0;
};

/// Synthetic true defect used by `simulate`: size dilation plus explicit
/// and random natural-mode content in the infinity-normed natural basis.
struct DefectSpec {
    double size = 0.0;
    std::vector<ModeAmplitude> modes;
    int random_complexity = 0;
    double random_range = 0.0;
    std::uint64_t random_seed = 0;
};

struct PipelineConfig {
    GeometryParams geometry = CapParams{1.0, 1.5707963267948966, 321};
    std::optional<std::filesystem::path> geometry_file;

    int basis_modes = 50;
    bool enrich = true;
    int form_cutoff = 15;

    int sample_q = 0;  // 0: every node
    std::uint64_t sample_seed = 0;

    TourMethod tour_method = TourMethod::NearestNeighbor2Opt;
    int max_passes = kDefaultMaxTwoOptPasses;
    std::string feature_name = "PART";

    double probe_noise_sigma = 0.0;
    std::uint64_t probe_seed = 0;
    DefectSpec defect;

    std::vector<std::string> bands;  // reconstruct selection by band
    std::vector<int> modes;          // reconstruct selection by 1-based index

    int interpolate_max_modes = 0;  // 0: as many as the sample allows

    SweepConfig sweep;
    bool sweep_axes_given = false;

    std::filesystem::path output_dir = ".";
    std::optional<std::filesystem::path> basis_path;
    std::optional<std::filesystem::path> measurement_path;
    std::optional<std::filesystem::path> plan_path;
    std::optional<std::filesystem::path> signature_path;

    std::filesystem::path input_or_default(const std::optional<std::filesystem::path>& given,
                                           const char* default_name) const;
    void validate() const;
};

/// Parses a configuration document; unknown keys are rejected.
PipelineConfig config_from_json(const Json& j);
Json config_to_json(const PipelineConfig& config);

/// Applies "section.key=value" overrides on top of a JSON config document.
void apply_override(Json& doc, const std::string& assignment);

inline const std::vector<std::string>& subcommand_names() {
    static const std::vector<std::string> names{"plan",        "basis", "decompose", "reconstruct",
                                                "interpolate", "sweep", "simulate"};
    return names;
}

/// Runs one subcommand and writes its artifacts. Errors propagate as exceptions.
void run_subcommand(const std::string& name, const PipelineConfig& config);

/// Maps a caught exception to the documented exit status.
int exit_code_for(const std::exception& e);

/// Full command-line entry point (argument parsing, logging, exit codes).
int run_cli(int argc, char** argv);

}  // namespace modalform
