#pragma once

#include "claimsfpr/aggregate.hpp"
#include "claimsfpr/datamodel.hpp"
#include "claimsfpr/linkfit.hpp"
#include "claimsfpr/montecarlo.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <vector>

namespace claimsfpr {

/// Input files of a run. `mortality_fit` (a fitted-surface JSON document)
/// replaces `mortality` when set.
struct InputPaths {
    std::filesystem::path prevalence;
    std::filesystem::path incidence;
    std::filesystem::path mortality;
    std::filesystem::path mortality_fit;
    std::filesystem::path mrr;
    std::filesystem::path population;

    /// Standard file names inside one directory; mortality_fit.json is used
    /// when present and mortality.csv is not.
    static InputPaths from_directory(const std::filesystem::path& directory);

    std::vector<std::pair<std::string, std::filesystem::path>> named() const;
};

struct RunConfig {
    InputPaths inputs;
    McConfig mc;
    FitOptions fit;
    std::filesystem::path out_dir;
    bool figures = true;
};

struct LoadedInputs {
    Dataset data;
    std::optional<FittedSurface> mortality_fit;
};

LoadedInputs load_inputs(const InputPaths& paths);

/// Hex SHA-256 of a file's bytes.
std::string file_fingerprint(const std::filesystem::path& path);

/// Everything needed to write tables and figures.
struct RunResults {
    Dataset data;
    EpiSurfaces surfaces;
    FprDrawMatrix draws;
    std::vector<FprQuantileRow> fpr_quantiles;
    CountDistribution counts;
};

struct RunReport {
    std::vector<std::filesystem::path> outputs;
    nlohmann::json metadata;
    /// Count quantiles in persons: male, female, total x (2.5, 50, 97.5 %).
    std::array<std::array<double, 3>, 3> count_quantiles{};
    RunResults results;
};

/// Fits inputs from `config`, validates the dataset and returns the surfaces.
EpiSurfaces fit_stage(const RunConfig& config, const LoadedInputs& inputs);

/// ingest -> fit -> estimate -> aggregate -> report. Writes fpr_draws.csv,
/// fpr_quantiles.csv, counts_quantiles.csv, counts_draws.csv, surfaces.json,
/// run_metadata.json (and figures/ when enabled) into config.out_dir. On any
/// failure every file written so far is removed and the error rethrown.
RunReport run_pipeline(const RunConfig& config);

/// Computes results without touching the filesystem beyond reading inputs.
RunResults compute_results(const RunConfig& config, const LoadedInputs& inputs);

/// Deterministic run metadata (no timestamps).
nlohmann::json run_metadata(const RunConfig& config, const RunResults& results);

/// Six SVG figures: fig1_prevalence, fig2_incidence, fig3_mrr,
/// fig4_mortality, fig5_fpr, fig6_counts.
std::vector<std::filesystem::path> emit_figures(const RunResults& results, const std::filesystem::path& directory);

/// Cap on individual draw lines drawn in the FPR fan.
inline constexpr std::size_t kSpaghettiCap = 500;

/// Writes `text` to `path`, throwing an Error from `origin` on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text, const char* origin);

}  // namespace claimsfpr
