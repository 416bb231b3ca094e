#pragma once

#include "claimsfpr/datamodel.hpp"
#include "claimsfpr/illnessdeath.hpp"
#include "claimsfpr/linkfit.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace claimsfpr {

/// 25, 32.5, ..., 85.
std::vector<double> default_age_grid();

struct McConfig {
    std::size_t n_draws = 100000;
    double se_min = 0.50;
    double se_max = 0.999;
    std::uint64_t seed = 20220225;
    std::vector<double> age_grid = default_age_grid();
    /// 0 selects std::thread::hardware_concurrency().
    unsigned workers = 0;

    /// Throws unless 0.5 <= se_min <= se_max < 1, n_draws > 0 and the grid
    /// spacing exceeds the survey gap. se_min == se_max is accepted as a
    /// degenerate range for round-trip checks.
    void validate(double survey_gap) const;
};

/// Uniform double in [0, 1) determined only by (seed, counter).
double counter_uniform(std::uint64_t seed, std::uint64_t counter);

/// Draw k is se_min + (se_max - se_min) * counter_uniform(seed, k).
std::vector<double> sample_sensitivities(const McConfig& config);

/// Characteristic inputs for every (sex, grid age) cell, evaluated once from
/// the fitted surfaces: apparent prevalence at (t1, a - gap/2) and
/// (t2, a + gap/2), incidence/mortality/MRR at (t_mid, a).
CharacteristicInputs characteristic_inputs(const EpiSurfaces& surfaces, Sex sex, double age);

/// FPR estimates indexed by (draw, sex, grid age). Unsolved cells hold NaN
/// and carry the no_root flag.
class FprDrawMatrix {
public:
    FprDrawMatrix() = default;
    FprDrawMatrix(std::size_t n_draws, std::vector<double> ages);

    std::size_t n_draws() const { return n_draws_; }
    const std::vector<double>& ages() const { return ages_; }
    std::size_t n_ages() const { return ages_.size(); }

    double fpr(std::size_t draw, Sex sex, std::size_t age) const { return fpr_[index(draw, sex, age)]; }
    std::uint8_t flags(std::size_t draw, Sex sex, std::size_t age) const { return flags_[index(draw, sex, age)]; }
    bool stored(std::size_t draw, Sex sex, std::size_t age) const {
        return (flags(draw, sex, age) & solve_flags::no_root) == 0;
    }
    void set(std::size_t draw, Sex sex, std::size_t age, double fpr, std::uint8_t flags) {
        fpr_[index(draw, sex, age)] = fpr;
        flags_[index(draw, sex, age)] = flags;
    }

    std::vector<double>& se_draws() { return se_draws_; }
    const std::vector<double>& se_draws() const { return se_draws_; }

    /// No-root draws per (sex, age) cell.
    std::size_t excluded(Sex sex, std::size_t age) const;
    /// Draws with any flag bit `flag` set per (sex, age) cell.
    std::size_t flagged(Sex sex, std::size_t age, std::uint8_t flag) const;

    const std::vector<double>& raw_fpr() const { return fpr_; }
    const std::vector<std::uint8_t>& raw_flags() const { return flags_; }

    /// Stored FPR values of one cell, draw order, excluded draws skipped.
    std::vector<double> cell_values(Sex sex, std::size_t age) const;

    /// Long format: draw,sex,age,se,fpr,flags; one row per (draw, sex, age).
    void write_csv(const std::filesystem::path& path) const;
    static FprDrawMatrix read_csv(const std::filesystem::path& path);

    /// Run bookkeeping written alongside the matrix.
    std::map<std::string, std::string> metadata;

private:
    std::size_t index(std::size_t draw, Sex sex, std::size_t age) const {
        return (draw * 2 + static_cast<std::size_t>(sex_index(sex))) * ages_.size() + age;
    }

    std::size_t n_draws_ = 0;
    std::vector<double> ages_;
    std::vector<double> fpr_;
    std::vector<std::uint8_t> flags_;
    std::vector<double> se_draws_;
};

/// Largest stored FPR; larger solved values are capped and flagged.
inline constexpr double kFprCap = 0.5;

/// Solves every (draw, sex, grid age) cell. Output is a pure function of the
/// configuration and surfaces, independent of the worker count.
FprDrawMatrix estimate_fpr_grid(const McConfig& config, const EpiSurfaces& surfaces);

/// Same, with precomputed cell inputs laid out [sex][age].
FprDrawMatrix estimate_fpr_grid(const McConfig& config,
                                const std::array<std::vector<CharacteristicInputs>, 2>& cells);

std::array<std::vector<CharacteristicInputs>, 2> characteristic_grid(const EpiSurfaces& surfaces,
                                                                     std::span<const double> ages);

}  // namespace claimsfpr
