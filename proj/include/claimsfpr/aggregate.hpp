#pragma once

#include "claimsfpr/datamodel.hpp"
#include "claimsfpr/illnessdeath.hpp"
#include "claimsfpr/montecarlo.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <vector>

namespace claimsfpr {

struct AgeCurve {
    std::vector<double> ages;
    std::vector<double> values;

    /// Throws unless lengths match, ages strictly increase and the curve is
    /// non-empty.
    void validate() const;
};

/// Piecewise-linear interpolation, held constant beyond the end nodes.
AgeCurve interpolate_curve(const AgeCurve& nodes, std::span<const double> query_ages);

inline constexpr int kCountAgeMin = 20;
inline constexpr int kCountAgeMax = 100;

/// Sum over integer ages 20..100 of (1 - p(a)) N(a) FPR(a), each curve
/// interpolated at the integer ages. Throws on negative inputs.
double false_positive_count(const AgeCurve& fpr, const AgeCurve& prevalence, const AgeCurve& population);

/// Order-statistic quantiles, linearly interpolated between adjacent order
/// statistics (h = (n - 1) p).
std::vector<double> empirical_quantiles(std::span<const double> samples, std::span<const double> probs);

inline constexpr std::array<double, 3> kReportProbs{0.025, 0.5, 0.975};

/// Per-draw absolute false-positive counts. A draw contributes to a sex's
/// distribution only when every grid cell of that sex was solved; the total
/// needs both sexes.
struct CountDistribution {
    std::vector<double> male;
    std::vector<double> female;
    std::vector<double> total;
    /// Draw index of each entry of `total`.
    std::vector<std::size_t> total_draws;
    /// Per-draw counts indexed by draw, NaN where the sex was excluded.
    std::array<std::vector<double>, 2> by_draw;
    std::array<std::size_t, 2> excluded_draws{0, 0};

    std::vector<double> quantiles(std::span<const double> values) const {
        return empirical_quantiles(values, kReportProbs);
    }
};

/// Population per sex as single-year curves.
std::array<AgeCurve, 2> population_curves(std::span<const ObservationRecord> population);

/// Applies the false-positive count to every draw. The susceptible share uses
/// each draw's own (se, solved sp) to correct the midpoint prevalence at the
/// grid ages.
CountDistribution count_distribution(const FprDrawMatrix& draws,
                                     const std::array<std::vector<CharacteristicInputs>, 2>& cells,
                                     const std::array<AgeCurve, 2>& population);

struct FprQuantileRow {
    Sex sex;
    double age;
    double q025, q50, q975;
    std::size_t used;
};

std::vector<FprQuantileRow> fpr_quantiles(const FprDrawMatrix& draws);

void write_fpr_quantiles(const std::filesystem::path& path, std::span<const FprQuantileRow> rows);
void write_count_quantiles(const std::filesystem::path& path, const CountDistribution& counts);
/// draw,male,female,total for draws with a complete total.
void write_count_draws(const std::filesystem::path& path, const CountDistribution& counts);

}  // namespace claimsfpr
