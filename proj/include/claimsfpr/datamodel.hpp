#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace claimsfpr {

enum class Sex { male = 0, female = 1 };

inline constexpr std::array<Sex, 2> kSexes{Sex::male, Sex::female};

std::string_view to_string(Sex sex);
Sex parse_sex(std::string_view text);

inline constexpr int sex_index(Sex sex) { return static_cast<int>(sex); }

enum class TableKind { prevalence, incidence, mortality, mrr, population };

std::string_view to_string(TableKind kind);

/// One age-group x year x sex data point.
///
/// Ages are in years. Grouped tables use inclusive integer bands
/// (`80..84`); `age_hi` is empty for an open-ended band (`90+`). Single-year
/// tables (mortality, population) store `age_lo == age_hi`. The MRR table
/// carries exact ages, flagged by `point_age`. `year` is empty for tables
/// without a calendar dimension (mrr, population).
struct ObservationRecord {
    Sex sex = Sex::male;
    std::optional<int> year;
    double age_lo = 0.0;
    std::optional<double> age_hi;
    double value = 0.0;
    bool point_age = false;
};

struct AgeOverride {
    double age_lo;
    std::optional<double> age_hi;
    double age;
};

/// Representative age of an inclusive integer-year band: (lo + hi + 1) / 2,
/// or lo + 2.5 for an open band. An override matching (lo, hi) wins.
double representative_age(double age_lo, std::optional<double> age_hi,
                          std::span<const AgeOverride> overrides = {});

double representative_age(const ObservationRecord& record,
                          std::span<const AgeOverride> overrides = {});

/// Parses one CSV table. The whole load fails on the first bad row; the error
/// message names the 1-based line number.
std::vector<ObservationRecord> load_table(const std::filesystem::path& path, TableKind kind);

/// Same parser applied to in-memory text (used by load_table).
std::vector<ObservationRecord> parse_table(std::string_view text, TableKind kind,
                                           std::string_view source = "<memory>");

void write_table(const std::filesystem::path& path, TableKind kind,
                 std::span<const ObservationRecord> records);

std::string_view table_header(TableKind kind);

struct Dataset {
    std::vector<ObservationRecord> prevalence;
    std::vector<ObservationRecord> incidence;
    std::vector<ObservationRecord> mortality;
    std::vector<ObservationRecord> mrr;
    std::vector<ObservationRecord> population;

    /// Distinct prevalence years, ascending.
    std::vector<int> prevalence_years() const;

    /// (t1, t2) when exactly two prevalence years are present.
    std::optional<std::pair<int, int>> survey_years() const;

    /// t2 - t1, or 0 when the survey years are not well defined.
    double survey_gap() const;
};

struct ValidationOptions {
    /// Mortality comes from a fitted-coefficient document instead of a table.
    bool mortality_supplied_as_fit = false;
    /// Prevalence groups starting below this age are ignored when fitting.
    double prevalence_min_age = 15.0;
    /// Ages the false-positive count is summed over.
    int count_age_min = 20;
    int count_age_max = 100;
};

struct ValidationReport {
    std::vector<std::string> issues;

    bool ok() const { return issues.empty(); }
};

/// Checks every dataset invariant plus the estimation-grid resolution
/// constraint (grid spacing must exceed the survey gap). Never throws.
ValidationReport validate_dataset(const Dataset& data, std::span<const double> age_grid,
                                  const ValidationOptions& options = {});

}  // namespace claimsfpr
