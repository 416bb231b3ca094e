#pragma once

#include "claimsfpr/datamodel.hpp"
#include "claimsfpr/illnessdeath.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace claimsfpr {

struct AgeGroup {
    double lo;
    std::optional<double> hi;
};

/// Consecutive five-year bands from `first_lo`, closed by an open band at
/// `open_lo`; an optional leading band [0, first_lo - 1].
std::vector<AgeGroup> five_year_groups(int first_lo, int open_lo, bool leading_band);

/// Forward scenario with known diagnostic accuracy. Rate fields are per
/// person-year and take (calendar time, age, sex); the ratio field has no
/// time dependence.
struct ScenarioSpec {
    std::function<double(double, double, Sex)> incidence;
    std::function<double(double, double, Sex)> mortality;
    std::function<double(double, Sex)> ratio;
    /// Persons at a single year of age.
    std::function<double(int, Sex)> population;
    std::array<AccuracyPair, 2> accuracy{AccuracyPair{1.0, 1.0}, AccuracyPair{1.0, 1.0}};

    int survey_year_start = 2009;
    int survey_year_end = 2015;
    std::vector<int> incidence_years{2012, 2013, 2014};
    std::vector<int> mortality_years{2010, 2011, 2012, 2013, 2014};
    std::vector<AgeGroup> prevalence_groups;
    std::vector<AgeGroup> incidence_groups;
    int mortality_age_min = 0;
    int mortality_age_max = 100;
    std::vector<double> mrr_ages;
    int population_age_max = 100;

    /// RK4 steps per year of age along each cohort.
    int steps_per_year = 8;
    /// Binomial sampling noise on prevalence and incidence at this
    /// denominator; none when empty.
    std::optional<double> noise_denominator;
    std::uint64_t seed = 1;
};

/// Hidden truth of a generated scenario, for assertions only.
struct ScenarioTruth {
    std::array<AccuracyPair, 2> accuracy{AccuracyPair{1.0, 1.0}, AccuracyPair{1.0, 1.0}};
    double mid_year = 0.0;
    /// Integer ages 20..100.
    std::vector<double> ages;
    /// True prevalence at the mid year, per sex over `ages`.
    std::array<std::vector<double>, 2> prevalence;
    std::array<std::vector<double>, 2> population;
    /// Sum over ages of (1 - p) N (1 - sp) per sex.
    std::array<double, 2> false_positive_count{0.0, 0.0};
    double false_positive_total = 0.0;

    nlohmann::json to_json() const;
};

struct Scenario {
    Dataset data;
    ScenarioTruth truth;
};

/// True prevalence at (t, a): cohort integration from p = 0 at birth.
double true_prevalence(const ScenarioSpec& spec, Sex sex, double year, double age);

/// Observed tables are point evaluations at each group's representative age,
/// passed through the observation model with the generative accuracy.
Scenario generate_scenario(const ScenarioSpec& spec);

/// Paper-shaped fixture: Gompertz mortality ln m = -10 + 0.09 a, incidence
/// reaching about 1 %/year at 60, MRR declining from 3 at 20 to 1.5 at 90,
/// se* = 0.9 and sp* = 0.995 for both sexes.
ScenarioSpec reference_scenario();

/// Writes prevalence.csv, incidence.csv, mortality.csv, mrr.csv,
/// population.csv and truth.json into `directory`.
void write_scenario(const Scenario& scenario, const std::filesystem::path& directory);

}  // namespace claimsfpr
