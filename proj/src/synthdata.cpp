#include "claimsfpr/synthdata.hpp"

#include "claimsfpr/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <random>

namespace claimsfpr {

namespace {

constexpr const char* kOrigin = "synthdata";

double checked(double value, const char* what, double t, double a) {
    if (!std::isfinite(value) || value < 0.0) {
        throw Error(kOrigin, fmt::format("{} field evaluates to {} at t={}, a={}", what, value, t, a));
    }
    return value;
}

}  // namespace

std::vector<AgeGroup> five_year_groups(int first_lo, int open_lo, bool leading_band) {
    std::vector<AgeGroup> groups;
    if (leading_band && first_lo > 0) groups.push_back({0.0, first_lo - 1.0});
    for (int lo = first_lo; lo < open_lo; lo += 5) groups.push_back({static_cast<double>(lo), lo + 4.0});
    groups.push_back({static_cast<double>(open_lo), std::nullopt});
    return groups;
}

nlohmann::json ScenarioTruth::to_json() const {
    nlohmann::json doc;
    for (Sex s : kSexes) {
        const auto k = static_cast<std::size_t>(sex_index(s));
        doc["accuracy"][std::string(to_string(s))] = {{"se", accuracy[k].se()}, {"sp", accuracy[k].sp()}};
        doc["prevalence"][std::string(to_string(s))] = prevalence[k];
        doc["population"][std::string(to_string(s))] = population[k];
        doc["false_positive_count"][std::string(to_string(s))] = false_positive_count[k];
    }
    doc["mid_year"] = mid_year;
    doc["ages"] = ages;
    doc["false_positive_count"]["total"] = false_positive_total;
    return doc;
}

double true_prevalence(const ScenarioSpec& spec, Sex sex, double year, double age) {
    if (age <= 0.0) return 0.0;
    RateFields fields{
        [&](double t, double a) { return checked(spec.incidence(t, a, sex), "incidence", t, a); },
        [&](double t, double a) { return checked(spec.mortality(t, a, sex), "mortality", t, a); },
        [&](double t, double a) { return checked(spec.ratio(a, sex), "mortality rate ratio", t, a); },
    };
    const int steps = std::max(16, static_cast<int>(std::ceil(spec.steps_per_year * age)));
    return integrate_characteristic(0.0, fields, year - age, 0.0, age, steps).p;
}

Scenario generate_scenario(const ScenarioSpec& spec) {
    if (!spec.incidence || !spec.mortality || !spec.ratio || !spec.population) {
        throw Error(kOrigin, "scenario fields are not all set");
    }
    if (spec.survey_year_end <= spec.survey_year_start) throw Error(kOrigin, "survey years must increase");

    Scenario out;
    auto& data = out.data;
    std::mt19937_64 rng(spec.seed);

    auto observe = [&](double true_value, const AccuracyPair& acc) {
        double obs = apparent_proportion(true_value, acc);
        if (spec.noise_denominator) {
            const auto n = static_cast<long long>(*spec.noise_denominator);
            std::binomial_distribution<long long> draw(n, obs);
            obs = std::max<double>(static_cast<double>(draw(rng)), 0.5) / static_cast<double>(n);
        }
        return obs;
    };

    for (Sex s : kSexes) {
        const auto& acc = spec.accuracy[static_cast<std::size_t>(sex_index(s))];
        for (int year : {spec.survey_year_start, spec.survey_year_end}) {
            for (const auto& g : spec.prevalence_groups) {
                const double a = representative_age(g.lo, g.hi);
                const double p = true_prevalence(spec, s, year, a);
                data.prevalence.push_back({s, year, g.lo, g.hi, observe(p, acc), false});
            }
        }
        for (int year : spec.incidence_years) {
            for (const auto& g : spec.incidence_groups) {
                const double a = representative_age(g.lo, g.hi);
                const double i = checked(spec.incidence(year, a, s), "incidence", year, a);
                data.incidence.push_back({s, year, g.lo, g.hi, observe(i, acc), false});
            }
        }
        for (int year : spec.mortality_years) {
            for (int a = spec.mortality_age_min; a <= spec.mortality_age_max; ++a) {
                const double m = checked(spec.mortality(year, a + 0.5, s), "mortality", year, a);
                data.mortality.push_back({s, year, static_cast<double>(a), static_cast<double>(a), m, false});
            }
        }
        for (double a : spec.mrr_ages) {
            data.mrr.push_back({s, std::nullopt, a, a, checked(spec.ratio(a, s), "mortality rate ratio", 0, a), true});
        }
        for (int a = 0; a <= spec.population_age_max; ++a) {
            data.population.push_back(
                {s, std::nullopt, static_cast<double>(a), static_cast<double>(a), spec.population(a, s), false});
        }
    }

    auto& truth = out.truth;
    truth.accuracy = spec.accuracy;
    truth.mid_year = 0.5 * (spec.survey_year_start + spec.survey_year_end);
    for (int a = 20; a <= 100; ++a) truth.ages.push_back(a);
    truth.false_positive_total = 0.0;
    for (Sex s : kSexes) {
        const auto k = static_cast<std::size_t>(sex_index(s));
        double count = 0.0;
        for (double a : truth.ages) {
            const double p = true_prevalence(spec, s, truth.mid_year, a);
            const double n = spec.population(static_cast<int>(a), s);
            truth.prevalence[k].push_back(p);
            truth.population[k].push_back(n);
            count += (1.0 - p) * n * spec.accuracy[k].fpr();
        }
        truth.false_positive_count[k] = count;
        truth.false_positive_total += count;
    }
    return out;
}

ScenarioSpec reference_scenario() {
    ScenarioSpec spec;
    spec.mortality = [](double, double a, Sex s) {
        return std::exp((s == Sex::male ? -10.0 : -10.4) + 0.09 * a);
    };
    spec.incidence = [](double t, double a, Sex s) {
        const double scale = s == Sex::male ? 1.0 : 0.8;
        return scale * 0.01 * std::exp(0.04 * (a - 60.0) + 0.01 * (t - 2012.0));
    };
    spec.ratio = [](double a, Sex) { return 3.0 * std::exp2(-(a - 20.0) / 70.0); };
    spec.population = [](int a, Sex s) {
        const double decline = s == Sex::male ? 0.06 : 0.05;
        return a < 60 ? 450000.0 : 450000.0 * std::exp(-decline * (a - 60));
    };
    spec.accuracy = {AccuracyPair{0.9, 0.995}, AccuracyPair{0.9, 0.995}};
    spec.prevalence_groups = five_year_groups(15, 90, true);
    spec.incidence_groups = {{0.0, 19.0}, {20.0, 39.0}, {40.0, 59.0}, {60.0, 79.0}, {80.0, std::nullopt}};
    for (int a = 20; a <= 90; a += 5) spec.mrr_ages.push_back(a);
    return spec;
}

void write_scenario(const Scenario& scenario, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    write_table(directory / "prevalence.csv", TableKind::prevalence, scenario.data.prevalence);
    write_table(directory / "incidence.csv", TableKind::incidence, scenario.data.incidence);
    write_table(directory / "mortality.csv", TableKind::mortality, scenario.data.mortality);
    write_table(directory / "mrr.csv", TableKind::mrr, scenario.data.mrr);
    write_table(directory / "population.csv", TableKind::population, scenario.data.population);
    std::ofstream truth(directory / "truth.json", std::ios::binary);
    if (!truth) throw Error(kOrigin, fmt::format("cannot write truth.json in '{}'", directory.string()));
    truth << scenario.truth.to_json().dump(2) << '\n';
}

}  // namespace claimsfpr
