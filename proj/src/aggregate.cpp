#include "claimsfpr/aggregate.hpp"

#include "claimsfpr/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace claimsfpr {

namespace {

constexpr const char* kOrigin = "aggregate";

std::vector<double> count_ages() {
    std::vector<double> ages;
    for (int a = kCountAgeMin; a <= kCountAgeMax; ++a) ages.push_back(a);
    return ages;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(kOrigin, fmt::format("cannot write '{}'", path.string()));
    return out;
}

}  // namespace

void AgeCurve::validate() const {
    if (ages.empty()) throw Error(kOrigin, "age curve has no nodes");
    if (ages.size() != values.size()) throw Error(kOrigin, "age curve ages and values differ in length");
    for (std::size_t k = 1; k < ages.size(); ++k) {
        if (!(ages[k] > ages[k - 1])) throw Error(kOrigin, "age curve ages must be strictly increasing");
    }
}

AgeCurve interpolate_curve(const AgeCurve& nodes, std::span<const double> query_ages) {
    nodes.validate();
    AgeCurve out;
    out.ages.assign(query_ages.begin(), query_ages.end());
    out.values.reserve(query_ages.size());
    const auto& x = nodes.ages;
    const auto& y = nodes.values;
    for (double a : query_ages) {
        if (a <= x.front()) {
            out.values.push_back(y.front());
        } else if (a >= x.back()) {
            out.values.push_back(y.back());
        } else {
            const auto hi = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), a) - x.begin());
            const std::size_t lo = hi - 1;
            if (a == x[lo]) {
                out.values.push_back(y[lo]);
            } else {
                const double w = (a - x[lo]) / (x[hi] - x[lo]);
                out.values.push_back(y[lo] + w * (y[hi] - y[lo]));
            }
        }
    }
    return out;
}

double false_positive_count(const AgeCurve& fpr, const AgeCurve& prevalence, const AgeCurve& population) {
    const auto ages = count_ages();
    const auto f = interpolate_curve(fpr, ages);
    const auto p = interpolate_curve(prevalence, ages);
    const auto n = interpolate_curve(population, ages);
    double total = 0.0;
    for (std::size_t k = 0; k < ages.size(); ++k) {
        if (f.values[k] < 0.0 || p.values[k] < 0.0 || n.values[k] < 0.0) {
            throw Error(kOrigin, fmt::format("negative input at age {}", ages[k]));
        }
        total += (1.0 - p.values[k]) * n.values[k] * f.values[k];
    }
    return total;
}

std::vector<double> empirical_quantiles(std::span<const double> samples, std::span<const double> probs) {
    if (samples.empty()) throw Error(kOrigin, "quantiles of an empty sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n1 = static_cast<double>(sorted.size() - 1);
    std::vector<double> out;
    out.reserve(probs.size());
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error(kOrigin, fmt::format("probability {} outside [0, 1]", p));
        const double h = n1 * p;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = h - static_cast<double>(lo);
        out.push_back(frac == 0.0 ? sorted[lo] : sorted[lo] + frac * (sorted[hi] - sorted[lo]));
    }
    return out;
}

std::array<AgeCurve, 2> population_curves(std::span<const ObservationRecord> population) {
    std::array<std::vector<std::pair<double, double>>, 2> rows;
    for (const auto& r : population) {
        rows[static_cast<std::size_t>(sex_index(r.sex))].emplace_back(r.age_lo, r.value);
    }
    std::array<AgeCurve, 2> out;
    for (std::size_t s = 0; s < 2; ++s) {
        std::sort(rows[s].begin(), rows[s].end());
        for (const auto& [age, count] : rows[s]) {
            out[s].ages.push_back(age);
            out[s].values.push_back(count);
        }
        out[s].validate();
    }
    return out;
}

CountDistribution count_distribution(const FprDrawMatrix& draws,
                                     const std::array<std::vector<CharacteristicInputs>, 2>& cells,
                                     const std::array<AgeCurve, 2>& population) {
    const std::size_t n_ages = draws.n_ages();
    for (const auto& c : cells) {
        if (c.size() != n_ages) throw Error(kOrigin, "cell inputs do not match the draw matrix age grid");
    }
    const auto ages = count_ages();
    std::array<std::vector<double>, 2> pop_at;
    for (std::size_t s = 0; s < 2; ++s) pop_at[s] = interpolate_curve(population[s], ages).values;

    CountDistribution out;
    for (auto& v : out.by_draw) v.assign(draws.n_draws(), std::numeric_limits<double>::quiet_NaN());

    AgeCurve fpr_nodes{draws.ages(), std::vector<double>(n_ages)};
    AgeCurve prev_nodes{draws.ages(), std::vector<double>(n_ages)};
    for (std::size_t d = 0; d < draws.n_draws(); ++d) {
        const double se = draws.se_draws()[d];
        for (Sex sex : kSexes) {
            const auto s = static_cast<std::size_t>(sex_index(sex));
            bool complete = true;
            for (std::size_t a = 0; a < n_ages && complete; ++a) {
                if (!draws.stored(d, sex, a)) {
                    complete = false;
                    break;
                }
                const double fpr = draws.fpr(d, sex, a);
                fpr_nodes.values[a] = fpr;
                prev_nodes.values[a] = std::clamp(corrected_midpoint_prevalence(cells[s][a], se, 1.0 - fpr), 0.0, 1.0);
            }
            if (!complete) {
                ++out.excluded_draws[s];
                continue;
            }
            const auto f = interpolate_curve(fpr_nodes, ages).values;
            const auto p = interpolate_curve(prev_nodes, ages).values;
            double total = 0.0;
            for (std::size_t k = 0; k < ages.size(); ++k) total += (1.0 - p[k]) * pop_at[s][k] * f[k];
            out.by_draw[s][d] = total;
        }
        const double m = out.by_draw[0][d];
        const double f = out.by_draw[1][d];
        if (!std::isnan(m)) out.male.push_back(m);
        if (!std::isnan(f)) out.female.push_back(f);
        if (!std::isnan(m) && !std::isnan(f)) {
            out.total.push_back(m + f);
            out.total_draws.push_back(d);
        }
    }
    return out;
}

std::vector<FprQuantileRow> fpr_quantiles(const FprDrawMatrix& draws) {
    std::vector<FprQuantileRow> rows;
    for (Sex sex : kSexes) {
        for (std::size_t a = 0; a < draws.n_ages(); ++a) {
            const auto values = draws.cell_values(sex, a);
            FprQuantileRow row{sex, draws.ages()[a], NAN, NAN, NAN, values.size()};
            if (!values.empty()) {
                const auto q = empirical_quantiles(values, kReportProbs);
                row.q025 = q[0];
                row.q50 = q[1];
                row.q975 = q[2];
            }
            rows.push_back(row);
        }
    }
    return rows;
}

void write_fpr_quantiles(const std::filesystem::path& path, std::span<const FprQuantileRow> rows) {
    auto out = open_output(path);
    out << "sex,age,q025,q50,q975\n";
    for (const auto& r : rows) {
        if (r.used == 0) {
            out << fmt::format("{},{},NA,NA,NA\n", to_string(r.sex), r.age);
        } else {
            out << fmt::format("{},{},{:.10g},{:.10g},{:.10g}\n", to_string(r.sex), r.age, r.q025, r.q50, r.q975);
        }
    }
}

void write_count_quantiles(const std::filesystem::path& path, const CountDistribution& counts) {
    auto out = open_output(path);
    out << "sex,q025_thousands,q50_thousands,q975_thousands\n";
    auto row = [&](std::string_view label, const std::vector<double>& values) {
        if (values.empty()) {
            out << fmt::format("{},NA,NA,NA\n", label);
            return;
        }
        const auto q = counts.quantiles(values);
        out << fmt::format("{},{:.6f},{:.6f},{:.6f}\n", label, q[0] / 1000.0, q[1] / 1000.0, q[2] / 1000.0);
    };
    row("male", counts.male);
    row("female", counts.female);
    row("total", counts.total);
}

void write_count_draws(const std::filesystem::path& path, const CountDistribution& counts) {
    auto out = open_output(path);
    out << "draw,male,female,total\n";
    for (std::size_t k = 0; k < counts.total_draws.size(); ++k) {
        const auto d = counts.total_draws[k];
        out << fmt::format("{},{},{},{}\n", d, counts.by_draw[0][d], counts.by_draw[1][d], counts.total[k]);
    }
}

}  // namespace claimsfpr
