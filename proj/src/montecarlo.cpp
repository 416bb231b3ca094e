#include "claimsfpr/montecarlo.hpp"

#include "claimsfpr/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace claimsfpr {

namespace {

constexpr const char* kOrigin = "montecarlo";

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double parse_double(std::string_view cell, std::size_t line, const std::filesystem::path& path) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw Error(kOrigin, fmt::format("{} row {}: bad number '{}'", path.string(), line, cell));
    }
    return v;
}

}  // namespace

std::vector<double> default_age_grid() {
    std::vector<double> grid;
    for (int k = 0; k <= 8; ++k) grid.push_back(25.0 + 7.5 * k);
    return grid;
}

void McConfig::validate(double survey_gap) const {
    if (n_draws == 0) throw Error(kOrigin, "number of draws must be positive");
    if (!(se_min >= 0.5 && se_min <= se_max && se_max < 1.0)) {
        throw Error(kOrigin, fmt::format("sensitivity range [{}, {}] must satisfy 0.5 <= se_min <= se_max < 1", se_min,
                                         se_max));
    }
    if (age_grid.empty()) throw Error(kOrigin, "age grid is empty");
    for (std::size_t k = 1; k < age_grid.size(); ++k) {
        const double spacing = age_grid[k] - age_grid[k - 1];
        if (!(spacing > 0.0)) throw Error(kOrigin, "age grid must be strictly increasing");
        if (!(spacing > survey_gap)) {
            throw Error(kOrigin, fmt::format("age grid spacing {} is not coarser than the survey gap {}", spacing,
                                             survey_gap));
        }
    }
}

double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
    const std::uint64_t key = mix64(seed ^ 0x6A09E667F3BCC909ULL);
    const std::uint64_t bits = mix64(key + (counter + 1) * 0x9E3779B97F4A7C15ULL);
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

std::vector<double> sample_sensitivities(const McConfig& config) {
    std::vector<double> out(config.n_draws);
    const double width = config.se_max - config.se_min;
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = config.se_min + width * counter_uniform(config.seed, k);
    }
    return out;
}

CharacteristicInputs characteristic_inputs(const EpiSurfaces& surfaces, Sex sex, double age) {
    const double gap = surfaces.gap();
    const double t1 = surfaces.survey_year_start;
    const double t2 = surfaces.survey_year_end;
    const double tm = surfaces.mid_year();
    CharacteristicInputs in;
    in.delta = gap;
    in.p_obs_start = surfaces.prevalence.eval(t1, age - gap / 2.0, sex);
    in.p_obs_end = surfaces.prevalence.eval(t2, age + gap / 2.0, sex);
    in.i_obs_mid = surfaces.incidence.eval(tm, age, sex);
    in.m_mid = surfaces.mortality.eval(tm, age, sex);
    in.R_mid = surfaces.mrr.eval(tm, age, sex);
    return in;
}

std::array<std::vector<CharacteristicInputs>, 2> characteristic_grid(const EpiSurfaces& surfaces,
                                                                     std::span<const double> ages) {
    std::array<std::vector<CharacteristicInputs>, 2> cells;
    for (Sex s : kSexes) {
        for (double a : ages) cells[static_cast<std::size_t>(sex_index(s))].push_back(characteristic_inputs(surfaces, s, a));
    }
    return cells;
}

FprDrawMatrix::FprDrawMatrix(std::size_t n_draws, std::vector<double> ages)
    : n_draws_(n_draws), ages_(std::move(ages)),
      fpr_(n_draws * 2 * ages_.size(), std::numeric_limits<double>::quiet_NaN()),
      flags_(n_draws * 2 * ages_.size(), solve_flags::no_root), se_draws_(n_draws, 0.0) {}

std::size_t FprDrawMatrix::excluded(Sex sex, std::size_t age) const {
    return flagged(sex, age, solve_flags::no_root);
}

std::size_t FprDrawMatrix::flagged(Sex sex, std::size_t age, std::uint8_t flag) const {
    std::size_t count = 0;
    for (std::size_t d = 0; d < n_draws_; ++d) {
        if (flags(d, sex, age) & flag) ++count;
    }
    return count;
}

std::vector<double> FprDrawMatrix::cell_values(Sex sex, std::size_t age) const {
    std::vector<double> out;
    out.reserve(n_draws_);
    for (std::size_t d = 0; d < n_draws_; ++d) {
        if (stored(d, sex, age)) out.push_back(fpr(d, sex, age));
    }
    return out;
}

void FprDrawMatrix::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(kOrigin, fmt::format("cannot write '{}'", path.string()));
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "draw,sex,age,se,fpr,flags\n");
    for (std::size_t d = 0; d < n_draws_; ++d) {
        for (Sex s : kSexes) {
            for (std::size_t a = 0; a < ages_.size(); ++a) {
                const auto f = flags(d, s, a);
                if (f & solve_flags::no_root) {
                    fmt::format_to(std::back_inserter(buf), "{},{},{},{},NA,{}\n", d, to_string(s), ages_[a],
                                   se_draws_[d], describe_flags(f));
                } else {
                    fmt::format_to(std::back_inserter(buf), "{},{},{},{},{},{}\n", d, to_string(s), ages_[a],
                                   se_draws_[d], fpr(d, s, a), describe_flags(f));
                }
            }
        }
        if (buf.size() > (1u << 20)) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error(kOrigin, fmt::format("write failure on '{}'", path.string()));
}

FprDrawMatrix FprDrawMatrix::read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(kOrigin, fmt::format("cannot open '{}'", path.string()));

    struct Row {
        std::size_t draw;
        Sex sex;
        double age, se, fpr;
        std::uint8_t flags;
    };
    std::vector<Row> rows;
    std::vector<double> ages;
    std::size_t n_draws = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "draw,sex,age,se,fpr,flags") {
                throw Error(kOrigin, fmt::format("{}: unexpected header '{}'", path.string(), line));
            }
            continue;
        }
        std::vector<std::string_view> f;
        std::string_view view(line);
        std::size_t start = 0;
        while (true) {
            const auto pos = view.find(',', start);
            f.push_back(view.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
            if (pos == std::string_view::npos) break;
            start = pos + 1;
        }
        if (f.size() != 6) throw Error(kOrigin, fmt::format("{} row {}: expected 6 fields", path.string(), line_no));
        Row r;
        r.draw = static_cast<std::size_t>(parse_double(f[0], line_no, path));
        r.sex = parse_sex(f[1]);
        r.age = parse_double(f[2], line_no, path);
        r.se = parse_double(f[3], line_no, path);
        r.fpr = f[4] == "NA" ? std::numeric_limits<double>::quiet_NaN() : parse_double(f[4], line_no, path);
        r.flags = parse_flags(std::string(f[5]));
        if (std::find(ages.begin(), ages.end(), r.age) == ages.end()) ages.push_back(r.age);
        n_draws = std::max(n_draws, r.draw + 1);
        rows.push_back(r);
    }
    FprDrawMatrix m(n_draws, ages);
    for (const auto& r : rows) {
        const auto a = static_cast<std::size_t>(std::find(ages.begin(), ages.end(), r.age) - ages.begin());
        m.set(r.draw, r.sex, a, r.fpr, r.flags);
        m.se_draws()[r.draw] = r.se;
    }
    return m;
}

FprDrawMatrix estimate_fpr_grid(const McConfig& config, const EpiSurfaces& surfaces) {
    config.validate(surfaces.gap());
    return estimate_fpr_grid(config, characteristic_grid(surfaces, config.age_grid));
}

FprDrawMatrix estimate_fpr_grid(const McConfig& config, const std::array<std::vector<CharacteristicInputs>, 2>& cells) {
    const std::size_t n_ages = config.age_grid.size();
    for (const auto& c : cells) {
        if (c.size() != n_ages) throw Error(kOrigin, "cell inputs do not match the age grid");
    }
    FprDrawMatrix out(config.n_draws, config.age_grid);
    out.se_draws() = sample_sensitivities(config);

    auto solve_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t d = begin; d < end; ++d) {
            const double se = out.se_draws()[d];
            for (Sex s : kSexes) {
                const auto& row = cells[static_cast<std::size_t>(sex_index(s))];
                for (std::size_t a = 0; a < n_ages; ++a) {
                    const auto sol = solve_specificity(se, row[a]);
                    if (!sol.solved()) {
                        out.set(d, s, a, std::numeric_limits<double>::quiet_NaN(), sol.flags);
                        continue;
                    }
                    double fpr = 1.0 - sol.sp;
                    auto flags = sol.flags;
                    if (fpr > kFprCap) {
                        fpr = kFprCap;
                        flags |= solve_flags::capped;
                    }
                    out.set(d, s, a, fpr, flags);
                }
            }
        }
    };

    unsigned workers = config.workers != 0 ? config.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, config.n_draws));
    if (workers <= 1) {
        solve_range(0, config.n_draws);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (config.n_draws + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t begin = std::min(config.n_draws, w * chunk);
            const std::size_t end = std::min(config.n_draws, begin + chunk);
            pool.emplace_back(solve_range, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    out.metadata["seed"] = fmt::format("{}", config.seed);
    out.metadata["n_draws"] = fmt::format("{}", config.n_draws);
    out.metadata["se_min"] = fmt::format("{}", config.se_min);
    out.metadata["se_max"] = fmt::format("{}", config.se_max);
    return out;
}

}  // namespace claimsfpr
