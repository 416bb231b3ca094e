#include "claimsfpr/pipeline.hpp"

#include "claimsfpr/error.hpp"
#include "claimsfpr/svg.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <memory>

namespace claimsfpr {

namespace fs = std::filesystem;

namespace {

constexpr const char* kOrigin = "cli";
constexpr std::uint64_t kPlotSeed = 0x5EEDF16;

const std::array<std::string, 2> kSexColors{"#1f5fb4", "#c0392b"};
const std::array<std::string, 6> kYearColors{"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf"};

std::vector<double> age_range(double lo, double hi, double step) {
    std::vector<double> out;
    for (double a = lo; a <= hi + 1e-9; a += step) out.push_back(a);
    return out;
}

std::vector<int> years_of(const std::vector<ObservationRecord>& records) {
    std::vector<int> years;
    for (const auto& r : records) {
        const int y = r.year.value_or(0);
        if (std::find(years.begin(), years.end(), y) == years.end()) years.push_back(y);
    }
    std::sort(years.begin(), years.end());
    return years;
}

// Observed points and the fitted curve per year for one table and one sex.
svg::Panel fit_panel(const std::vector<ObservationRecord>& records, const FittedSurface& surface, Sex sex,
                     bool by_year, double min_age, double max_age, std::string title, std::string y_label,
                     bool log_y) {
    svg::Panel panel;
    panel.title = std::move(title);
    panel.x_label = "Age (years)";
    panel.y_label = std::move(y_label);
    panel.log_y = log_y;
    panel.y_from_zero = !log_y;

    const auto years = by_year ? years_of(records) : std::vector<int>{0};
    for (std::size_t k = 0; k < years.size(); ++k) {
        const auto& color = kYearColors[k % kYearColors.size()];
        svg::Series pts;
        pts.points = true;
        pts.color = color;
        pts.css_class = "observed";
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& r : records) {
            if (r.sex != sex || (by_year && r.year.value_or(0) != years[k])) continue;
            if (r.age_lo < min_age || r.age_lo > max_age) continue;
            const double a = representative_age(r);
            pts.x.push_back(a);
            pts.y.push_back(r.value);
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
        if (pts.x.empty()) continue;
        svg::Series line;
        line.color = color;
        line.css_class = "fitted";
        line.label = by_year ? fmt::format("{}", years[k]) : std::string{};
        const double year = by_year ? years[k] : surface.basis().time_center;
        line.x = age_range(lo, hi, 0.5);
        for (double a : line.x) line.y.push_back(surface.eval(year, a, sex));
        panel.series.push_back(std::move(line));
        panel.series.push_back(std::move(pts));
    }
    return panel;
}

class OutputTracker {
public:
    explicit OutputTracker(fs::path dir) : dir_(std::move(dir)) {
        created_dir_ = !fs::exists(dir_);
        fs::create_directories(dir_);
    }

    fs::path add(const fs::path& name) {
        auto path = dir_ / name;
        files_.push_back(path);
        return path;
    }

    void add_all(const std::vector<fs::path>& paths) { files_.insert(files_.end(), paths.begin(), paths.end()); }

    void rollback() noexcept {
        std::error_code ec;
        for (const auto& f : files_) fs::remove(f, ec);
        fs::remove(dir_ / "figures", ec);  // only succeeds when empty
        if (created_dir_) fs::remove(dir_, ec);
    }

    const std::vector<fs::path>& files() const { return files_; }

private:
    fs::path dir_;
    bool created_dir_ = false;
    std::vector<fs::path> files_;
};

}  // namespace

void write_text_file(const fs::path& path, const std::string& text, const char* origin) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(origin, fmt::format("cannot write '{}'", path.string()));
    out << text;
    if (!out) throw Error(origin, fmt::format("write failure on '{}'", path.string()));
}

InputPaths InputPaths::from_directory(const fs::path& directory) {
    InputPaths p;
    p.prevalence = directory / "prevalence.csv";
    p.incidence = directory / "incidence.csv";
    p.mrr = directory / "mrr.csv";
    p.population = directory / "population.csv";
    if (!fs::exists(directory / "mortality.csv") && fs::exists(directory / "mortality_fit.json")) {
        p.mortality_fit = directory / "mortality_fit.json";
    } else {
        p.mortality = directory / "mortality.csv";
    }
    return p;
}

std::vector<std::pair<std::string, fs::path>> InputPaths::named() const {
    std::vector<std::pair<std::string, fs::path>> out{
        {"prevalence", prevalence}, {"incidence", incidence}, {"mrr", mrr}, {"population", population}};
    if (!mortality_fit.empty()) {
        out.emplace_back("mortality_fit", mortality_fit);
    } else {
        out.emplace_back("mortality", mortality);
    }
    return out;
}

LoadedInputs load_inputs(const InputPaths& paths) {
    for (const auto& [name, path] : paths.named()) {
        if (path.empty() || !fs::exists(path)) {
            throw Error("datamodel", fmt::format("missing {} input '{}'", name, path.string()));
        }
    }
    LoadedInputs in;
    in.data.prevalence = load_table(paths.prevalence, TableKind::prevalence);
    in.data.incidence = load_table(paths.incidence, TableKind::incidence);
    in.data.mrr = load_table(paths.mrr, TableKind::mrr);
    in.data.population = load_table(paths.population, TableKind::population);
    if (!paths.mortality_fit.empty()) {
        std::ifstream f(paths.mortality_fit, std::ios::binary);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(f);
        } catch (const nlohmann::json::exception& e) {
            throw Error("linkfit", fmt::format("cannot parse '{}': {}", paths.mortality_fit.string(), e.what()));
        }
        in.mortality_fit = FittedSurface::from_json(doc);
    } else {
        in.data.mortality = load_table(paths.mortality, TableKind::mortality);
    }
    return in;
}

std::string file_fingerprint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(kOrigin, fmt::format("cannot read '{}' for fingerprinting", path.string()));
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    std::string hex;
    for (unsigned int k = 0; k < len; ++k) hex += fmt::format("{:02x}", md[k]);
    return hex;
}

EpiSurfaces fit_stage(const RunConfig& config, const LoadedInputs& inputs) {
    ValidationOptions vo;
    vo.mortality_supplied_as_fit = inputs.mortality_fit.has_value();
    vo.prevalence_min_age = config.fit.prevalence_min_age;
    const auto report = validate_dataset(inputs.data, config.mc.age_grid, vo);
    if (!report.ok()) {
        throw Error("datamodel", fmt::format("dataset failed validation: {}", fmt::join(report.issues, "; ")));
    }
    return fit_epi_surfaces(inputs.data, config.fit, inputs.mortality_fit);
}

RunResults compute_results(const RunConfig& config, const LoadedInputs& inputs) {
    RunResults r;
    r.data = inputs.data;
    r.surfaces = fit_stage(config, inputs);
    r.draws = estimate_fpr_grid(config.mc, r.surfaces);
    const auto cells = characteristic_grid(r.surfaces, config.mc.age_grid);
    r.counts = count_distribution(r.draws, cells, population_curves(inputs.data.population));
    r.fpr_quantiles = fpr_quantiles(r.draws);
    return r;
}

nlohmann::json run_metadata(const RunConfig& config, const RunResults& results) {
    nlohmann::json meta;
    meta["monte_carlo"] = {
        {"seed", config.mc.seed},
        {"n_draws", config.mc.n_draws},
        {"se_min", config.mc.se_min},
        {"se_max", config.mc.se_max},
        {"age_grid", config.mc.age_grid},
    };
    const auto& s = results.surfaces;
    meta["survey"] = {{"years", {s.survey_year_start, s.survey_year_end}}, {"gap", s.gap()}, {"time_center", s.mid_year()}};
    meta["fit"] = {
        {"prevalence_df", config.fit.prevalence_df},
        {"incidence_df", config.fit.incidence_df},
        {"mrr_df", config.fit.mrr_df},
        {"mortality_degree", config.fit.mortality_degree},
        {"prevalence_min_age", config.fit.prevalence_min_age},
        {"mortality_age_range", {config.fit.mortality_age_min, config.fit.mortality_age_max}},
        {"mortality_source", config.inputs.mortality_fit.empty() ? "table" : "fitted coefficients"},
        {"knots",
         {{"prevalence", s.prevalence.basis().knots},
          {"incidence", s.incidence.basis().knots},
          {"mrr", s.mrr.basis().knots}}},
        {"rss",
         {{"prevalence", s.prevalence.rss()},
          {"incidence", s.incidence.rss()},
          {"mortality", s.mortality.rss()},
          {"mrr", s.mrr.rss()}}},
    };

    nlohmann::json cells = nlohmann::json::array();
    const auto& d = results.draws;
    for (Sex sex : kSexes) {
        for (std::size_t a = 0; a < d.n_ages(); ++a) {
            cells.push_back({
                {"sex", to_string(sex)},
                {"age", d.ages()[a]},
                {"no_root", d.flagged(sex, a, solve_flags::no_root)},
                {"multiple_roots", d.flagged(sex, a, solve_flags::multiple_roots)},
                {"clamped_correction", d.flagged(sex, a, solve_flags::clamped_correction)},
                {"capped", d.flagged(sex, a, solve_flags::capped)},
            });
        }
    }
    meta["solver_flags"] = cells;
    meta["count_exclusions"] = {
        {"male", results.counts.excluded_draws[0]},
        {"female", results.counts.excluded_draws[1]},
        {"draws_in_total", results.counts.total.size()},
    };
    const auto& grid = config.mc.age_grid;
    meta["extrapolation"] = {
        {"count_age_range", {kCountAgeMin, kCountAgeMax}},
        {"fpr_grid_range", {grid.front(), grid.back()}},
        {"clamped_below", std::max(0.0, grid.front() - kCountAgeMin)},
        {"clamped_above", std::max(0.0, kCountAgeMax - grid.back())},
        {"rule", "FPR and corrected prevalence held constant beyond the grid ends"},
    };
    nlohmann::json prints;
    for (const auto& [name, path] : config.inputs.named()) {
        prints[name] = {{"file", path.filename().string()}, {"sha256", file_fingerprint(path)}};
    }
    meta["inputs"] = prints;
    return meta;
}

RunReport run_pipeline(const RunConfig& config) {
    const auto inputs = load_inputs(config.inputs);
    OutputTracker tracker(config.out_dir);
    const auto started = std::chrono::system_clock::now();
    RunReport report;
    try {
        report.results = compute_results(config, inputs);
        const auto& r = report.results;

        write_text_file(tracker.add("surfaces.json"), r.surfaces.to_json().dump(2) + "\n", "linkfit");
        r.draws.write_csv(tracker.add("fpr_draws.csv"));
        write_fpr_quantiles(tracker.add("fpr_quantiles.csv"), r.fpr_quantiles);
        write_count_quantiles(tracker.add("counts_quantiles.csv"), r.counts);
        write_count_draws(tracker.add("counts_draws.csv"), r.counts);

        report.metadata = run_metadata(config, r);
        write_text_file(tracker.add("run_metadata.json"), report.metadata.dump(2) + "\n", kOrigin);

        if (config.figures) {
            fs::create_directories(config.out_dir / "figures");
            tracker.add_all(emit_figures(r, config.out_dir / "figures"));
        }

        const std::array<const std::vector<double>*, 3> groups{&r.counts.male, &r.counts.female, &r.counts.total};
        for (std::size_t k = 0; k < 3; ++k) {
            if (groups[k]->empty()) continue;
            const auto q = r.counts.quantiles(*groups[k]);
            report.count_quantiles[k] = {q[0], q[1], q[2]};
        }

        const auto finished = std::chrono::system_clock::now();
        write_text_file(tracker.add("run.log"),
                        fmt::format("started {:%Y-%m-%dT%H:%M:%S}\nfinished {:%Y-%m-%dT%H:%M:%S}\n",
                                    fmt::gmtime(std::chrono::system_clock::to_time_t(started)),
                                    fmt::gmtime(std::chrono::system_clock::to_time_t(finished))),
                        kOrigin);
    } catch (...) {
        tracker.rollback();
        throw;
    }
    report.outputs = tracker.files();
    return report;
}

std::vector<fs::path> emit_figures(const RunResults& results, const fs::path& directory) {
    std::vector<fs::path> written;
    auto emit = [&](const std::string& name, const std::string& title, const std::vector<svg::Panel>& panels) {
        const auto path = directory / name;
        write_text_file(path, svg::render(title, panels), kOrigin);
        written.push_back(path);
    };
    const auto& s = results.surfaces;
    const auto& data = results.data;

    auto two_panels = [&](auto make) {
        std::vector<svg::Panel> panels;
        for (Sex sex : kSexes) panels.push_back(make(sex));
        return panels;
    };
    auto sex_title = [](Sex sex) { return sex == Sex::male ? std::string("Men") : std::string("Women"); };

    emit("fig1_prevalence.svg", "Observed prevalence and fitted curves", two_panels([&](Sex sex) {
             return fit_panel(data.prevalence, s.prevalence, sex, true, 15.0, 200.0, sex_title(sex), "Prevalence", false);
         }));
    emit("fig2_incidence.svg", "Observed incidence and fitted curves", two_panels([&](Sex sex) {
             return fit_panel(data.incidence, s.incidence, sex, true, 0.0, 200.0, sex_title(sex),
                              "Incidence (per person-year)", false);
         }));
    emit("fig3_mrr.svg", "Mortality rate ratio and fitted curves", two_panels([&](Sex sex) {
             return fit_panel(data.mrr, s.mrr, sex, false, 0.0, 200.0, sex_title(sex), "Mortality rate ratio", false);
         }));
    emit("fig4_mortality.svg", "General mortality and fitted curves", two_panels([&](Sex sex) {
             if (data.mortality.empty()) {
                 svg::Panel panel;
                 panel.title = sex_title(sex);
                 panel.x_label = "Age (years)";
                 panel.y_label = "Mortality (per person-year)";
                 panel.log_y = true;
                 svg::Series line;
                 line.css_class = "fitted";
                 line.x = age_range(15.0, 95.0, 0.5);
                 for (double a : line.x) line.y.push_back(s.mortality.eval(s.mid_year(), a, sex));
                 panel.series.push_back(std::move(line));
                 return panel;
             }
             return fit_panel(data.mortality, s.mortality, sex, false, 15.0, 95.0, sex_title(sex),
                              "Mortality (per person-year)", true);
         }));

    const auto& d = results.draws;
    emit("fig5_fpr.svg", "False-positive ratio by age (per mil)", two_panels([&](Sex sex) {
             svg::Panel panel;
             panel.title = sex_title(sex);
             panel.x_label = "Age (years)";
             panel.y_label = "FPR (per mil)";
             panel.y_from_zero = true;
             const auto& color = kSexColors[static_cast<std::size_t>(sex_index(sex))];

             svg::Band band;
             band.color = color;
             svg::Series median;
             median.color = color;
             median.css_class = "median";
             median.width = 2.5;
             median.label = "median";
             for (const auto& row : results.fpr_quantiles) {
                 if (row.sex != sex || row.used == 0) continue;
                 band.x.push_back(row.age);
                 band.lo.push_back(1000.0 * row.q025);
                 band.hi.push_back(1000.0 * row.q975);
                 median.x.push_back(row.age);
                 median.y.push_back(1000.0 * row.q50);
             }

             std::vector<std::size_t> complete;
             for (std::size_t k = 0; k < d.n_draws(); ++k) {
                 bool ok = true;
                 for (std::size_t a = 0; a < d.n_ages() && ok; ++a) ok = d.stored(k, sex, a);
                 if (ok) complete.push_back(k);
             }
             if (complete.size() > kSpaghettiCap) {
                 std::partial_sort(complete.begin(), complete.begin() + kSpaghettiCap, complete.end(),
                                   [](std::size_t x, std::size_t y) {
                                       return counter_uniform(kPlotSeed, x) < counter_uniform(kPlotSeed, y);
                                   });
                 complete.resize(kSpaghettiCap);
                 std::sort(complete.begin(), complete.end());
             }
             for (std::size_t k : complete) {
                 svg::Series line;
                 line.css_class = "draw";
                 line.color = color;
                 line.width = 0.6;
                 line.opacity = 0.15;
                 line.x = d.ages();
                 for (std::size_t a = 0; a < d.n_ages(); ++a) line.y.push_back(1000.0 * d.fpr(k, sex, a));
                 panel.series.push_back(std::move(line));
             }
             if (!band.x.empty()) panel.bands.push_back(std::move(band));
             panel.series.push_back(std::move(median));
             return panel;
         }));

    emit("fig6_counts.svg", "False-positive diagnoses per draw (thousands)", two_panels([&](Sex sex) {
             svg::Panel panel;
             panel.title = sex_title(sex);
             panel.x_label = "False-positive diagnoses (thousands)";
             panel.y_label = "Draws";
             const auto& values = sex == Sex::male ? results.counts.male : results.counts.female;
             std::vector<double> thousands;
             thousands.reserve(values.size());
             for (double v : values) thousands.push_back(v / 1000.0);
             panel.bars.push_back(svg::histogram(thousands, 40, kSexColors[static_cast<std::size_t>(sex_index(sex))]));
             return panel;
         }));
    return written;
}

}  // namespace claimsfpr
