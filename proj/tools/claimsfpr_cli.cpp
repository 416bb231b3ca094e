// claimsfpr: false-positive ratio of chronic-disease diagnoses in aggregated
// claims data.
//
//   claimsfpr simulate --out synth/
//   claimsfpr run --data synth/ --out results/ --draws 100000 --seed 7
//   claimsfpr fit|estimate|aggregate|plot ...   (the stages of `run`)

#include "claimsfpr/aggregate.hpp"
#include "claimsfpr/error.hpp"
#include "claimsfpr/pipeline.hpp"
#include "claimsfpr/synthdata.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace claimsfpr;

namespace {

// "25,32.5,40" or "start:stop:step".
std::vector<double> parse_ages(const std::string& text) {
    auto number = [&](std::string_view s) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) {
            throw Error("cli", fmt::format("bad age '{}' in --ages", s));
        }
        return v;
    };
    std::vector<std::string_view> parts;
    const char sep = text.find(':') != std::string::npos ? ':' : ',';
    std::string_view view(text);
    while (true) {
        const auto pos = view.find(sep);
        parts.push_back(view.substr(0, pos));
        if (pos == std::string_view::npos) break;
        view.remove_prefix(pos + 1);
    }
    std::vector<double> ages;
    if (sep == ':') {
        if (parts.size() != 3) throw Error("cli", "--ages range needs start:stop:step");
        const double start = number(parts[0]), stop = number(parts[1]), step = number(parts[2]);
        if (!(step > 0.0)) throw Error("cli", "--ages step must be positive");
        for (int k = 0; start + k * step <= stop + 1e-9; ++k) ages.push_back(start + k * step);
    } else {
        for (auto p : parts) ages.push_back(number(p));
    }
    return ages;
}

struct Options {
    std::string data_dir;
    std::string out_dir = "claimsfpr_out";
    std::string surfaces;
    std::string draws_csv;
    std::string population;
    std::string ages;
    std::size_t draws = 100000;
    std::uint64_t seed = 20220225;
    double se_min = 0.50;
    double se_max = 0.999;
    unsigned workers = 0;
    int prevalence_df = 4;
    int incidence_df = 3;
    int mrr_df = 3;
    bool no_figures = false;
    double noise = 0.0;
};

void add_mc_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--draws", o.draws, "Number of sensitivity draws")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", o.seed, "Random seed");
    cmd->add_option("--se-min", o.se_min, "Lower end of the sensitivity range");
    cmd->add_option("--se-max", o.se_max, "Upper end of the sensitivity range");
    cmd->add_option("--ages", o.ages, "Estimation ages: 'a,b,c' or 'start:stop:step' (default 25:85:7.5)");
    cmd->add_option("--workers", o.workers, "Worker threads (0 = all cores)");
}

void add_fit_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--prevalence-df", o.prevalence_df, "Natural spline df for logit prevalence");
    cmd->add_option("--incidence-df", o.incidence_df, "Natural spline df for log incidence");
    cmd->add_option("--mrr-df", o.mrr_df, "Natural spline df for log mortality rate ratio");
}

RunConfig make_config(const Options& o) {
    RunConfig c;
    if (!o.data_dir.empty()) c.inputs = InputPaths::from_directory(o.data_dir);
    c.out_dir = o.out_dir;
    c.mc.n_draws = o.draws;
    c.mc.seed = o.seed;
    c.mc.se_min = o.se_min;
    c.mc.se_max = o.se_max;
    c.mc.workers = o.workers;
    if (!o.ages.empty()) c.mc.age_grid = parse_ages(o.ages);
    c.fit.prevalence_df = o.prevalence_df;
    c.fit.incidence_df = o.incidence_df;
    c.fit.mrr_df = o.mrr_df;
    c.figures = !o.no_figures;
    return c;
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cli", fmt::format("cannot open '{}'", path.string()));
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("cli", fmt::format("cannot parse '{}': {}", path.string(), e.what()));
    }
}

fs::path or_default(const std::string& value, const fs::path& fallback) {
    return value.empty() ? fallback : fs::path(value);
}

int cmd_simulate(const Options& o) {
    auto spec = reference_scenario();
    if (o.noise > 0.0) {
        spec.noise_denominator = o.noise;
        spec.seed = o.seed;
    }
    const auto scenario = generate_scenario(spec);
    write_scenario(scenario, o.out_dir);
    fmt::print("wrote reference scenario to {} (expected false positives: {:.1f})\n", o.out_dir,
               scenario.truth.false_positive_total);
    return 0;
}

int cmd_fit(const Options& o) {
    const auto config = make_config(o);
    const auto inputs = load_inputs(config.inputs);
    const auto surfaces = fit_stage(config, inputs);
    fs::create_directories(config.out_dir);
    const auto path = config.out_dir / "surfaces.json";
    write_text_file(path, surfaces.to_json().dump(2) + "\n", "linkfit");
    fmt::print("wrote {}\n", path.string());
    return 0;
}

int cmd_estimate(const Options& o) {
    const auto config = make_config(o);
    const auto surfaces = EpiSurfaces::from_json(read_json(or_default(o.surfaces, config.out_dir / "surfaces.json")));
    const auto draws = estimate_fpr_grid(config.mc, surfaces);
    fs::create_directories(config.out_dir);
    draws.write_csv(config.out_dir / "fpr_draws.csv");
    write_fpr_quantiles(config.out_dir / "fpr_quantiles.csv", fpr_quantiles(draws));
    fmt::print("wrote fpr_draws.csv and fpr_quantiles.csv to {}\n", config.out_dir.string());
    return 0;
}

int cmd_aggregate(const Options& o) {
    const auto config = make_config(o);
    const auto surfaces = EpiSurfaces::from_json(read_json(or_default(o.surfaces, config.out_dir / "surfaces.json")));
    const auto draws = FprDrawMatrix::read_csv(or_default(o.draws_csv, config.out_dir / "fpr_draws.csv"));
    fs::path population = o.population;
    if (population.empty()) {
        if (o.data_dir.empty()) throw Error("cli", "aggregate needs --population or --data");
        population = config.inputs.population;
    }
    const auto pop = population_curves(load_table(population, TableKind::population));
    const auto counts = count_distribution(draws, characteristic_grid(surfaces, draws.ages()), pop);
    fs::create_directories(config.out_dir);
    write_count_quantiles(config.out_dir / "counts_quantiles.csv", counts);
    write_count_draws(config.out_dir / "counts_draws.csv", counts);
    const auto q = counts.quantiles(counts.total);
    fmt::print("total false positives (thousands): {:.1f} [{:.1f}, {:.1f}]\n", q[1] / 1000, q[0] / 1000, q[2] / 1000);
    return 0;
}

int cmd_plot(const Options& o) {
    const auto config = make_config(o);
    if (o.data_dir.empty()) throw Error("cli", "plot needs --data for the observed points");
    const auto inputs = load_inputs(config.inputs);
    RunResults r;
    r.data = inputs.data;
    r.surfaces = EpiSurfaces::from_json(read_json(or_default(o.surfaces, config.out_dir / "surfaces.json")));
    r.draws = FprDrawMatrix::read_csv(or_default(o.draws_csv, config.out_dir / "fpr_draws.csv"));
    r.fpr_quantiles = fpr_quantiles(r.draws);
    r.counts = count_distribution(r.draws, characteristic_grid(r.surfaces, r.draws.ages()),
                                  population_curves(inputs.data.population));
    const auto dir = config.out_dir / "figures";
    fs::create_directories(dir);
    for (const auto& f : emit_figures(r, dir)) fmt::print("wrote {}\n", f.string());
    return 0;
}

int cmd_run(const Options& o) {
    if (o.data_dir.empty()) throw Error("cli", "run needs --data");
    const auto report = run_pipeline(make_config(o));
    const std::array<const char*, 3> labels{"male", "female", "total"};
    fmt::print("false-positive diagnoses (thousands): median [2.5%, 97.5%]\n");
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& q = report.count_quantiles[k];
        fmt::print("  {:<6} {:9.2f} [{:.2f}, {:.2f}]\n", labels[k], q[1] / 1000, q[0] / 1000, q[2] / 1000);
    }
    fmt::print("outputs in {}\n", o.out_dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Estimate false-positive diagnoses in aggregated claims data"};
    app.require_subcommand(1);
    Options o;

    auto* simulate = app.add_subcommand("simulate", "Write the reference synthetic scenario and its truth.json");
    simulate->add_option("--out", o.out_dir, "Output directory")->required();
    simulate->add_option("--seed", o.seed, "Seed for sampling noise");
    simulate->add_option("--noise", o.noise, "Binomial noise denominator (0 = none)");

    auto* fit = app.add_subcommand("fit", "Fit prevalence, incidence, mortality and MRR surfaces");
    fit->add_option("--data", o.data_dir, "Input directory with the CSV tables")->required();
    fit->add_option("--out", o.out_dir, "Output directory");
    fit->add_option("--ages", o.ages, "Estimation ages checked against the survey gap");
    add_fit_flags(fit, o);

    auto* estimate = app.add_subcommand("estimate", "Monte Carlo FPR estimation on the age grid");
    estimate->add_option("--surfaces", o.surfaces, "surfaces.json (default <out>/surfaces.json)");
    estimate->add_option("--out", o.out_dir, "Output directory");
    add_mc_flags(estimate, o);

    auto* aggregate = app.add_subcommand("aggregate", "Absolute false-positive counts and their quantiles");
    aggregate->add_option("--surfaces", o.surfaces, "surfaces.json (default <out>/surfaces.json)");
    aggregate->add_option("--draws-file", o.draws_csv, "fpr_draws.csv (default <out>/fpr_draws.csv)");
    aggregate->add_option("--population", o.population, "population.csv");
    aggregate->add_option("--data", o.data_dir, "Input directory (for population.csv)");
    aggregate->add_option("--out", o.out_dir, "Output directory");

    auto* plot = app.add_subcommand("plot", "Render the six SVG figures from a finished run");
    plot->add_option("--data", o.data_dir, "Input directory with the CSV tables")->required();
    plot->add_option("--out", o.out_dir, "Run output directory");
    plot->add_option("--surfaces", o.surfaces, "surfaces.json (default <out>/surfaces.json)");
    plot->add_option("--draws-file", o.draws_csv, "fpr_draws.csv (default <out>/fpr_draws.csv)");

    auto* run = app.add_subcommand("run", "ingest -> fit -> estimate -> aggregate -> report");
    run->add_option("--data", o.data_dir, "Input directory with the CSV tables")->required();
    run->add_option("--out", o.out_dir, "Output directory");
    run->add_flag("--no-figures", o.no_figures, "Skip SVG figures");
    add_mc_flags(run, o);
    add_fit_flags(run, o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(o);
        if (fit->parsed()) return cmd_fit(o);
        if (estimate->parsed()) return cmd_estimate(o);
        if (aggregate->parsed()) return cmd_aggregate(o);
        if (plot->parsed()) return cmd_plot(o);
        if (run->parsed()) return cmd_run(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
