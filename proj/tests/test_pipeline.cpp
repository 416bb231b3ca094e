#include "claimsfpr/error.hpp"
#include "claimsfpr/pipeline.hpp"
#include "claimsfpr/svg.hpp"
#include "claimsfpr/synthdata.hpp"
#include "oracles.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using namespace claimsfpr;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig config_for(const fs::path& data, const fs::path& out, std::size_t draws) {
    RunConfig c;
    c.inputs = InputPaths::from_directory(data);
    c.out_dir = out;
    c.mc.n_draws = draws;
    return c;
}

struct Rect {
    double x, y, w, h;
};

// Every polyline vertex and circle centre of each panel, checked against that
// panel's plot area.
int count_outside(const pt::ptree& svg_root, int& lines, const std::string& line_class) {
    int outside = 0;
    for (const auto& [tag, node] : svg_root) {
        if (tag != "g" || node.get<std::string>("<xmlattr>.class", "") != "panel") continue;
        Rect area{};
        bool have_area = false;
        for (const auto& [ctag, child] : node) {
            if (ctag == "rect" && child.get<std::string>("<xmlattr>.class", "") == "plot-area") {
                area = {child.get<double>("<xmlattr>.x"), child.get<double>("<xmlattr>.y"),
                        child.get<double>("<xmlattr>.width"), child.get<double>("<xmlattr>.height")};
                have_area = true;
            }
        }
        EXPECT_TRUE(have_area);
        auto inside = [&](double x, double y) {
            const double tol = 0.01;
            return x >= area.x - tol && x <= area.x + area.w + tol && y >= area.y - tol && y <= area.y + area.h + tol;
        };
        std::function<void(const pt::ptree&)> walk = [&](const pt::ptree& tree) {
            for (const auto& [ctag, child] : tree) {
                if (ctag == "polyline") {
                    if (child.get<std::string>("<xmlattr>.class", "") == line_class) ++lines;
                    std::istringstream pts(child.get<std::string>("<xmlattr>.points"));
                    std::string pair;
                    while (pts >> pair) {
                        const auto comma = pair.find(',');
                        if (!inside(std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1)))) ++outside;
                    }
                } else if (ctag == "circle") {
                    if (!inside(child.get<double>("<xmlattr>.cx"), child.get<double>("<xmlattr>.cy"))) ++outside;
                } else if (ctag == "g") {
                    walk(child);
                }
            }
        };
        walk(node);
    }
    return outside;
}

class PipelineTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new oracle::TempDir("pipeline");
        scenario_ = new Scenario(generate_scenario(reference_scenario()));
        write_scenario(*scenario_, data());
    }
    static void TearDownTestSuite() {
        delete dir_;
        delete scenario_;
    }
    static fs::path data() { return dir_->path() / "data"; }
    static fs::path root() { return dir_->path(); }

    static oracle::TempDir* dir_;
    static Scenario* scenario_;
};

oracle::TempDir* PipelineTest::dir_ = nullptr;
Scenario* PipelineTest::scenario_ = nullptr;

TEST_F(PipelineTest, EndToEndCountsMatchHiddenTruth) {
    auto cfg = config_for(data(), root() / "e2e", 400);
    cfg.mc.se_min = cfg.mc.se_max = 0.9;
    cfg.figures = false;
    const auto report = run_pipeline(cfg);
    const double truth = scenario_->truth.false_positive_total;
    EXPECT_NEAR(report.count_quantiles[2][1], truth, 0.005 * truth);
    for (int s = 0; s < 2; ++s) {
        const double t = scenario_->truth.false_positive_count[s];
        EXPECT_NEAR(report.count_quantiles[s][1], t, 0.01 * t);
    }
    for (const char* f : {"fpr_draws.csv", "fpr_quantiles.csv", "counts_quantiles.csv", "counts_draws.csv",
                          "run_metadata.json", "surfaces.json"}) {
        EXPECT_TRUE(fs::exists(cfg.out_dir / f)) << f;
    }
    const auto header = slurp(cfg.out_dir / "counts_quantiles.csv");
    EXPECT_EQ(header.rfind("sex,q025_thousands,q50_thousands,q975_thousands\n", 0), 0u);
    EXPECT_EQ(slurp(cfg.out_dir / "fpr_quantiles.csv").rfind("sex,age,q025,q50,q975\n", 0), 0u);
    EXPECT_EQ(slurp(cfg.out_dir / "fpr_draws.csv").rfind("draw,sex,age,se,fpr,flags\n", 0), 0u);
}

TEST_F(PipelineTest, MetadataRecordsConfiguration) {
    auto cfg = config_for(data(), root() / "meta", 200);
    cfg.mc.seed = 77;
    cfg.figures = false;
    const auto report = run_pipeline(cfg);
    std::ifstream in(cfg.out_dir / "run_metadata.json");
    const auto meta = nlohmann::json::parse(in);
    EXPECT_EQ(meta, report.metadata);
    EXPECT_EQ(meta.at("monte_carlo").at("seed").get<std::uint64_t>(), 77u);
    EXPECT_EQ(meta.at("monte_carlo").at("n_draws").get<std::size_t>(), 200u);
    EXPECT_EQ(meta.at("fit").at("prevalence_df").get<int>(), 4);
    EXPECT_TRUE(meta.contains("count_exclusions"));
    EXPECT_TRUE(meta.contains("solver_flags"));
    EXPECT_TRUE(meta.at("extrapolation").contains("rule"));
    EXPECT_EQ(meta.at("inputs").at("mortality").at("sha256").get<std::string>(),
              file_fingerprint(data() / "mortality.csv"));
    EXPECT_EQ(meta.at("inputs").at("mortality").at("sha256").get<std::string>().size(), 64u);
}

TEST_F(PipelineTest, MissingMortalityLeavesNoOutputs) {
    const auto broken = root() / "nomort";
    fs::create_directories(broken);
    for (const char* f : {"prevalence.csv", "incidence.csv", "mrr.csv", "population.csv"}) {
        fs::copy_file(data() / f, broken / f);
    }
    const auto out = root() / "nomort_out";
    try {
        run_pipeline(config_for(broken, out, 50));
        FAIL() << "expected failure";
    } catch (const Error& e) {
        EXPECT_EQ(e.origin(), "datamodel");
        EXPECT_NE(std::string(e.what()).find("mortality"), std::string::npos);
    }
    EXPECT_FALSE(fs::exists(out));
}

TEST_F(PipelineTest, FailureAfterStartRemovesPartialOutputs) {
    auto cfg = config_for(data(), root() / "badgrid", 50);
    cfg.mc.age_grid = {25, 28, 31};
    EXPECT_THROW(run_pipeline(cfg), Error);
    EXPECT_FALSE(fs::exists(cfg.out_dir));
}

TEST_F(PipelineTest, MortalityFitDocumentReplacesTable) {
    const auto alt = root() / "mortfit";
    fs::create_directories(alt);
    for (const char* f : {"prevalence.csv", "incidence.csv", "mrr.csv", "population.csv"}) {
        fs::copy_file(data() / f, alt / f);
    }
    const auto surfaces = fit_epi_surfaces(scenario_->data, FitOptions{});
    std::ofstream(alt / "mortality_fit.json") << surfaces.mortality.to_json().dump();

    auto a = config_for(data(), root() / "mortfit_a", 100);
    auto b = config_for(alt, root() / "mortfit_b", 100);
    a.figures = b.figures = false;
    const auto ra = run_pipeline(a);
    const auto rb = run_pipeline(b);
    EXPECT_NEAR(ra.count_quantiles[2][1], rb.count_quantiles[2][1], 1e-6 * ra.count_quantiles[2][1]);
}

TEST_F(PipelineTest, RepeatedRunsAreByteIdentical) {
    auto a = config_for(data(), root() / "det_a", 500);
    auto b = config_for(data(), root() / "det_b", 500);
    a.mc.workers = 1;
    b.mc.workers = 4;
    run_pipeline(a);
    run_pipeline(b);
    for (const char* f : {"fpr_draws.csv", "fpr_quantiles.csv", "counts_quantiles.csv", "counts_draws.csv",
                          "run_metadata.json", "surfaces.json"}) {
        EXPECT_EQ(slurp(a.out_dir / f), slurp(b.out_dir / f)) << f;
    }
    for (const char* f : {"fig1_prevalence.svg", "fig5_fpr.svg", "fig6_counts.svg"}) {
        EXPECT_EQ(slurp(a.out_dir / "figures" / f), slurp(b.out_dir / "figures" / f)) << f;
    }
}

TEST_F(PipelineTest, FiguresAreWellFormedAndUnclipped) {
    auto cfg = config_for(data(), root() / "figs", 1500);
    const auto report = run_pipeline(cfg);
    const std::vector<std::string> names{"fig1_prevalence", "fig2_incidence", "fig3_mrr",
                                         "fig4_mortality", "fig5_fpr", "fig6_counts"};
    for (const auto& name : names) {
        const auto path = cfg.out_dir / "figures" / (name + ".svg");
        ASSERT_TRUE(fs::exists(path)) << name;
        pt::ptree tree;
        ASSERT_NO_THROW(pt::read_xml(path.string(), tree)) << name;
        const auto& root = tree.get_child("svg");
        EXPECT_EQ(root.get<std::string>("<xmlattr>.version"), "1.1");
        EXPECT_EQ(root.get<std::string>("<xmlattr>.xmlns"), "http://www.w3.org/2000/svg");
        int lines = 0;
        EXPECT_EQ(count_outside(root, lines, "draw"), 0) << name;
        if (name == "fig5_fpr") {
            // One spaghetti set per sex.
            EXPECT_GT(lines, 0);
            EXPECT_LE(lines, 2 * static_cast<int>(kSpaghettiCap));
        }
    }
}

TEST_F(PipelineTest, SpaghettiCappedRegardlessOfDraws) {
    auto cfg = config_for(data(), root() / "cap", 4000);
    run_pipeline(cfg);
    pt::ptree tree;
    pt::read_xml((cfg.out_dir / "figures" / "fig5_fpr.svg").string(), tree);
    const auto& root = tree.get_child("svg");
    for (const auto& [tag, panel] : root) {
        if (tag != "g") continue;
        int lines = 0;
        for (const auto& [ctag, child] : panel) {
            if (ctag == "polyline" && child.get<std::string>("<xmlattr>.class", "") == "draw") ++lines;
        }
        EXPECT_LE(lines, static_cast<int>(kSpaghettiCap));
        EXPECT_GE(lines, static_cast<int>(kSpaghettiCap) - 50);
    }
}

TEST(Svg, RenderEnclosesAllData) {
    svg::Panel p;
    p.title = "t & <escaped>";
    p.series.push_back({{0, 1, 2}, {-5, 1e3, 7}});
    p.bands.push_back({{0, 2}, {-10, -9}, {2000, 1999}});
    const std::vector<svg::Panel> panels{p};
    const auto doc = svg::render("demo", panels);
    std::istringstream in(doc);
    pt::ptree tree;
    ASSERT_NO_THROW(pt::read_xml(in, tree));
    int lines = 0;
    EXPECT_EQ(count_outside(tree.get_child("svg"), lines, "series"), 0);
    EXPECT_EQ(lines, 1);
}

TEST(Svg, HistogramCountsEveryValue) {
    const std::vector<double> v{1, 2, 2, 3, 4, 4, 4, 10};
    const auto bars = svg::histogram(v, 3, "#000");
    ASSERT_EQ(bars.edges.size(), 4u);
    double total = 0;
    for (double c : bars.counts) total += c;
    EXPECT_EQ(total, 8.0);
    EXPECT_EQ(bars.edges.front(), 1.0);
    EXPECT_EQ(bars.edges.back(), 10.0);
}

}  // namespace
