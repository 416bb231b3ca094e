#include "claimsfpr/error.hpp"
#include "claimsfpr/montecarlo.hpp"
#include "claimsfpr/synthdata.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numeric>

using namespace claimsfpr;

namespace {

const EpiSurfaces& reference_surfaces() {
    static const EpiSurfaces surfaces = [] {
        FitOptions options;
        options.prevalence_df = 10;
        return fit_epi_surfaces(generate_scenario(reference_scenario()).data, options);
    }();
    return surfaces;
}

bool bit_identical(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(Sampler, DrawsStayInRange) {
    McConfig cfg;
    const auto se = sample_sensitivities(cfg);
    ASSERT_EQ(se.size(), cfg.n_draws);
    for (double v : se) {
        EXPECT_GE(v, 0.50);
        EXPECT_LE(v, 0.999);
    }
}

TEST(Sampler, SameSeedIsBitIdentical) {
    McConfig cfg;
    cfg.n_draws = 5000;
    EXPECT_TRUE(bit_identical(sample_sensitivities(cfg), sample_sensitivities(cfg)));
    auto other = cfg;
    other.seed += 1;
    EXPECT_FALSE(bit_identical(sample_sensitivities(cfg), sample_sensitivities(other)));
}

TEST(Sampler, MeanWithinNormalBound) {
    McConfig cfg;
    const auto se = sample_sensitivities(cfg);
    const double mean = std::accumulate(se.begin(), se.end(), 0.0) / static_cast<double>(se.size());
    const double width = cfg.se_max - cfg.se_min;
    const double sigma = width / std::sqrt(12.0);
    EXPECT_LE(std::abs(mean - 0.5 * (cfg.se_min + cfg.se_max)), 4 * sigma / std::sqrt(static_cast<double>(se.size())));
}

TEST(Sampler, DrawDependsOnlyOnSeedAndIndex) {
    McConfig small;
    small.n_draws = 100;
    McConfig large = small;
    large.n_draws = 1000;
    const auto a = sample_sensitivities(small);
    const auto b = sample_sensitivities(large);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], b[k]);
    for (std::uint64_t c = 0; c < 1000; ++c) {
        const double u = counter_uniform(7, c);
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(McConfigValidation, RejectsBadConfigs) {
    McConfig cfg;
    EXPECT_NO_THROW(cfg.validate(6.0));
    auto bad = cfg;
    bad.se_min = 0.4;
    EXPECT_THROW(bad.validate(6.0), Error);
    bad = cfg;
    bad.se_max = 1.0;
    EXPECT_THROW(bad.validate(6.0), Error);
    bad = cfg;
    bad.se_min = 0.9;
    bad.se_max = 0.8;
    EXPECT_THROW(bad.validate(6.0), Error);
    bad = cfg;
    bad.n_draws = 0;
    EXPECT_THROW(bad.validate(6.0), Error);
    bad = cfg;
    bad.age_grid = {25, 30, 35};
    EXPECT_THROW(bad.validate(6.0), Error);
    EXPECT_EQ(default_age_grid().size(), 9u);
    EXPECT_DOUBLE_EQ(default_age_grid()[1], 32.5);
}

TEST(FprGrid, DegenerateRangeAtGenerativeSensitivityRecoversFpr) {
    McConfig cfg;
    cfg.n_draws = 4;
    cfg.se_min = cfg.se_max = 0.9;
    const auto m = estimate_fpr_grid(cfg, reference_surfaces());
    for (std::size_t d = 0; d < cfg.n_draws; ++d) {
        for (Sex s : kSexes) {
            for (std::size_t a = 0; a < m.n_ages(); ++a) {
                ASSERT_TRUE(m.stored(d, s, a));
                EXPECT_NEAR(m.fpr(d, s, a), 0.005, 1e-4) << to_string(s) << " " << m.ages()[a];
            }
        }
    }
}

TEST(FprGrid, DiscreteConsistentCellsRecoverFprWithinTightTolerance) {
    std::array<std::vector<CharacteristicInputs>, 2> cells;
    for (int s = 0; s < 2; ++s) {
        for (double a : default_age_grid()) {
            const double p1 = 0.002 * std::exp(0.05 * (a - 22));
            cells[s].push_back(oracle::consistent_inputs(std::min(p1, 0.3), 0.01 * std::exp(0.04 * (a - 60)),
                                                         std::exp(-10 + 0.09 * a), 3 * std::pow(2.0, -(a - 20) / 70),
                                                         6.0, 0.9, 0.995));
        }
    }
    McConfig cfg;
    cfg.n_draws = 3;
    cfg.se_min = cfg.se_max = 0.9;
    const auto m = estimate_fpr_grid(cfg, cells);
    for (Sex s : kSexes) {
        for (std::size_t a = 0; a < m.n_ages(); ++a) EXPECT_NEAR(m.fpr(1, s, a), 0.005, 1e-6);
    }
}

TEST(FprGrid, WorkerCountDoesNotChangeOutput) {
    McConfig cfg;
    cfg.n_draws = 3000;
    cfg.workers = 1;
    const auto one = estimate_fpr_grid(cfg, reference_surfaces());
    for (unsigned w : {2u, 3u, 8u}) {
        cfg.workers = w;
        const auto many = estimate_fpr_grid(cfg, reference_surfaces());
        EXPECT_TRUE(bit_identical(one.raw_fpr(), many.raw_fpr())) << w << " workers";
        EXPECT_EQ(one.raw_flags(), many.raw_flags());
        EXPECT_TRUE(bit_identical(one.se_draws(), many.se_draws()));
    }
}

TEST(FprGrid, RemovingADrawLeavesOthersUntouched) {
    McConfig cfg;
    cfg.n_draws = 200;
    const auto full = estimate_fpr_grid(cfg, reference_surfaces());
    cfg.n_draws = 150;
    const auto part = estimate_fpr_grid(cfg, reference_surfaces());
    for (std::size_t d = 0; d < part.n_draws(); ++d) {
        for (Sex s : kSexes) {
            for (std::size_t a = 0; a < part.n_ages(); ++a) {
                const double x = full.fpr(d, s, a), y = part.fpr(d, s, a);
                EXPECT_TRUE(x == y || (std::isnan(x) && std::isnan(y)));
            }
        }
    }
}

TEST(FprGrid, StoredValuesInRangeAndCountsAddUp) {
    McConfig cfg;
    cfg.n_draws = 2000;
    const auto m = estimate_fpr_grid(cfg, reference_surfaces());
    for (Sex s : kSexes) {
        for (std::size_t a = 0; a < m.n_ages(); ++a) {
            std::size_t stored = 0;
            for (std::size_t d = 0; d < m.n_draws(); ++d) {
                if (!m.stored(d, s, a)) {
                    EXPECT_TRUE(std::isnan(m.fpr(d, s, a)));
                    continue;
                }
                ++stored;
                EXPECT_GE(m.fpr(d, s, a), 0.0);
                EXPECT_LE(m.fpr(d, s, a), kFprCap);
            }
            EXPECT_EQ(stored + m.excluded(s, a), m.n_draws());
            EXPECT_EQ(m.cell_values(s, a).size(), stored);
        }
    }
}

TEST(FprGrid, CsvRoundTrip) {
    McConfig cfg;
    cfg.n_draws = 300;
    const auto m = estimate_fpr_grid(cfg, reference_surfaces());
    oracle::TempDir dir("mc");
    const auto path = dir.path() / "fpr_draws.csv";
    m.write_csv(path);
    const auto back = FprDrawMatrix::read_csv(path);
    ASSERT_EQ(back.n_draws(), m.n_draws());
    EXPECT_EQ(back.ages(), m.ages());
    EXPECT_EQ(back.raw_flags(), m.raw_flags());
    EXPECT_TRUE(bit_identical(back.se_draws(), m.se_draws()));
    for (std::size_t k = 0; k < m.raw_fpr().size(); ++k) {
        const double x = m.raw_fpr()[k], y = back.raw_fpr()[k];
        EXPECT_TRUE(x == y || (std::isnan(x) && std::isnan(y)));
    }
}

TEST(FprGrid, CharacteristicInputsUseSegmentEndpoints) {
    const auto& s = reference_surfaces();
    const auto in = characteristic_inputs(s, Sex::female, 55.0);
    EXPECT_DOUBLE_EQ(in.delta, 6.0);
    EXPECT_DOUBLE_EQ(in.p_obs_start, s.prevalence.eval(2009, 52.0, Sex::female));
    EXPECT_DOUBLE_EQ(in.p_obs_end, s.prevalence.eval(2015, 58.0, Sex::female));
    EXPECT_DOUBLE_EQ(in.i_obs_mid, s.incidence.eval(2012, 55.0, Sex::female));
    EXPECT_DOUBLE_EQ(in.m_mid, s.mortality.eval(2012, 55.0, Sex::female));
    EXPECT_DOUBLE_EQ(in.R_mid, s.mrr.eval(2012, 55.0, Sex::female));
}
