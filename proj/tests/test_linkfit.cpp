#include "claimsfpr/error.hpp"
#include "claimsfpr/linkfit.hpp"
#include "claimsfpr/synthdata.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace claimsfpr;

namespace {

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int k = 0; k < n; ++k) v[k] = a + (b - a) * k / (n - 1);
    return v;
}

BasisSpec age_only_spline(int df) {
    const auto ages = linspace(17.5, 92.5, 16);
    return natural_spline_spec(ages, df, false, false);
}

}  // namespace

TEST(Link, Examples) {
    EXPECT_EQ(link_forward(Link::logit, 0.5), 0.0);
    EXPECT_EQ(link_forward(Link::log, 1.0), 0.0);
    EXPECT_NEAR(link_forward(Link::logit, 0.1), std::log(1.0 / 9.0), 1e-15);
    EXPECT_NEAR(link_forward(Link::logit, 0.1), -2.197224577, 1e-9);
    EXPECT_EQ(link_inverse(Link::logit, 0.0), 0.5);
    EXPECT_EQ(link_inverse(Link::log, 0.0), 1.0);
}

TEST(Link, DomainViolationsThrow) {
    EXPECT_THROW(link_forward(Link::logit, 0.0), Error);
    EXPECT_THROW(link_forward(Link::logit, 1.0), Error);
    EXPECT_THROW(link_forward(Link::log, 0.0), Error);
    EXPECT_THROW(link_forward(Link::log, -1.0), Error);
}

TEST(Link, RoundTrip) {
    for (double x : {0.01, 0.3, 0.97}) EXPECT_NEAR(link_inverse(Link::logit, link_forward(Link::logit, x)), x, 1e-12);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(1e-6, 1.0 - 1e-6);
    for (int k = 0; k < 2000; ++k) {
        const double x = unit(rng);
        EXPECT_NEAR(link_inverse(Link::logit, link_forward(Link::logit, x)), x, 1e-12);
        const double y = std::exp(std::uniform_real_distribution<double>(-20, 5)(rng));
        EXPECT_NEAR(link_inverse(Link::log, link_forward(Link::log, y)), y, 1e-12 * std::max(1.0, y));
    }
}

TEST(Link, InverseLogitStaysInUnitInterval) {
    for (double y = -700; y <= 700; y += 7) {
        const double p = link_inverse(Link::logit, y);
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        EXPECT_TRUE(std::isfinite(p));
    }
}

TEST(NaturalSpline, SecondDifferenceVanishesBeyondBoundary) {
    const auto spec = age_only_spline(5);
    const double h = 0.5;
    for (double a : {spec.knots.back() + 10.0, spec.knots.front() - 10.0}) {
        const auto lo = ns_basis(a - h, spec), mid = ns_basis(a, spec), hi = ns_basis(a + h, spec);
        for (std::size_t j = 0; j < mid.size(); ++j) {
            EXPECT_NEAR((hi[j] - 2 * mid[j] + lo[j]) / (h * h), 0.0, 1e-8) << "column " << j << " at " << a;
        }
    }
}

TEST(NaturalSpline, C2AcrossInteriorKnots) {
    const auto spec = age_only_spline(5);
    const double h = 1e-3;
    auto d1 = [&](double a, std::size_t j) {
        return (ns_basis(a + h, spec)[j] - ns_basis(a - h, spec)[j]) / (2 * h);
    };
    auto d2 = [&](double a, std::size_t j) {
        return (ns_basis(a + h, spec)[j] - 2 * ns_basis(a, spec)[j] + ns_basis(a - h, spec)[j]) / (h * h);
    };
    const double eps = 0.01;
    for (std::size_t k = 1; k + 1 < spec.knots.size(); ++k) {
        const double knot = spec.knots[k];
        for (std::size_t j = 0; j < static_cast<std::size_t>(spec.degree); ++j) {
            // Left and right limits agree to the order of the offset.
            EXPECT_NEAR(d1(knot - eps, j), d1(knot + eps, j), 1e-6 + 1e-2 * eps) << "knot " << knot;
            EXPECT_NEAR(d2(knot - eps, j), d2(knot + eps, j), 1e-6 + 1e-1 * eps) << "knot " << knot;
            // Straddling the knot directly.
            EXPECT_NEAR(d2(knot, j), 0.5 * (d2(knot - eps, j) + d2(knot + eps, j)), 1e-4);
        }
    }
}

TEST(NaturalSpline, LinearFunctionsAreExact) {
    const auto spec = age_only_spline(4);
    std::vector<DesignPoint> pts;
    std::vector<double> y;
    for (double a = 10; a <= 100; a += 2.5) {
        pts.push_back({2012, a, Sex::male});
        y.push_back(0.3 - 0.02 * a);
    }
    const auto x = build_design(pts, spec);
    Eigen::VectorXd yy = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    const auto fit = fit_ols(x, yy);
    EXPECT_LE(std::sqrt(fit.rss), 1e-10 * yy.norm());
}

TEST(NaturalSpline, SurfaceIsLinearInAgeBeyondBoundaryOnLinkScale) {
    const auto data = generate_scenario(reference_scenario()).data;
    FitOptions options;
    const auto surface = fit_prevalence(data, options, 2012.0);
    const auto& knots = surface.basis().knots;
    for (Sex s : kSexes) {
        for (double a : {knots.front() - 8.0, knots.back() + 8.0, knots.back() + 30.0}) {
            const double h = 0.5;
            const double d2 = surface.eval_link(2009, a - h, s) - 2 * surface.eval_link(2009, a, s) +
                              surface.eval_link(2009, a + h, s);
            EXPECT_NEAR(d2, 0.0, 1e-8);
        }
    }
}

TEST(Design, ColumnCounts) {
    const auto ages = linspace(15, 95, 20);
    EXPECT_EQ(natural_spline_spec(ages, 4, true, true).columns(), 20);
    EXPECT_EQ(polynomial_spec(2, false, true).columns(), 6);
    EXPECT_EQ(natural_spline_spec(ages, 3, false, true).columns(), 8);

    const auto names = polynomial_spec(2, false, true).column_names();
    ASSERT_EQ(names.size(), 6u);
    EXPECT_EQ(names[0], "(Intercept)");
    EXPECT_EQ(names[1], "a");
    EXPECT_EQ(names[2], "a^2");
    EXPECT_EQ(names[3], "s");

    const auto x = build_design(std::vector<DesignPoint>{{2012, 3.0, Sex::female}}, polynomial_spec(2, false, true));
    ASSERT_EQ(x.cols(), 6);
    const std::vector<double> expected{1, 3, 9, 1, 3, 9};
    for (int j = 0; j < 6; ++j) EXPECT_DOUBLE_EQ(x(0, j), expected[j]);
}

TEST(Design, TimeIsCentered) {
    const auto spec = polynomial_spec(1, true, false, 2012.0);
    const auto row = design_row({2015, 10.0, Sex::male}, spec);
    ASSERT_EQ(row.size(), 4);
    // {1, a} x {1, t}
    EXPECT_DOUBLE_EQ(row(0), 1.0);
    EXPECT_DOUBLE_EQ(row(1), 10.0);
    EXPECT_DOUBLE_EQ(row(2), 3.0);
    EXPECT_DOUBLE_EQ(row(3), 30.0);
}

TEST(LeastSquares, ThreePointLine) {
    Eigen::MatrixXd x(3, 2);
    x << 1, 1, 1, 2, 1, 3;
    Eigen::VectorXd y(3);
    y << 3, 5, 7;
    const auto fit = fit_ols(x, y);
    EXPECT_NEAR(fit.coefficients(0), 1.0, 1e-12);
    EXPECT_NEAR(fit.coefficients(1), 2.0, 1e-12);
    EXPECT_EQ(fit.residual_df, 1);
}

TEST(LeastSquares, ResidualsOrthogonalToColumns) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    const auto spec = natural_spline_spec(linspace(15, 95, 17), 4, true, true, 2012.0);
    std::vector<DesignPoint> pts;
    for (int year : {2009, 2015}) {
        for (Sex s : kSexes) {
            for (double a = 17.5; a <= 92.5; a += 5) pts.push_back({static_cast<double>(year), a, s});
        }
    }
    const auto x = build_design(pts, spec);
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index r = 0; r < y.size(); ++r) y(r) = n01(rng);
    const auto fit = fit_ols(x, y);
    const Eigen::VectorXd r = y - x * fit.coefficients;
    EXPECT_LE((x.transpose() * r).cwiseAbs().maxCoeff(), 1e-8 * y.norm());
    EXPECT_NEAR(fit.rss, r.squaredNorm(), 1e-10 * y.squaredNorm());
}

TEST(LeastSquares, ScaleEquivariant) {
    Eigen::MatrixXd x(6, 3);
    x << 1, 0.1, 0.01, 1, 0.5, 0.25, 1, 1.0, 1.0, 1, 1.7, 2.89, 1, 2.2, 4.84, 1, 3.0, 9.0;
    Eigen::VectorXd y(6);
    y << 0.3, -1.2, 2.5, 0.7, 1.1, -0.4;
    const auto base = fit_ols(x, y);
    for (double c : {-3.0, 1e-3, 7.5, 1e4}) {
        const auto scaled = fit_ols(x, (c * y).eval());
        for (int j = 0; j < 3; ++j) {
            EXPECT_NEAR(scaled.coefficients(j), c * base.coefficients(j), 1e-12 * std::abs(c) * base.coefficients.cwiseAbs().maxCoeff());
        }
    }
}

TEST(LeastSquares, PermutationInvariant) {
    const auto data = generate_scenario(reference_scenario()).data;
    std::vector<DesignPoint> pts;
    std::vector<double> y;
    for (const auto& r : data.prevalence) {
        if (r.age_lo < 15) continue;
        pts.push_back({static_cast<double>(*r.year), representative_age(r), r.sex});
        y.push_back(r.value);
    }
    std::vector<double> ages;
    for (const auto& p : pts) ages.push_back(p.age);
    const auto spec4 = natural_spline_spec(ages, 4, true, true, 2012.0);
    const auto base = fit_surface(pts, y, spec4, Link::logit);

    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(3);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<DesignPoint> pts2;
    std::vector<double> y2;
    for (auto k : order) {
        pts2.push_back(pts[k]);
        y2.push_back(y[k]);
    }
    const auto shuffled = fit_surface(pts2, y2, spec4, Link::logit);
    for (Eigen::Index j = 0; j < base.coefficients().size(); ++j) {
        EXPECT_NEAR(base.coefficients()(j), shuffled.coefficients()(j), 1e-10);
    }
}

TEST(LeastSquares, RankDeficiencyNamesColumns) {
    Eigen::MatrixXd x(4, 3);
    x << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8;
    Eigen::VectorXd y(4);
    y << 1, 2, 3, 4;
    const std::vector<std::string> names{"(Intercept)", "a", "twice_a"};
    try {
        fit_ols(x, y, names);
        FAIL() << "expected rank deficiency";
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("rank"), std::string::npos) << msg;
        const auto listed = msg.substr(msg.find("dependent columns:"));
        EXPECT_TRUE(listed.find("twice_a") != std::string::npos || listed.find(" a") != std::string::npos) << msg;
    }
}

TEST(LeastSquares, TooFewRowsThrow) {
    Eigen::MatrixXd x(2, 3);
    x.setOnes();
    EXPECT_THROW(fit_ols(x, Eigen::VectorXd::Ones(2)), Error);
}

TEST(Surface, ReproducesExactlyRepresentableTarget) {
    const auto spec = polynomial_spec(2, false, true);
    std::vector<DesignPoint> pts;
    std::vector<double> y;
    for (Sex s : kSexes) {
        for (double a = 20; a <= 90; a += 5) {
            pts.push_back({2012, a, s});
            y.push_back(std::exp(-9.0 + 0.08 * a + 1e-4 * a * a + (s == Sex::female ? -0.3 : 0.0)));
        }
    }
    const auto surface = fit_surface(pts, y, spec, Link::log);
    for (std::size_t k = 0; k < pts.size(); ++k) {
        EXPECT_NEAR(surface.eval(2012, pts[k].age, pts[k].sex), y[k], 1e-10 * y[k]);
    }
}

TEST(Surface, GompertzQuadraticFitIsMonotone) {
    std::vector<DesignPoint> pts;
    std::vector<double> y;
    for (Sex s : kSexes) {
        for (int a = 15; a <= 95; ++a) {
            pts.push_back({2012, a + 0.5, s});
            y.push_back(std::exp(-10.0 + 0.1 * (a + 0.5)));
        }
    }
    const auto surface = fit_surface(pts, y, polynomial_spec(2, false, true), Link::log);
    for (Sex s : kSexes) {
        double prev = surface.eval(2012, 40, s);
        for (double a = 40.25; a <= 90; a += 0.25) {
            const double v = surface.eval(2012, a, s);
            EXPECT_GT(v, prev) << a;
            prev = v;
        }
    }
}

TEST(Surface, LogitSurfaceStaysInUnitInterval) {
    const auto data = generate_scenario(reference_scenario()).data;
    const auto surface = fit_prevalence(data, FitOptions{}, 2012.0);
    for (Sex s : kSexes) {
        for (double a = 0; a <= 110; a += 0.5) {
            for (double t : {2009.0, 2012.0, 2015.0}) {
                const double v = surface.eval(t, a, s);
                EXPECT_GT(v, 0.0);
                EXPECT_LT(v, 1.0);
            }
        }
    }
}

TEST(Surface, JsonRoundTrip) {
    const auto data = generate_scenario(reference_scenario()).data;
    const auto surfaces = fit_epi_surfaces(data, FitOptions{});
    const auto back = EpiSurfaces::from_json(nlohmann::json::parse(surfaces.to_json().dump()));
    EXPECT_EQ(back.survey_year_start, 2009);
    EXPECT_EQ(back.survey_year_end, 2015);
    for (Sex s : kSexes) {
        for (double a = 10; a <= 100; a += 3.7) {
            EXPECT_EQ(back.prevalence.eval(2011, a, s), surfaces.prevalence.eval(2011, a, s));
            EXPECT_EQ(back.incidence.eval(2012, a, s), surfaces.incidence.eval(2012, a, s));
            EXPECT_EQ(back.mortality.eval(2012, a, s), surfaces.mortality.eval(2012, a, s));
            EXPECT_EQ(back.mrr.eval(2012, a, s), surfaces.mrr.eval(2012, a, s));
        }
    }
    EXPECT_EQ(back.prevalence.basis().knots, surfaces.prevalence.basis().knots);
}

TEST(Surface, DefaultSpecsMatchTheirRoles) {
    const auto data = generate_scenario(reference_scenario()).data;
    const auto s = fit_epi_surfaces(data, FitOptions{});
    EXPECT_EQ(s.prevalence.basis().columns(), 20);
    EXPECT_EQ(s.prevalence.link(), Link::logit);
    EXPECT_EQ(s.incidence.link(), Link::log);
    EXPECT_EQ(s.mortality.basis().kind, BasisKind::polynomial);
    EXPECT_EQ(s.mortality.basis().columns(), 6);
    EXPECT_EQ(s.mrr.basis().columns(), 8);
}

TEST(BasisSpec, InvalidSpecsRejected) {
    BasisSpec spec;
    spec.degree = 0;
    EXPECT_THROW(spec.validate(), Error);
    spec.degree = 3;
    spec.knots = {10, 30, 20, 80};
    EXPECT_THROW(spec.validate(), Error);
}
