#pragma once

#include "claimsfpr/datamodel.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace claimsfpr {

enum class Link { logit, log };

std::string_view to_string(Link link);

/// logit(x) = ln(x / (1 - x)) on (0, 1); log(x) on (0, inf).
double link_forward(Link link, double x);
double link_inverse(Link link, double y);

enum class BasisKind { natural_cubic_spline, polynomial };

/// Basis in age, optionally crossed with centered calendar time and sex.
///
/// For splines `degree` is the degrees of freedom and `knots` holds the
/// boundary knots first and last with the `degree - 1` interior knots in
/// between. For polynomials `degree` is the polynomial degree and `knots` is
/// empty. The column layout is the full tensor expansion
/// {1, b_1(a), ..., b_df(a)} x {1, t} x {1, s}.
struct BasisSpec {
    BasisKind kind = BasisKind::natural_cubic_spline;
    int degree = 3;
    std::vector<double> knots;
    bool use_time = false;
    bool use_sex = true;
    double time_center = 0.0;

    int age_columns() const { return degree; }
    int base_columns() const { return degree + 1; }
    int columns() const { return base_columns() * (use_time ? 2 : 1) * (use_sex ? 2 : 1); }
    std::vector<std::string> column_names() const;

    /// Throws on an invalid spec (non-increasing knots, df < 1, ...).
    void validate() const;
};

/// Natural spline spec with boundary knots at the data extremes and interior
/// knots at equally spaced quantiles of the data ages.
BasisSpec natural_spline_spec(std::span<const double> data_ages, int df, bool use_time, bool use_sex,
                              double time_center = 0.0);

BasisSpec polynomial_spec(int degree, bool use_time, bool use_sex, double time_center = 0.0);

/// Natural cubic spline basis values (no intercept column, `spec.degree` of
/// them). Linear beyond the boundary knots.
std::vector<double> ns_basis(double age, const BasisSpec& spec);

struct DesignPoint {
    double year = 0.0;
    double age = 0.0;
    Sex sex = Sex::male;
};

Eigen::RowVectorXd design_row(const DesignPoint& point, const BasisSpec& spec);
Eigen::MatrixXd build_design(std::span<const DesignPoint> points, const BasisSpec& spec);

struct LeastSquaresFit {
    Eigen::VectorXd coefficients;
    double rss = 0.0;
    int residual_df = 0;
};

/// Least squares by column-pivoted Householder QR. Throws naming the
/// linearly dependent columns when X is rank deficient.
LeastSquaresFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        std::span<const std::string> column_names = {});

class FittedSurface {
public:
    FittedSurface() = default;
    FittedSurface(BasisSpec basis, Link link, Eigen::VectorXd coefficients, double rss, int residual_df);

    const BasisSpec& basis() const { return basis_; }
    Link link() const { return link_; }
    const Eigen::VectorXd& coefficients() const { return coefficients_; }
    double rss() const { return rss_; }
    int residual_df() const { return residual_df_; }

    /// Value on the link scale.
    double eval_link(double year, double age, Sex sex) const;
    /// Value on the natural scale.
    double eval(double year, double age, Sex sex) const;

    nlohmann::json to_json() const;
    static FittedSurface from_json(const nlohmann::json& doc);

private:
    BasisSpec basis_;
    Link link_ = Link::log;
    Eigen::VectorXd coefficients_;
    double rss_ = 0.0;
    int residual_df_ = 0;
};

FittedSurface fit_surface(std::span<const DesignPoint> points, std::span<const double> values,
                          const BasisSpec& basis, Link link);

struct FitOptions {
    int prevalence_df = 4;
    int incidence_df = 3;
    int mrr_df = 3;
    int mortality_degree = 2;
    double prevalence_min_age = 15.0;
    double mortality_age_min = 15.0;
    double mortality_age_max = 95.0;
    std::vector<AgeOverride> age_overrides;
};

/// The four fitted inputs of the estimator together with the survey years.
/// The mortality and MRR surfaces carry no time dependence.
struct EpiSurfaces {
    FittedSurface prevalence;
    FittedSurface incidence;
    FittedSurface mortality;
    FittedSurface mrr;
    int survey_year_start = 0;
    int survey_year_end = 0;

    double gap() const { return static_cast<double>(survey_year_end - survey_year_start); }
    double mid_year() const { return 0.5 * (survey_year_start + survey_year_end); }

    nlohmann::json to_json() const;
    static EpiSurfaces from_json(const nlohmann::json& doc);
};

FittedSurface fit_prevalence(const Dataset& data, const FitOptions& options, double time_center);
FittedSurface fit_incidence(const Dataset& data, const FitOptions& options, double time_center);
FittedSurface fit_mortality(const Dataset& data, const FitOptions& options);
FittedSurface fit_mrr(const Dataset& data, const FitOptions& options);

/// Fits all four surfaces. Calendar time is centered at the midpoint of the
/// two prevalence years. When `mortality` is given it replaces the fit from
/// the mortality table.
EpiSurfaces fit_epi_surfaces(const Dataset& data, const FitOptions& options,
                             const std::optional<FittedSurface>& mortality = std::nullopt);

}  // namespace claimsfpr
