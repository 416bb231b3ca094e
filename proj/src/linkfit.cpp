#include "claimsfpr/linkfit.hpp"

#include "claimsfpr/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace claimsfpr {

namespace {

constexpr const char* kOrigin = "linkfit";

double cube_pos(double x) { return x > 0.0 ? x * x * x : 0.0; }

// Type-7 sample quantile of sorted data.
double sorted_quantile(const std::vector<double>& sorted, double prob) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string_view kind_name(BasisKind kind) {
    return kind == BasisKind::natural_cubic_spline ? "natural_cubic_spline" : "polynomial";
}

BasisKind parse_kind(const std::string& s) {
    if (s == "natural_cubic_spline") return BasisKind::natural_cubic_spline;
    if (s == "polynomial") return BasisKind::polynomial;
    throw Error(kOrigin, fmt::format("unknown basis kind '{}'", s));
}

Link parse_link(const std::string& s) {
    if (s == "logit") return Link::logit;
    if (s == "log") return Link::log;
    throw Error(kOrigin, fmt::format("unknown link '{}'", s));
}

FittedSurface fit_records(const std::vector<ObservationRecord>& records, Link link, BasisSpec basis,
                          const std::vector<AgeOverride>& overrides, std::string_view what) {
    std::vector<DesignPoint> points;
    std::vector<double> values;
    points.reserve(records.size());
    values.reserve(records.size());
    for (const auto& r : records) {
        points.push_back({static_cast<double>(r.year.value_or(0)), representative_age(r, overrides), r.sex});
        values.push_back(r.value);
    }
    if (points.empty()) throw Error(kOrigin, fmt::format("no {} records to fit", what));
    try {
        return fit_surface(points, values, basis, link);
    } catch (const Error& e) {
        throw Error(kOrigin, fmt::format("{} fit failed: {}", what, e.what()));
    }
}

std::vector<double> record_ages(const std::vector<ObservationRecord>& records,
                                const std::vector<AgeOverride>& overrides) {
    std::vector<double> ages;
    ages.reserve(records.size());
    for (const auto& r : records) ages.push_back(representative_age(r, overrides));
    return ages;
}

std::size_t distinct_years(const std::vector<ObservationRecord>& records) {
    std::set<int> years;
    for (const auto& r : records) years.insert(r.year.value_or(0));
    return years.size();
}

}  // namespace

std::string_view to_string(Link link) {
    return link == Link::logit ? "logit" : "log";
}

double link_forward(Link link, double x) {
    switch (link) {
        case Link::logit:
            if (!(x > 0.0 && x < 1.0)) throw Error(kOrigin, fmt::format("logit argument {} outside (0, 1)", x));
            return std::log(x / (1.0 - x));
        case Link::log:
            if (!(x > 0.0)) throw Error(kOrigin, fmt::format("log argument {} not positive", x));
            return std::log(x);
    }
    return 0.0;
}

double link_inverse(Link link, double y) {
    switch (link) {
        case Link::logit:
            if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
            return std::exp(y) / (1.0 + std::exp(y));
        case Link::log: return std::exp(y);
    }
    return 0.0;
}

std::vector<std::string> BasisSpec::column_names() const {
    std::vector<std::string> base{"(Intercept)"};
    for (int k = 1; k <= degree; ++k) {
        if (kind == BasisKind::natural_cubic_spline) {
            base.push_back(fmt::format("ns{}", k));
        } else {
            base.push_back(k == 1 ? std::string("a") : fmt::format("a^{}", k));
        }
    }
    std::vector<std::string> names;
    auto append_block = [&](std::string_view suffix) {
        for (const auto& b : base) {
            if (suffix.empty()) {
                names.push_back(b);
            } else if (b == "(Intercept)") {
                names.emplace_back(suffix.substr(1));
            } else {
                names.push_back(b + std::string(suffix));
            }
        }
    };
    append_block("");
    if (use_time) append_block(":t");
    if (use_sex) append_block(":s");
    if (use_time && use_sex) append_block(":t:s");
    return names;
}

void BasisSpec::validate() const {
    if (degree < 1) throw Error(kOrigin, fmt::format("basis degree/df {} must be at least 1", degree));
    if (kind == BasisKind::natural_cubic_spline) {
        if (knots.size() != static_cast<std::size_t>(degree) + 1) {
            throw Error(kOrigin, fmt::format("natural spline with df={} needs {} knots, got {}", degree, degree + 1,
                                             knots.size()));
        }
        for (std::size_t k = 1; k < knots.size(); ++k) {
            if (!(knots[k] > knots[k - 1])) throw Error(kOrigin, "spline knots must be strictly increasing");
        }
    }
}

BasisSpec natural_spline_spec(std::span<const double> data_ages, int df, bool use_time, bool use_sex,
                              double time_center) {
    if (data_ages.empty()) throw Error(kOrigin, "cannot place knots without data ages");
    if (df < 1) throw Error(kOrigin, fmt::format("degrees of freedom {} must be at least 1", df));
    std::vector<double> sorted(data_ages.begin(), data_ages.end());
    std::sort(sorted.begin(), sorted.end());

    BasisSpec spec;
    spec.kind = BasisKind::natural_cubic_spline;
    spec.degree = df;
    spec.use_time = use_time;
    spec.use_sex = use_sex;
    spec.time_center = time_center;
    spec.knots.push_back(sorted.front());
    for (int k = 1; k < df; ++k) {
        spec.knots.push_back(sorted_quantile(sorted, static_cast<double>(k) / df));
    }
    spec.knots.push_back(sorted.back());
    spec.validate();
    return spec;
}

BasisSpec polynomial_spec(int degree, bool use_time, bool use_sex, double time_center) {
    BasisSpec spec;
    spec.kind = BasisKind::polynomial;
    spec.degree = degree;
    spec.use_time = use_time;
    spec.use_sex = use_sex;
    spec.time_center = time_center;
    spec.validate();
    return spec;
}

// Truncated-power construction of the natural cubic spline on ages rescaled to
// the unit interval between the boundary knots: N_1 = u and
// N_{k+1} = d_k - d_{K-1} with d_k(u) = ((u - k_k)^3_+ - (u - k_K)^3_+) / (k_K - k_k).
std::vector<double> ns_basis(double age, const BasisSpec& spec) {
    const auto& knots = spec.knots;
    const std::size_t n_knots = knots.size();
    const double lo = knots.front();
    const double width = knots.back() - lo;
    const double u = (age - lo) / width;

    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(spec.degree));
    out.push_back(u);
    if (n_knots < 3) return out;

    const double last = 1.0;
    const double tail = cube_pos(u - last);
    auto d = [&](std::size_t k) {
        const double kk = (knots[k] - lo) / width;
        return (cube_pos(u - kk) - tail) / (last - kk);
    };
    const double d_last = d(n_knots - 2);
    for (std::size_t k = 0; k + 2 < n_knots; ++k) out.push_back(d(k) - d_last);
    return out;
}

Eigen::RowVectorXd design_row(const DesignPoint& point, const BasisSpec& spec) {
    const int nb = spec.base_columns();
    Eigen::RowVectorXd base(nb);
    base(0) = 1.0;
    if (spec.kind == BasisKind::natural_cubic_spline) {
        const auto b = ns_basis(point.age, spec);
        for (int k = 0; k < spec.degree; ++k) base(k + 1) = b[static_cast<std::size_t>(k)];
    } else {
        double power = 1.0;
        for (int k = 1; k <= spec.degree; ++k) {
            power *= point.age;
            base(k) = power;
        }
    }

    const double t = point.year - spec.time_center;
    const double s = point.sex == Sex::female ? 1.0 : 0.0;
    Eigen::RowVectorXd row(spec.columns());
    int block = 0;
    row.segment(nb * block++, nb) = base;
    if (spec.use_time) row.segment(nb * block++, nb) = base * t;
    if (spec.use_sex) row.segment(nb * block++, nb) = base * s;
    if (spec.use_time && spec.use_sex) row.segment(nb * block++, nb) = base * (t * s);
    return row;
}

Eigen::MatrixXd build_design(std::span<const DesignPoint> points, const BasisSpec& spec) {
    spec.validate();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(points.size()), spec.columns());
    for (std::size_t r = 0; r < points.size(); ++r) x.row(static_cast<Eigen::Index>(r)) = design_row(points[r], spec);
    return x;
}

LeastSquaresFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::string> column_names) {
    if (x.rows() != y.size()) throw Error(kOrigin, "design matrix and response differ in length");
    if (x.rows() < x.cols()) {
        throw Error(kOrigin, fmt::format("{} observations cannot identify {} coefficients", x.rows(), x.cols()));
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < x.cols()) {
        std::vector<std::string> dependent;
        for (Eigen::Index k = qr.rank(); k < x.cols(); ++k) {
            const auto col = qr.colsPermutation().indices()(k);
            dependent.push_back(static_cast<std::size_t>(col) < column_names.size()
                                    ? column_names[static_cast<std::size_t>(col)]
                                    : fmt::format("column {}", col));
        }
        throw Error(kOrigin, fmt::format("rank-deficient design (rank {} of {}); dependent columns: {}", qr.rank(),
                                         x.cols(), fmt::join(dependent, ", ")));
    }
    LeastSquaresFit fit;
    fit.coefficients = qr.solve(y);
    fit.rss = (y - x * fit.coefficients).squaredNorm();
    fit.residual_df = static_cast<int>(x.rows() - x.cols());
    return fit;
}

FittedSurface::FittedSurface(BasisSpec basis, Link link, Eigen::VectorXd coefficients, double rss, int residual_df)
    : basis_(std::move(basis)), link_(link), coefficients_(std::move(coefficients)), rss_(rss),
      residual_df_(residual_df) {
    basis_.validate();
    if (coefficients_.size() != basis_.columns()) {
        throw Error(kOrigin, fmt::format("{} coefficients for a design with {} columns", coefficients_.size(),
                                         basis_.columns()));
    }
}

double FittedSurface::eval_link(double year, double age, Sex sex) const {
    return design_row({year, age, sex}, basis_).dot(coefficients_);
}

double FittedSurface::eval(double year, double age, Sex sex) const {
    return link_inverse(link_, eval_link(year, age, sex));
}

nlohmann::json FittedSurface::to_json() const {
    nlohmann::json basis{
        {"kind", kind_name(basis_.kind)},
        {"degree", basis_.degree},
        {"knots", basis_.knots},
        {"use_time", basis_.use_time},
        {"use_sex", basis_.use_sex},
        {"time_center", basis_.time_center},
        {"columns", basis_.column_names()},
    };
    return {
        {"basis", basis},
        {"link", to_string(link_)},
        {"coefficients", std::vector<double>(coefficients_.data(), coefficients_.data() + coefficients_.size())},
        {"diagnostics", {{"rss", rss_}, {"residual_df", residual_df_}}},
    };
}

FittedSurface FittedSurface::from_json(const nlohmann::json& doc) {
    try {
        const auto& b = doc.at("basis");
        BasisSpec basis;
        basis.kind = parse_kind(b.at("kind").get<std::string>());
        basis.degree = b.at("degree").get<int>();
        basis.knots = b.value("knots", std::vector<double>{});
        basis.use_time = b.value("use_time", false);
        basis.use_sex = b.value("use_sex", true);
        basis.time_center = b.value("time_center", 0.0);
        const auto coef = doc.at("coefficients").get<std::vector<double>>();
        Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
        double rss = 0.0;
        int rdf = 0;
        if (doc.contains("diagnostics")) {
            rss = doc["diagnostics"].value("rss", 0.0);
            rdf = doc["diagnostics"].value("residual_df", 0);
        }
        return FittedSurface(std::move(basis), parse_link(doc.at("link").get<std::string>()), std::move(beta), rss,
                             rdf);
    } catch (const nlohmann::json::exception& e) {
        throw Error(kOrigin, fmt::format("malformed surface document: {}", e.what()));
    }
}

FittedSurface fit_surface(std::span<const DesignPoint> points, std::span<const double> values, const BasisSpec& basis,
                          Link link) {
    if (points.size() != values.size()) throw Error(kOrigin, "points and values differ in length");
    const Eigen::MatrixXd x = build_design(points, basis);
    Eigen::VectorXd y(static_cast<Eigen::Index>(values.size()));
    for (std::size_t k = 0; k < values.size(); ++k) y(static_cast<Eigen::Index>(k)) = link_forward(link, values[k]);
    const auto names = basis.column_names();
    auto fit = fit_ols(x, y, names);
    return FittedSurface(basis, link, std::move(fit.coefficients), fit.rss, fit.residual_df);
}

FittedSurface fit_prevalence(const Dataset& data, const FitOptions& options, double time_center) {
    std::vector<ObservationRecord> used;
    for (const auto& r : data.prevalence) {
        if (r.age_lo >= options.prevalence_min_age) used.push_back(r);
    }
    const auto ages = record_ages(used, options.age_overrides);
    if (ages.empty()) throw Error(kOrigin, "no prevalence records above the minimum fitting age");
    const auto spec = natural_spline_spec(ages, options.prevalence_df, true, true, time_center);
    return fit_records(used, Link::logit, spec, options.age_overrides, "prevalence");
}

FittedSurface fit_incidence(const Dataset& data, const FitOptions& options, double time_center) {
    const auto ages = record_ages(data.incidence, options.age_overrides);
    if (ages.empty()) throw Error(kOrigin, "no incidence records to fit");
    const bool use_time = distinct_years(data.incidence) > 1;
    const auto spec = natural_spline_spec(ages, options.incidence_df, use_time, true, time_center);
    return fit_records(data.incidence, Link::log, spec, options.age_overrides, "incidence");
}

FittedSurface fit_mortality(const Dataset& data, const FitOptions& options) {
    std::vector<ObservationRecord> used;
    for (const auto& r : data.mortality) {
        if (r.age_lo >= options.mortality_age_min && r.age_lo <= options.mortality_age_max) used.push_back(r);
    }
    return fit_records(used, Link::log, polynomial_spec(options.mortality_degree, false, true), options.age_overrides,
                       "mortality");
}

FittedSurface fit_mrr(const Dataset& data, const FitOptions& options) {
    const auto ages = record_ages(data.mrr, options.age_overrides);
    if (ages.empty()) throw Error(kOrigin, "no mortality rate ratio records to fit");
    const auto spec = natural_spline_spec(ages, options.mrr_df, false, true);
    return fit_records(data.mrr, Link::log, spec, options.age_overrides, "mortality rate ratio");
}

EpiSurfaces fit_epi_surfaces(const Dataset& data, const FitOptions& options,
                             const std::optional<FittedSurface>& mortality) {
    const auto years = data.survey_years();
    if (!years) throw Error(kOrigin, "prevalence must cover exactly two survey years");
    EpiSurfaces out;
    out.survey_year_start = years->first;
    out.survey_year_end = years->second;
    const double center = out.mid_year();
    out.prevalence = fit_prevalence(data, options, center);
    out.incidence = fit_incidence(data, options, center);
    out.mortality = mortality ? *mortality : fit_mortality(data, options);
    out.mrr = fit_mrr(data, options);
    return out;
}

nlohmann::json EpiSurfaces::to_json() const {
    return {
        {"survey_years", {survey_year_start, survey_year_end}},
        {"prevalence", prevalence.to_json()},
        {"incidence", incidence.to_json()},
        {"mortality", mortality.to_json()},
        {"mrr", mrr.to_json()},
    };
}

EpiSurfaces EpiSurfaces::from_json(const nlohmann::json& doc) {
    EpiSurfaces out;
    try {
        const auto years = doc.at("survey_years").get<std::vector<int>>();
        if (years.size() != 2) throw Error(kOrigin, "survey_years must hold two years");
        out.survey_year_start = years[0];
        out.survey_year_end = years[1];
    } catch (const nlohmann::json::exception& e) {
        throw Error(kOrigin, fmt::format("malformed surfaces document: {}", e.what()));
    }
    out.prevalence = FittedSurface::from_json(doc.at("prevalence"));
    out.incidence = FittedSurface::from_json(doc.at("incidence"));
    out.mortality = FittedSurface::from_json(doc.at("mortality"));
    out.mrr = FittedSurface::from_json(doc.at("mrr"));
    return out;
}

}  // namespace claimsfpr
