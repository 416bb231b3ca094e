#include "claimsfpr/illnessdeath.hpp"

#include "claimsfpr/error.hpp"

#include <boost/math/tools/toms748_solve.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace claimsfpr {

namespace {

constexpr const char* kOrigin = "illnessdeath";

// Residuals below this are roots.
constexpr double kResidualTolerance = 1e-12;
constexpr double kBracketTolerance = 1e-10;
constexpr int kScanPoints = 64;
constexpr double kScanFprFloor = 1e-9;
constexpr double kDenominatorMargin = 0.5;

struct ResidualEval {
    double g = 0.0;
    bool valid = false;
};

struct Corrected {
    double p1, p2, p_mid, i_mid;
};

Corrected correct_all(const CharacteristicInputs& in, double se, double sp) {
    const double c = se + sp - 1.0;
    const double p1 = (in.p_obs_start - 1.0 + sp) / c;
    const double p2 = (in.p_obs_end - 1.0 + sp) / c;
    return {p1, p2, 0.5 * (p1 + p2), (in.i_obs_mid - 1.0 + sp) / c};
}

// The mortality term's denominator 1 + p (R - 1) lies in [min(1, R), max(1, R)]
// for p in [0, 1] but reaches zero once the corrected prevalence strays far
// enough, and the residual diverges there. Points where it drops below half
// its physical minimum are inadmissible, which keeps pole-induced sign
// changes out of the scan.
ResidualEval evaluate(double sp, double se, const CharacteristicInputs& in) {
    const auto c = correct_all(in, se, sp);
    const double denom = 1.0 + c.p_mid * (in.R_mid - 1.0);
    if (!(denom >= kDenominatorMargin * std::min(1.0, in.R_mid))) return {};
    const double rhs = (1.0 - c.p_mid) * (c.i_mid - in.m_mid * c.p_mid * (in.R_mid - 1.0) / denom);
    const double g = (c.p2 - c.p1) / in.delta - rhs;
    return {g, std::isfinite(g)};
}

void check_field(double value, const char* name, double t, double a) {
    if (!std::isfinite(value)) {
        throw Error(kOrigin, fmt::format("non-finite {} at t={}, a={}", name, t, a));
    }
}

}  // namespace

AccuracyPair::AccuracyPair(double se, double sp) : se_(se), sp_(sp) {
    if (!(se > 0.0 && se <= 1.0) || !(sp > 0.0 && sp <= 1.0)) {
        throw Error(kOrigin, fmt::format("accuracy (se={}, sp={}) outside (0, 1]", se, sp));
    }
    if (!(se + sp - 1.0 >= kMinYouden)) {
        throw Error(kOrigin, fmt::format("Youden index {} of (se={}, sp={}) is not positive", se + sp - 1.0, se, sp));
    }
}

double pde_rhs(const EpiPoint& s) {
    const double excess = s.R - 1.0;
    return (1.0 - s.p) * (s.i - s.m * s.p * excess / (1.0 + s.p * excess));
}

double correct_proportion(double observed, const AccuracyPair& accuracy) {
    return (observed - 1.0 + accuracy.sp()) / accuracy.youden();
}

double apparent_proportion(double true_value, const AccuracyPair& accuracy) {
    return accuracy.se() * true_value + accuracy.fpr() * (1.0 - true_value);
}

CharacteristicResult integrate_characteristic(double p0, const RateFields& fields, double t0, double a0, double delta,
                                              int steps) {
    if (steps < 1) throw Error(kOrigin, "integration needs at least one step");
    if (!(p0 >= 0.0 && p0 <= 1.0)) throw Error(kOrigin, fmt::format("initial prevalence {} outside [0, 1]", p0));
    const double h = delta / steps;

    auto rate = [&](double tau, double p) {
        const double t = t0 + tau;
        const double a = a0 + tau;
        const double i = fields.incidence(t, a);
        const double m = fields.mortality(t, a);
        const double r = fields.ratio(t, a);
        check_field(i, "incidence", t, a);
        check_field(m, "mortality", t, a);
        check_field(r, "mortality rate ratio", t, a);
        return pde_rhs({p, i, m, r});
    };

    double p = p0;
    for (int k = 0; k < steps; ++k) {
        const double tau = k * h;
        const double k1 = rate(tau, p);
        const double k2 = rate(tau + 0.5 * h, p + 0.5 * h * k1);
        const double k3 = rate(tau + 0.5 * h, p + 0.5 * h * k2);
        const double k4 = rate(tau + h, p + h * k3);
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    CharacteristicResult out{p, false};
    if (p < 0.0 || p > 1.0) {
        out.p = std::clamp(p, 0.0, 1.0);
        out.clamped = true;
    }
    return out;
}

double specificity_residual(double sp, double se, const CharacteristicInputs& inputs) {
    const auto c = correct_all(inputs, se, sp);
    const double excess = inputs.R_mid - 1.0;
    const double rhs =
        (1.0 - c.p_mid) * (c.i_mid - inputs.m_mid * c.p_mid * excess / (1.0 + c.p_mid * excess));
    return (c.p2 - c.p1) / inputs.delta - rhs;
}

double corrected_midpoint_prevalence(const CharacteristicInputs& inputs, double se, double sp) {
    return correct_all(inputs, se, sp).p_mid;
}

std::string describe_flags(std::uint8_t flags) {
    if (flags == solve_flags::none) return "none";
    std::string out;
    auto add = [&](std::uint8_t bit, const char* name) {
        if (flags & bit) {
            if (!out.empty()) out += '|';
            out += name;
        }
    };
    add(solve_flags::no_root, "no_root");
    add(solve_flags::multiple_roots, "multiple_roots");
    add(solve_flags::clamped_correction, "clamped_correction");
    add(solve_flags::capped, "capped");
    return out;
}

std::uint8_t parse_flags(const std::string& text) {
    if (text.empty() || text == "none") return solve_flags::none;
    std::uint8_t flags = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('|', start);
        if (end == std::string::npos) end = text.size();
        const auto token = text.substr(start, end - start);
        if (token == "no_root") flags |= solve_flags::no_root;
        else if (token == "multiple_roots") flags |= solve_flags::multiple_roots;
        else if (token == "clamped_correction") flags |= solve_flags::clamped_correction;
        else if (token == "capped") flags |= solve_flags::capped;
        else throw Error(kOrigin, fmt::format("unknown flag '{}'", token));
        start = end + 1;
    }
    return flags;
}

double specificity_floor(double se) {
    return std::max(0.5, 1.0 - se + kMinYouden);
}

SpecificitySolution solve_specificity(double se, const CharacteristicInputs& inputs) {
    SpecificitySolution out;
    const double floor = specificity_floor(se);
    if (!(floor < kSpecificityCeiling) || !(inputs.delta > 0.0)) {
        out.flags = solve_flags::no_root;
        return out;
    }

    // Scan from sp = 1 downwards, log-spaced in the false-positive ratio so the
    // epidemiologically relevant region near sp = 1 is resolved finely.
    std::array<double, kScanPoints + 2> sps{};
    std::array<ResidualEval, kScanPoints + 2> gs{};
    sps[0] = 1.0;
    const double fpr_max = 1.0 - floor;
    const double log_lo = std::log(kScanFprFloor);
    const double log_span = std::log(fpr_max) - log_lo;
    for (int j = 0; j <= kScanPoints; ++j) {
        const double fpr = j == kScanPoints ? fpr_max : std::exp(log_lo + log_span * j / kScanPoints);
        sps[static_cast<std::size_t>(j) + 1] = 1.0 - fpr;
    }
    sps.back() = floor;
    for (std::size_t j = 0; j < sps.size(); ++j) gs[j] = evaluate(sps[j], se, inputs);

    std::vector<std::pair<double, double>> brackets;  // (lo, hi) in sp
    std::vector<double> exact_roots;
    for (std::size_t j = 0; j < sps.size(); ++j) {
        if (!gs[j].valid) continue;
        if (std::abs(gs[j].g) < kResidualTolerance) {
            exact_roots.push_back(sps[j]);
            continue;
        }
        if (j + 1 < sps.size() && gs[j + 1].valid && std::abs(gs[j + 1].g) >= kResidualTolerance &&
            std::signbit(gs[j].g) != std::signbit(gs[j + 1].g)) {
            brackets.emplace_back(sps[j + 1], sps[j]);
        }
    }
    out.sign_changes = static_cast<int>(brackets.size() + exact_roots.size());
    if (out.sign_changes == 0) {
        out.flags = solve_flags::no_root;
        return out;
    }
    if (out.sign_changes > 1) out.flags |= solve_flags::multiple_roots;

    // Candidates are visited top-down, so the first one found is nearest to 1.
    const double best_exact = exact_roots.empty() ? -1.0 : exact_roots.front();
    const double best_bracket_hi = brackets.empty() ? -1.0 : brackets.front().second;
    double root = 0.0;
    if (best_exact >= best_bracket_hi) {
        root = best_exact;
    } else {
        auto [lo, hi] = brackets.front();
        auto f = [&](double sp) {
            const double g = evaluate(sp, se, inputs).g;
            return std::abs(g) < kResidualTolerance ? 0.0 : g;
        };
        auto tol = [](double a, double b) { return std::abs(b - a) < kBracketTolerance; };
        std::uintmax_t max_iter = 200;
        const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, max_iter);
        root = 0.5 * (a + b);
    }
    out.sp = std::min(root, kSpecificityCeiling);

    const auto c = correct_all(inputs, se, out.sp);
    auto outside = [](double x) { return x < 0.0 || x > 1.0; };
    if (outside(c.p1) || outside(c.p2) || outside(c.i_mid)) out.flags |= solve_flags::clamped_correction;
    return out;
}

}  // namespace claimsfpr
