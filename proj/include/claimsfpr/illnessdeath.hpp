#pragma once

#include <cstdint>
#include <functional>
#include <string>

namespace claimsfpr {

/// Corrections divide by the Youden index se + sp - 1; it must exceed this.
inline constexpr double kMinYouden = 1e-6;

/// Sensitivity and specificity of coded diagnoses against the gold standard.
class AccuracyPair {
public:
    /// Throws unless se, sp in (0, 1] and se + sp - 1 >= kMinYouden.
    AccuracyPair(double se, double sp);

    double se() const { return se_; }
    double sp() const { return sp_; }
    double fpr() const { return 1.0 - sp_; }
    double fnr() const { return 1.0 - se_; }
    double youden() const { return se_ + sp_ - 1.0; }

private:
    double se_;
    double sp_;
};

/// State of the illness-death model at one (t, a): true prevalence, incidence
/// among the healthy, general mortality and the diseased/healthy mortality
/// rate ratio.
struct EpiPoint {
    double p = 0.0;
    double i = 0.0;
    double m = 0.0;
    double R = 1.0;
};

/// Rate of change of prevalence along a birth cohort:
/// (1 - p) * (i - m p (R - 1) / (1 + p (R - 1))).
double pde_rhs(const EpiPoint& state);

/// True proportion from an apparent one: (obs - 1 + sp) / (se + sp - 1).
/// May leave [0, 1]; callers decide admissibility.
double correct_proportion(double observed, const AccuracyPair& accuracy);

/// Apparent proportion under imperfect accuracy: se x + (1 - sp)(1 - x).
double apparent_proportion(double true_value, const AccuracyPair& accuracy);

/// Rate fields as functions of (calendar time, age).
struct RateFields {
    std::function<double(double, double)> incidence;
    std::function<double(double, double)> mortality;
    std::function<double(double, double)> ratio;
};

struct CharacteristicResult {
    double p = 0.0;
    bool clamped = false;
};

/// Classical RK4 integration of dp/dtau = pde_rhs along t = t0 + tau,
/// a = a0 + tau for tau in [0, delta]. The result is clamped to [0, 1] and
/// the clamp is reported. Throws on a non-finite field value.
CharacteristicResult integrate_characteristic(double p0, const RateFields& fields, double t0, double a0,
                                              double delta, int steps);

/// Observed quantities along one characteristic segment of length delta
/// centred on the grid age: apparent prevalence at (t1, a - delta/2) and
/// (t2, a + delta/2), apparent incidence, mortality and MRR at (t_mid, a).
struct CharacteristicInputs {
    double p_obs_start = 0.0;
    double p_obs_end = 0.0;
    double i_obs_mid = 0.0;
    double m_mid = 0.0;
    double R_mid = 1.0;
    double delta = 1.0;
};

/// Discretised prevalence balance for a candidate specificity:
/// (p2 - p1) / delta - rhs(p_mid, i_mid, m, R) with all prevalences and the
/// incidence corrected by (se, sp) and p_mid = (p1 + p2) / 2.
/// Requires se + sp - 1 > 0.
double specificity_residual(double sp, double se, const CharacteristicInputs& inputs);

/// Corrected midpoint prevalence (p1 + p2) / 2 for a given (se, sp).
double corrected_midpoint_prevalence(const CharacteristicInputs& inputs, double se, double sp);

namespace solve_flags {
inline constexpr std::uint8_t none = 0;
inline constexpr std::uint8_t no_root = 1u << 0;
inline constexpr std::uint8_t multiple_roots = 1u << 1;
inline constexpr std::uint8_t clamped_correction = 1u << 2;
inline constexpr std::uint8_t capped = 1u << 3;
}  // namespace solve_flags

/// "none" or the set flags joined by '|'.
std::string describe_flags(std::uint8_t flags);
std::uint8_t parse_flags(const std::string& text);

struct SpecificitySolution {
    double sp = 1.0;
    std::uint8_t flags = solve_flags::none;
    int sign_changes = 0;

    bool solved() const { return (flags & solve_flags::no_root) == 0; }
};

inline constexpr double kSpecificityCeiling = 1.0 - 1e-9;

/// Lower end of the admissible specificity interval for a sensitivity.
double specificity_floor(double se);

/// Root of specificity_residual nearest to 1 within
/// [specificity_floor(se), 1 - 1e-9]. Scans the interval for sign changes,
/// then refines the bracket nearest to 1 with TOMS 748. Candidates where
/// 1 + p_mid (R - 1) < min(1, R) / 2 are inadmissible.
SpecificitySolution solve_specificity(double se, const CharacteristicInputs& inputs);

}  // namespace claimsfpr
