#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mhdlayer/core_fields.hpp"
#include "mhdlayer/ideal_states.hpp"
#include "mhdlayer/layer_correctors.hpp"
#include "mhdlayer/mhd_solver.hpp"

namespace mhdlayer {

enum class EpsLaw { equal, shifted, custom };

std::string to_string(EpsLaw l);
EpsLaw eps_law_from_string(const std::string& s);

// eps -> (eps1, eps2): equal (eps, eps), shifted (eps, eps + eps^(alpha+1)), or an explicit table.
struct EpsilonFamily {
    EpsLaw law = EpsLaw::equal;
    double alpha = 0.6;
    double kappa = 2.0;
    std::vector<std::array<double, 3>> table;  // rows (eps, eps1, eps2) for the custom law

    std::pair<double, double> eval(double eps) const;
    std::string name() const;
};

struct AssumptionRow {
    double eps = 0, eps1 = 0, eps2 = 0;
    double expr1 = 0;  // (eps1 + eps2) / sqrt(eps)
    double expr2 = 0;  // (eps1 - eps2)^2 / (sqrt(eps) eps (eps1 + eps2))
    double expr3 = 0;  // (eps1 - eps2)^2 / (eps (eps1 + eps2)) / min(eps1, eps2)
};

struct AssumptionReport {
    std::vector<AssumptionRow> rows;
    bool expr1_ok = false, expr2_ok = false, expr3_ok = false;
    std::string message;
    bool pass() const { return expr1_ok && expr2_ok && expr3_ok; }
};

// Evaluates the three ratios along a decreasing eps grid spanning at least two decades.
AssumptionReport check_assumption_2_1(const EpsilonFamily& family, const std::vector<double>& eps_grid);
// Log-spaced grid from eps_max down `decades` decades with `per_decade` points each.
std::vector<double> assumption_grid(double eps_max, int decades = 3, int per_decade = 4);

struct SideCondition {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool satisfied = false;
};

struct BetaReport {
    double eps = 0, eps1 = 0, eps2 = 0, kappa = 0;
    double beta0 = 0, beta1 = 0, beta2 = 0, beta3 = 0, beta4 = 0;
    double betabar0 = 0, betabar1 = 0, betabar2 = 0;
    std::vector<SideCondition> side_conditions;
    std::vector<std::string> footnotes;
};

// The eight beta formulas with all constants set to 1.
BetaReport beta_values(double eps, double eps1, double eps2, double kappa);
// beta_values plus side conditions, each bounded by 10x its value at eps_max.
BetaReport beta_report(const EpsilonFamily& family, double eps, double eps_max);

double predict_linf_bound(const BetaReport& br, double eps1, double eps2);

// Squared-L2 bound shapes (constant 1) for the two limits.
double inviscid_l2sq_bound(double eps, double eps1, double eps2, double kappa);
double diffusion_l2sq_bound(double eps2, double tau);

struct ErrorNorms {
    double raw_l2 = 0;
    double corrected_l2 = 0;
    double corrected_linf = 0;
    double elsasser_l2 = 0;
};

ErrorNorms error_norms(const MhdState& s, const IdealState& ideal, const CorrectorSet* cs);

struct DerivativeNorms {
    double dt_l2 = 0, dx_l2 = 0, dtdx_l2 = 0;
};

// Sup over interior snapshots of ||d_t R||, ||d_x R||, ||d_t d_x R|| with R = (u_R, b_R).
DerivativeNorms derivative_error_norms(const std::vector<MhdState>& trajectory, const IdealState& ideal,
                                       const CorrectorSet* cs);

// Remainder fields with a discretely divergence-free reference: u - P(u0 + uB), b - P(b0 + bB).
std::pair<VectorField, VectorField> remainder_fields(const MhdState& s, const IdealState& ideal,
                                                     const CorrectorSet* cs);

enum class BudgetFamily { J, K, I };
std::string to_string(BudgetFamily f);
BudgetFamily budget_family_from_string(const std::string& s);
int budget_arity(BudgetFamily f);

struct BudgetReport {
    BudgetFamily family = BudgetFamily::J;
    double t = 0.0;
    std::vector<double> terms;
    std::string term_name(int i) const;
};

struct BudgetParams {
    double eps = 0, eps1 = 0, eps2 = 0;
};

// J and K: `ideal` and `cs` describe the inviscid decomposition. I: `reference` is the eps2 = 0 state at
// the same time and `cs` its magnetic corrector; `ideal` is unused.
BudgetReport energy_budget(const MhdState& s, const IdealState* ideal, const CorrectorSet* cs,
                           BudgetFamily family, const BudgetParams& prm, const MhdState* reference = nullptr);

// Left side of the budget identity from the remainder fields: dissipation part only.
double remainder_dissipation(const MhdState& s, const IdealState& ideal, const CorrectorSet* cs,
                             const BudgetParams& prm);

struct AnisoCheck {
    double lhs = 0, rhs = 0;
};
AnisoCheck anisotropic_linf_check(const ScalarField& f);

struct RateFit {
    std::vector<std::pair<double, double>> pairs;
    double slope = 0, intercept = 0, r2 = 0;
    double predicted_slope = 0;
    bool pass = false;
    double margin = 0;  // slope - (predicted - 0.05)
};

RateFit fit_rate(const std::vector<std::pair<double, double>>& pairs, double predicted_slope);

// Elsasser envelope: lhs(t) = ||(u_R - s b_R)(t)||^2 + (1 - delta)(eps1 + eps2) int_0^t ||grad(u_R - s b_R)||^2,
// rhs(t) = C [eps^kappa + k (1 + t) / sqrt(eps)] + k G(t), k = (eps1 - eps2)^2 / (4 delta (eps1 + eps2)),
// G(t) = int_0^t ||grad u_R||^2 + ||grad b_R||^2.
struct EnvelopeSample {
    double t = 0, lhs = 0, base = 0, grad_term = 0;
};

constexpr double kEnvelopeDelta = 0.25;
constexpr double kEnvelopeMargin = 2.0;

class EnvelopeTracker {
public:
    EnvelopeTracker(const IdealState& ideal, const CorrectorSet* cs, double eps, double eps1, double eps2,
                    double kappa);
    void observe(const MhdState& s);
    const std::vector<EnvelopeSample>& samples() const { return samples_; }
    // Smallest C with lhs <= C base + grad_term on every sample.
    double calibrate() const;
    bool holds(double C) const;

private:
    const IdealState* ideal_;
    const CorrectorSet* cs_;
    double eps_, eps1_, eps2_, kappa_;
    double t_prev_ = 0, gw_prev_ = 0, ga_prev_ = 0, int_w_ = 0, int_all_ = 0;
    bool first_ = true;
    std::vector<EnvelopeSample> samples_;
};

struct StudyRow {
    double eps = 0, eps1 = 0, eps2 = 0;
    double nu_star = 0;
    double raw_l2_sup = 0, corrected_l2_sup = 0, corrected_linf_sup = 0, elsasser_l2_sup = 0;
    double err_l2_sup = 0;
    double predicted_bound = 0;
    std::vector<EnvelopeSample> envelope;
    std::vector<EnergyDiag> diagnostics;
};

struct InviscidStudyConfig {
    EpsilonFamily family;
    std::vector<double> eps_list;
    IdealState state;
    double T = 0.25;
    GridPtr grid;
    double dt = 2.5e-3;
    double cfl_limit = 0.5;
    int cadence = 20;
    std::uint64_t seed = 0;
    bool perturb = true;
    CorrectorMode mode = CorrectorMode::exact_exponential;
    double s_shift = 1.0;
    int jobs = 1;
};

struct InviscidStudyResult {
    AssumptionReport assumption;
    std::vector<StudyRow> rows;
    RateFit fit;
    double envelope_C = 0;
    bool envelope_ok = false;
    bool linf_monotone = false;
};

InviscidStudyResult run_inviscid_limit_study(const InviscidStudyConfig& cfg);

struct DiffusionStudyConfig {
    double eps1 = 1e-2;
    std::vector<double> eps2_list;
    double theta = 0.1;
    double tau = 0.0;
    IdealState state;
    double T = 0.25;
    GridPtr grid;
    double dt = 2.5e-3;
    double cfl_limit = 0.5;
    int cadence = 20;
    std::uint64_t seed = 0;
    bool perturb = true;
    double kappa = 4.0;
    double perturb_eps = 1e-2;
    int jobs = 1;
};

struct DiffusionStudyResult {
    std::vector<StudyRow> rows;
    RateFit fit;
    double predicted_slope = 0;
};

DiffusionStudyResult run_diffusion_limit_study(const DiffusionStudyConfig& cfg);

// Run fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace mhdlayer
