#pragma once

// EM estimation for the promotion time cure model. The incidence part is
// either an ensemble of SVM + Platt members fitted to multiply imputed cure
// statuses (PCM-SVM) or a logistic link maximizing the expected complete-data
// incidence log-likelihood (PCM-Logit). The latency part is a weighted Cox
// model with the E-step counts as risk weights.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pcm/cox_latency.hpp"
#include "pcm/kernel_svm.hpp"
#include "pcm/linalg.hpp"
#include "pcm/rng.hpp"
#include "pcm/survival_data.hpp"

namespace pcm {

inline constexpr double kPiFloor = 1e-6;
inline constexpr double kPiCeil = 1.0 - 1e-6;

double clip_pi(double pi);

// E[N | data] = delta - log(1 - pi) (1 - F)
double expected_count(double pi, double cdf, int delta);
Vector e_step_counts(std::span<const double> pi, std::span<const double> cdf, std::span<const int> delta);

// P[uncured | data] = delta + (1 - delta) (1 - (1 - pi)^(1 - F))
double uncured_weight(double pi, double cdf, int delta);

// m label vectors with V_i = +1 with probability w_i, independently.
std::vector<std::vector<int>> impute_statuses(std::span<const double> w, int m, Rng& rng);

// A single-class label vector is redrawn from w up to 20 times; if still
// single-class, the censored subject with the lowest w becomes -1 (all +1
// case) or the subject with the highest w becomes +1 (all -1 case).
void ensure_two_classes(std::vector<int>& labels, std::span<const double> w, std::span<const int> delta, Rng& rng);

struct IncidenceMember {
    SvmModel svm;
    PlattCalibration platt;
};

struct IncidenceModel {
    std::vector<IncidenceMember> members;

    std::size_t m() const { return members.size(); }
    // Mean of the members' Platt probabilities, unclipped.
    double predict(RowRef x) const;
    Vector predict_all(const RowMatrix& x) const;
};

// Every member's SMO run uses `seed`. Each member's Platt sigmoid is fit to
// out-of-fold decision values from kPlattFolds-fold retraining; in-sample
// values are overconfident once the SVM nearly interpolates its labels.
inline constexpr int kPlattFolds = 5;
IncidenceModel fit_incidence(const RowMatrix& x, std::span<const std::vector<int>> labels, const KernelSpec& kernel,
                             std::uint64_t seed, double kkt_tol = 1e-3);

struct LogitParams {
    Vector gamma;  // intercept first

    double predict(RowRef x) const;
};

enum class IncidenceKind { svm, logit };
const char* to_string(IncidenceKind kind);

struct EmConfig {
    std::optional<KernelSpec> kernel;  // fixed (gamma, cost); tuned on the grids otherwise
    std::vector<double> gamma_grid = default_gamma_grid();
    std::vector<double> cost_grid = default_cost_grid();
    int cv_folds = 5;
    int imputations = 5;
    double eps = 1e-3;
    int max_iter = 50;
    std::uint64_t seed = 0;
    double kkt_tol = 1e-3;
};

struct EmState {
    Vector pi;
    Vector n_expect;
    Vector w;
    LatencyModel latency;
    int iteration = 0;
    Vector param_vector;
};

struct BootstrapResult {
    int replicates = 0;
    int successes = 0;
    int failures = 0;
    int not_converged = 0;
    Vector beta_se;
    Vector pi_se;          // at the caller's covariate points
    RowMatrix beta_draws;  // one row per successful replicate
};

struct PcmFit {
    IncidenceKind kind = IncidenceKind::svm;
    std::variant<IncidenceModel, LogitParams> incidence;
    LatencyModel latency;
    EmState diagnostics;
    bool converged = false;
    std::vector<double> trace;  // squared parameter change per iteration
    std::optional<KernelSpec> kernel;
    double cv_accuracy = 0.0;
    EmConfig config;
    std::optional<Standardization> standardization;
    std::optional<BootstrapResult> bootstrap;

    // Clipped incidence probability at covariates already on the fitted scale.
    double incidence_prob(RowRef x) const;
};

// One incidence M-step: receives the E-step counts and weights of iteration
// `iteration` (1-based) and returns the new per-subject pi.
using IncidenceStep = std::function<Vector(const Vector& n_expect, const Vector& w, int iteration)>;

struct EmRun {
    EmState state;
    bool converged = false;
    std::vector<double> trace;
};

// Shared EM skeleton: beta starts at 0.5, S0 at the unweighted null Breslow fit.
EmRun run_em(const SurvivalData& data, const EmConfig& config, Vector initial_pi, const IncidenceStep& incidence_step);

PcmFit em_fit(const SurvivalData& data, const EmConfig& config);

// Expected complete-data incidence log-likelihood under the logistic link:
// sum_i [ -theta_i + N_i log theta_i ], theta = log(1 + exp(gamma' x)).
double logit_q1(const Vector& gamma, const RowMatrix& design, std::span<const double> n_expect);
Vector logit_q1_gradient(const Vector& gamma, const RowMatrix& design, std::span<const double> n_expect);
// Damped Newton; IterationLimitError<Vector> after 100 iterations.
Vector maximize_logit_q1(const RowMatrix& design, std::span<const double> n_expect, const Vector& init);
// Logistic regression of delta on x, used to start PCM-Logit.
Vector fit_logistic(const RowMatrix& design, std::span<const int> response);
RowMatrix with_intercept(const RowMatrix& x);

PcmFit logit_em_fit(const SurvivalData& data, const EmConfig& config);

PcmFit fit_model(IncidenceKind kind, const SurvivalData& data, const EmConfig& config);

struct Prediction {
    double pi = 0.0;
    double s_pop = 1.0;
    double s_susceptible = 1.0;
    double s_promotion = 1.0;
    bool pi_clipped = false;
};

// x and z on the original scale; the fit's standardization is applied here.
Prediction predict(const PcmFit& fit, RowRef x, RowRef z, double t);

// Resamples rows with replacement and refits each replicate; SEs are sample
// standard deviations over the successful fits.
BootstrapResult bootstrap_se(const SurvivalData& data, IncidenceKind kind, const EmConfig& config, int replicates,
                             std::uint64_t seed, unsigned jobs = 1, const RowMatrix* pi_points = nullptr);
BootstrapResult bootstrap_from_resamples(const SurvivalData& data, IncidenceKind kind, const EmConfig& config,
                                         std::span<const std::vector<std::size_t>> resamples,
                                         std::span<const std::uint64_t> fit_seeds, unsigned jobs = 1,
                                         const RowMatrix* pi_points = nullptr);

}  // namespace pcm
