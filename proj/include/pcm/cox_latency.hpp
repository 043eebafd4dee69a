#pragma once

// Weighted Cox machinery for the latency part: the offset partial likelihood
// with Breslow ties, a safeguarded Newton solver for beta, and the weighted
// Breslow baseline survival.

#include <cstddef>
#include <span>
#include <vector>

#include "pcm/linalg.hpp"

namespace pcm {

// Distinct event times with their tie counts and covariate sums. Subjects are
// kept sorted by observed time so that each risk set R_j = {i : t_i >= tau_j}
// is a suffix of `order`.
struct RiskSetIndex {
    std::vector<double> event_times;
    std::vector<int> event_counts;
    RowMatrix event_cov_sums;           // row j holds s_j
    std::vector<std::size_t> order;     // subject indices by increasing time
    std::vector<std::size_t> risk_start;  // R_j = order[risk_start[j] ..]

    std::size_t num_events() const { return event_times.size(); }
    std::size_t num_subjects() const { return order.size(); }
    std::span<const std::size_t> risk_set(std::size_t j) const {
        return std::span<const std::size_t>(order).subspan(risk_start[j]);
    }
};

// Throws Error(empty_events) when no subject has delta = 1.
RiskSetIndex build_risk_index(std::span<const double> times, std::span<const int> delta, const RowMatrix& z);

struct PartialLikelihood {
    double value = 0.0;
    Vector gradient;
    Matrix hessian;
};

// sum_j [ s_j' beta - d_j log sum_{i in R_j} N_i exp(z_i' beta) ]
double partial_loglik(const Vector& beta, const RiskSetIndex& index, std::span<const double> weights,
                      const RowMatrix& z);
PartialLikelihood partial_loglik_derivatives(const Vector& beta, const RiskSetIndex& index,
                                             std::span<const double> weights, const RowMatrix& z);

struct CoxFitResult {
    Vector beta;
    int iterations = 0;
    double loglik = 0.0;
};

// Newton ascent with step halving and a 1e-8 ridge when the Hessian cannot be
// factored. Stops at gradient sup-norm <= 1e-6. After 100 iterations throws
// IterationLimitError<CoxFitResult> carrying the best iterate.
CoxFitResult fit_beta(const RiskSetIndex& index, std::span<const double> weights, const RowMatrix& z,
                      const Vector& init_beta);

// Left-continuous step function: value 1 up to and including the first event
// time, then values[j] on (tau_j, tau_{j+1}], held flat past the last.
class BaselineSurvival {
public:
    BaselineSurvival() = default;
    BaselineSurvival(std::vector<double> times, std::vector<double> values);

    double operator()(double t) const;
    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> times_;
    std::vector<double> values_;
};

BaselineSurvival breslow_baseline(const Vector& beta, const RiskSetIndex& index, std::span<const double> weights,
                                  const RowMatrix& z);

struct LatencyModel {
    Vector beta;
    BaselineSurvival baseline;
};

// F(t; z) = 1 - S0(t)^exp(z' beta)
double promotion_cdf(double t, RowRef z, const LatencyModel& model);

}  // namespace pcm
