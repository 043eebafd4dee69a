#pragma once

// Synthetic cure-model data: covariates, the true incidence surfaces, Weibull
// promotion times and exponential censoring.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pcm/linalg.hpp"
#include "pcm/rng.hpp"
#include "pcm/survival_data.hpp"

namespace pcm {

enum class SimMethod { m1, m2, m3, m10 };

const char* to_string(SimMethod method);
std::optional<SimMethod> parse_sim_method(std::string_view name);
int covariate_dim(SimMethod method);

// log(1 - pi(x)), evaluated without forming 1 - pi.
double true_log_cure(SimMethod method, RowRef x);
double true_pi(SimMethod method, RowRef x);

RowMatrix gen_covariates(SimMethod method, std::size_t n, Rng& rng);

struct SimConfig {
    SimMethod method = SimMethod::m1;
    std::size_t n = 300;
    double alpha = 2.0;
    Vector beta_true;
    double censor_rate = 0.2;
    double train_fraction = 2.0 / 3.0;
    bool stratify_split = true;
    std::uint64_t seed = 0;

    void validate() const;
};

// alpha and beta at their published values for `method`.
SimConfig default_sim_config(SimMethod method, std::size_t n, std::uint64_t seed);

struct SimDataset {
    SurvivalData data;  // x = z
    std::vector<double> true_pi;
    std::vector<int> true_susceptible;  // 1 susceptible, 0 cured
    std::vector<int> train;             // 1 train, 0 test
    // Truth at each subject's own observed time.
    std::vector<double> true_s_pop;
    std::vector<double> true_s_susceptible;
    std::vector<double> true_s_promotion;
};

// Weibull promotion-time distribution: F(t; z) = 1 - exp(-t^alpha exp(beta' z)).
double weibull_cdf(double t, double alpha, double linear_predictor);

// Lifetimes use a Uniform(0,1) draw U, an Exp(rate) censoring time C and, for
// susceptible subjects, U1 ~ Uniform(1 - pi, 1) inverted through S_p(y) = U1.
SimDataset gen_dataset(const SimConfig& config);

}  // namespace pcm
