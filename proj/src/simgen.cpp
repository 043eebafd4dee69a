#include "pcm/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "pcm/error.hpp"

namespace pcm {

namespace {

double softplus(double eta) { return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

// x3 x4 (4 - 0.0005 x3 x4)^2
double interaction(double a, double b) {
    const double p = a * b;
    const double s = 4.0 - 0.0005 * p;
    return p * s * s;
}

double m10_log_hazard(RowRef x) {
    const double first = 0.05 * x[0] * x[0] + 0.05 * std::tanh(x[1]) - 0.05 * interaction(x[2], x[3]) +
                         std::log(std::abs(x[0] + x[4]));
    const double h = 0.4 * first + 0.05 * x[5] * x[5] + 0.05 * std::tanh(x[6]) - 0.05 * interaction(x[7], x[8]) +
                     std::log(std::abs(x[5] + x[9]));
    return std::max(h, -700.0);
}

const Eigen::Matrix<double, 5, 5>& m10_cholesky() {
    static const Eigen::Matrix<double, 5, 5> factor = [] {
        Eigen::Matrix<double, 5, 5> sigma;
        sigma << 1.0, 0.8, 0.5, 0.2, 0.0,  //
            0.8, 1.0, 0.2, 0.6, 0.0,       //
            0.5, 0.2, 1.0, 0.3, 0.0,       //
            0.2, 0.6, 0.3, 1.0, 0.0,       //
            0.0, 0.0, 0.0, 0.0, 1.0;
        Eigen::LLT<Eigen::Matrix<double, 5, 5>> llt(sigma);
        if (llt.info() != Eigen::Success) fail(ErrorCode::invalid_input, "ten-covariate correlation matrix is not positive definite");
        return Eigen::Matrix<double, 5, 5>(llt.matrixL());
    }();
    return factor;
}

}  // namespace

const char* to_string(SimMethod method) {
    switch (method) {
    case SimMethod::m1: return "m1";
    case SimMethod::m2: return "m2";
    case SimMethod::m3: return "m3";
    case SimMethod::m10: return "m10";
    }
    return "?";
}

std::optional<SimMethod> parse_sim_method(std::string_view name) {
    for (SimMethod m : {SimMethod::m1, SimMethod::m2, SimMethod::m3, SimMethod::m10})
        if (name == to_string(m)) return m;
    return std::nullopt;
}

int covariate_dim(SimMethod method) { return method == SimMethod::m10 ? 10 : 2; }

double true_log_cure(SimMethod method, RowRef x) {
    require(x.size() == covariate_dim(method), std::string("true_pi: method ") + to_string(method) + " needs " +
                                                    std::to_string(covariate_dim(method)) + " covariates, got " +
                                                    std::to_string(x.size()));
    switch (method) {
    case SimMethod::m1: return -softplus(0.3 - 5.0 * x[0] - 3.0 * x[1]);
    case SimMethod::m2: return -softplus(0.3 + 5.0 * x[0] * x[0] - 3.0 * x[1] * x[1]);
    case SimMethod::m3: {
        const double a = 0.3 - 5.0 * std::cos(x[0]) - 3.0 * std::sin(x[1]);
        return std::log(-std::expm1(-std::exp(a)));
    }
    case SimMethod::m10: return -std::exp(m10_log_hazard(x));
    }
    return 0.0;
}

double true_pi(SimMethod method, RowRef x) { return -std::expm1(true_log_cure(method, x)); }

RowMatrix gen_covariates(SimMethod method, std::size_t n, Rng& rng) {
    const int p = covariate_dim(method);
    std::normal_distribution<double> normal(0.0, 1.0);
    RowMatrix x(static_cast<Eigen::Index>(n), p);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (int j = 0; j < p; ++j) x(i, j) = normal(rng);
    if (method == SimMethod::m10) {
        const auto& l = m10_cholesky();
        x.leftCols(5) = (x.leftCols(5) * l.transpose()).eval();
    }
    return x;
}

void SimConfig::validate() const {
    require(n >= 10, "simulation: n must be at least 10");
    require(alpha > 0.0 && std::isfinite(alpha), "simulation: alpha must be positive");
    require(censor_rate > 0.0 && std::isfinite(censor_rate), "simulation: censoring rate must be positive");
    require(train_fraction > 0.0 && train_fraction < 1.0, "simulation: train fraction must lie in (0, 1)");
    require(beta_true.size() == covariate_dim(method), "simulation: beta has " + std::to_string(beta_true.size()) +
                                                           " entries, method needs " +
                                                           std::to_string(covariate_dim(method)));
}

SimConfig default_sim_config(SimMethod method, std::size_t n, std::uint64_t seed) {
    SimConfig config;
    config.method = method;
    config.n = n;
    config.seed = seed;
    if (method == SimMethod::m10) {
        config.alpha = 3.5;
        config.beta_true.resize(10);
        config.beta_true << 0.8, 1.2, 0.5, 1.1, -0.6, -1.4, -0.5, -0.8, 0.5, 1.8;
    } else {
        config.alpha = 2.0;
        config.beta_true = (Vector(2) << 1.0, 0.5).finished();
    }
    return config;
}

double weibull_cdf(double t, double alpha, double linear_predictor) {
    if (t <= 0.0) return 0.0;
    return -std::expm1(-std::pow(t, alpha) * std::exp(linear_predictor));
}

SimDataset gen_dataset(const SimConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const std::size_t n = config.n;
    SimDataset out;
    SurvivalData& data = out.data;
    data.x = gen_covariates(config.method, n, rng);
    data.z = data.x;
    data.time.resize(n);
    data.delta.resize(n);
    out.true_pi.resize(n);
    out.true_susceptible.resize(n);
    out.true_s_pop.resize(n);
    out.true_s_susceptible.resize(n);
    out.true_s_promotion.resize(n);

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> censor(config.censor_rate);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const double log_cure = true_log_cure(config.method, data.x.row(row));
        const double pi = -std::expm1(log_cure);
        const double eta = data.z.row(row).dot(config.beta_true);
        const double u = unif(rng);
        const double c = censor(rng);
        out.true_pi[i] = pi;
        if (u <= std::exp(log_cure)) {
            out.true_susceptible[i] = 0;
            data.time[i] = c;
            data.delta[i] = 0;
        } else {
            out.true_susceptible[i] = 1;
            double y = 0.0;
            // U1 = 1 - pi v with v ~ Uniform(0, 1); F(y) = log U1 / log(1 - pi).
            while (!(y > 0.0)) {
                const double f = std::log1p(-pi * unif(rng)) / log_cure;
                y = std::pow(-std::log1p(-f) * std::exp(-eta), 1.0 / config.alpha);
            }
            data.time[i] = std::min(y, c);
            data.delta[i] = y <= c ? 1 : 0;
        }
        const double f = weibull_cdf(data.time[i], config.alpha, eta);
        out.true_s_promotion[i] = 1.0 - f;
        out.true_s_pop[i] = std::exp(f * log_cure);
        // (S_p - (1 - pi)) / pi = e^L expm1((F - 1) L) / -expm1(L) with L = log(1 - pi);
        // as pi -> 0 it tends to 1 - F. Adding 0.0 maps -0 to +0.
        out.true_s_susceptible[i] =
            log_cure == 0.0 ? 1.0 - f
                            : std::clamp(std::exp(log_cure) * std::expm1((f - 1.0) * log_cure) / pi, 0.0, 1.0) + 0.0;
    }

    out.train.assign(n, 0);
    auto assign = [&](std::vector<std::size_t> ids) {
        std::shuffle(ids.begin(), ids.end(), rng);
        const auto take = static_cast<std::size_t>(std::llround(config.train_fraction * static_cast<double>(ids.size())));
        for (std::size_t k = 0; k < take; ++k) out.train[ids[k]] = 1;
    };
    if (config.stratify_split) {
        std::vector<std::size_t> events, censored;
        for (std::size_t i = 0; i < n; ++i) (data.delta[i] ? events : censored).push_back(i);
        assign(std::move(events));
        assign(std::move(censored));
    } else {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        assign(std::move(all));
    }
    return out;
}

}  // namespace pcm
