#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "pcm/error.hpp"
#include "pcm/evalmetrics.hpp"
#include "pcm/pcm_em.hpp"
#include "pcm/simgen.hpp"

using namespace pcm;

namespace {

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::invalid_input;
}

SimDataset sim(SimMethod method, std::size_t n, std::uint64_t seed) {
    return gen_dataset(default_sim_config(method, n, seed));
}

EmConfig fast_config(std::uint64_t seed) {
    EmConfig c;
    c.kernel = KernelSpec{0.5, 1.0};
    c.seed = seed;
    return c;
}

std::span<const double> view(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

TEST_CASE("expected counts by hand") {
    CHECK(expected_count(1.0 - std::exp(-1.0), 0.0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(expected_count(1e-300, 0.3, 0) == doctest::Approx(0.0).scale(1e-200));
    CHECK(expected_count(0.0, 0.3, 0) == 0.0);
    CHECK(expected_count(1.0 - std::exp(-2.0), 0.5, 1) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(code_of([] { expected_count(1.0, 0.5, 0); }) == ErrorCode::numerical);

    const std::vector<double> pi{0.3, 0.6}, cdf{0.2, 0.9};
    const std::vector<int> delta{0, 1};
    const Vector n = e_step_counts(pi, cdf, delta);
    CHECK(n[0] == doctest::Approx(-std::log(0.7) * 0.8).epsilon(1e-15));
    CHECK(n[1] == doctest::Approx(1.0 - std::log(0.4) * 0.1).epsilon(1e-15));
}

TEST_CASE("expected counts equal the conditional pmf mean") {
    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> unit;
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double pi = std::min(unit(rng), kPiCeil);
        const double cdf = unit(rng);
        const int delta = k % 2;
        worst = std::max(worst, std::abs(expected_count(pi, cdf, delta) - oracle::latent_count_mean(pi, cdf, delta)));
    }
    CHECK(worst <= 1e-9);
    CHECK(std::abs(expected_count(1.0 - std::exp(-2.0), 0.5, 1) -
                   oracle::latent_count_mean(1.0 - std::exp(-2.0), 0.5, 1)) <= 1e-10);
}

TEST_CASE("uncured weights") {
    CHECK(uncured_weight(0.3, 0.4, 1) == 1.0);
    CHECK(uncured_weight(0.37, 0.0, 0) == doctest::Approx(0.37).epsilon(1e-15));
    CHECK(uncured_weight(0.64, 0.5, 0) == doctest::Approx(0.4).epsilon(1e-14));

    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> unit;
    for (int k = 0; k < 2000; ++k) {
        const double pi = unit(rng), cdf = unit(rng), step = 0.05 * unit(rng);
        const double w = uncured_weight(pi, cdf, 0);
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        CHECK(uncured_weight(std::min(pi + step, kPiCeil), cdf, 0) >= w);
        CHECK(uncured_weight(pi, std::min(cdf + step, 0.999999), 0) <= w);
    }
}

TEST_CASE("imputation draws") {
    Rng rng(1);
    const auto ones = impute_statuses(std::vector<double>(10, 1.0), 3, rng);
    for (const auto& v : ones) CHECK(std::count(v.begin(), v.end(), 1) == 10);
    const auto zeros = impute_statuses(std::vector<double>(10, 0.0), 3, rng);
    for (const auto& v : zeros) CHECK(std::count(v.begin(), v.end(), -1) == 10);

    const auto draws = impute_statuses(std::vector<double>{0.5}, 5000, rng);
    double positive = 0;
    for (const auto& v : draws) positive += v[0] > 0;
    CHECK(positive / 5000.0 > 0.48);
    CHECK(positive / 5000.0 < 0.52);

    Rng a(42), b(42);
    const std::vector<double> w{0.1, 0.5, 0.9, 0.3};
    CHECK(impute_statuses(w, 4, a) == impute_statuses(w, 4, b));
}

TEST_CASE("single-class imputations are repaired") {
    Rng rng(3);
    // Weights this close to 0 or 1 make every redraw single-class again.
    const std::vector<double> w{1.0, 1.0, 1.0, 1.0 - 1e-16};
    const std::vector<int> delta{1, 1, 0, 0};
    std::vector<int> labels{1, 1, 1, 1};
    ensure_two_classes(labels, w, delta, rng);
    CHECK(labels == std::vector<int>{1, 1, 1, -1});

    const std::vector<double> low{0.0, 0.0, 1e-300, 0.0};
    std::vector<int> negatives{-1, -1, -1, -1};
    ensure_two_classes(negatives, low, std::vector<int>{0, 0, 0, 0}, rng);
    CHECK(negatives == std::vector<int>{-1, -1, 1, -1});

    std::vector<int> events_only{1, 1};
    CHECK(code_of([&] { ensure_two_classes(events_only, std::vector<double>{1, 1}, std::vector<int>{1, 1}, rng); }) ==
          ErrorCode::degenerate_labels);
}

TEST_CASE("incidence ensembles average their members") {
    const SimDataset d = sim(SimMethod::m2, 120, 4);
    std::vector<int> truth(d.data.size());
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = d.true_susceptible[i] ? 1 : -1;
    const KernelSpec k{0.5, 2.0};

    const std::vector<std::vector<int>> one{truth};
    const IncidenceModel single = fit_incidence(d.data.x, one, k, 9);
    REQUIRE(single.m() == 1);
    for (Eigen::Index i = 0; i < 10; ++i) {
        const auto x = d.data.x.row(i);
        CHECK(single.predict(x) == platt_prob(single.members[0].platt, decision_value(single.members[0].svm, x)));
    }

    const std::vector<std::vector<int>> twice{truth, truth};
    const IncidenceModel pair = fit_incidence(d.data.x, twice, k, 9);
    for (Eigen::Index i = 0; i < d.data.x.rows(); ++i) {
        const auto x = d.data.x.row(i);
        CHECK(pair.predict(x) == doctest::Approx(single.predict(x)).epsilon(1e-15));
        CHECK(pair.predict(x) > 0.0);
        CHECK(pair.predict(x) < 1.0);
    }
}

TEST_CASE("incidence fitted to true labels ranks the boundary well") {
    const SimDataset d = sim(SimMethod::m2, 300, 21);
    std::vector<int> truth(d.data.size());
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = d.true_susceptible[i] ? 1 : -1;
    const TuningResult tuned = tune_hyperparams(d.data.x, truth, {default_gamma_grid(), default_cost_grid(), 5, 1, 1e-3});
    const std::vector<std::vector<int>> labels{truth};
    const IncidenceModel model = fit_incidence(d.data.x, labels, tuned.spec, 2);
    const Vector pi = model.predict_all(d.data.x);
    CHECK(roc_auc(view(pi), d.true_susceptible).auc >= 0.9);
}

TEST_CASE("logit Q1 self-consistency") {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> normal;
    const Eigen::Index n = 500;
    RowMatrix x(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) << normal(rng), normal(rng);
    const RowMatrix design = with_intercept(x);
    const Vector star = (Vector(3) << 0.4, -1.2, 0.8).finished();
    std::vector<double> theta(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) theta[static_cast<std::size_t>(i)] = std::log1p(std::exp(design.row(i).dot(star)));
    const Vector hat = maximize_logit_q1(design, theta, Vector::Zero(3));
    CHECK((hat - star).lpNorm<Eigen::Infinity>() <= 1e-6);
    CHECK(logit_q1_gradient(hat, design, theta).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("intercept-only logit Q1 matches bisection on the score") {
    std::mt19937_64 rng(12);
    std::exponential_distribution<double> expo(0.8);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> counts(40);
        for (auto& c : counts) c = expo(rng) * (trial + 1) * 0.3;
        const RowMatrix design = RowMatrix::Ones(40, 1);
        // Score in gamma: sum_i (N_i / theta - 1) * dtheta/dgamma, with
        // theta = log(1 + e^gamma) and dtheta/dgamma = logistic(gamma) > 0.
        auto score = [&](double g) {
            const double theta = std::log1p(std::exp(g));
            double s = 0;
            for (double c : counts) s += c / theta - 1.0;
            return s;
        };
        double lo = -30.0, hi = 30.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (score(mid) > 0 ? lo : hi) = mid;
        }
        const Vector hat = maximize_logit_q1(design, counts, Vector::Zero(1));
        CHECK(std::abs(hat[0] - 0.5 * (lo + hi)) <= 1e-6);
    }
}

TEST_CASE("logistic start solves the score equations") {
    const SimDataset d = sim(SimMethod::m1, 200, 5);
    const RowMatrix design = with_intercept(d.data.x);
    const Vector g = fit_logistic(design, d.data.delta);
    Vector score = Vector::Zero(3);
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-design.row(i).dot(g)));
        score += (d.data.delta[static_cast<std::size_t>(i)] - p) * design.row(i).transpose();
    }
    CHECK(score.lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("PCM-SVM converges on Method 1 with defaults") {
    const SimDataset d = sim(SimMethod::m1, 300, 1);
    EmConfig config;
    config.seed = 8;
    const PcmFit fit = em_fit(d.data, config);
    CHECK(fit.converged);
    CHECK(fit.diagnostics.iteration <= 50);
    CHECK(fit.trace.back() < config.eps);
    for (double change : fit.trace) CHECK(std::isfinite(change));
    for (Eigen::Index i = 0; i < fit.diagnostics.pi.size(); ++i) {
        CHECK(fit.diagnostics.pi[i] >= kPiFloor);
        CHECK(fit.diagnostics.pi[i] <= kPiCeil);
        if (d.data.delta[static_cast<std::size_t>(i)] == 1) {
            CHECK(fit.diagnostics.w[i] == 1.0);
            CHECK(fit.diagnostics.n_expect[i] >= 1.0);
        } else {
            CHECK(fit.diagnostics.n_expect[i] >= 0.0);
        }
    }
    CHECK(std::get<IncidenceModel>(fit.incidence).m() == 5);
}

TEST_CASE("an infinite tolerance stops after one sweep") {
    const SimDataset d = sim(SimMethod::m2, 100, 2);
    EmConfig config = fast_config(3);
    config.eps = std::numeric_limits<double>::infinity();
    const PcmFit svm = em_fit(d.data, config);
    CHECK(svm.converged);
    CHECK(svm.diagnostics.iteration == 1);
    CHECK(svm.trace.size() == 1);
    const PcmFit logit = logit_em_fit(d.data, config);
    CHECK(logit.diagnostics.iteration == 1);
}

TEST_CASE("fits are bitwise reproducible") {
    const SimDataset d = sim(SimMethod::m2, 150, 6);
    EmConfig config;
    config.seed = 77;
    config.gamma_grid = {0.25, 1.0};
    config.cost_grid = {1.0, 8.0};
    const PcmFit a = em_fit(d.data, config);
    const PcmFit b = em_fit(d.data, config);
    auto same = [](const Vector& u, const Vector& v) {
        return u.size() == v.size() && std::memcmp(u.data(), v.data(), sizeof(double) * static_cast<std::size_t>(u.size())) == 0;
    };
    CHECK(same(a.diagnostics.pi, b.diagnostics.pi));
    CHECK(same(a.diagnostics.n_expect, b.diagnostics.n_expect));
    CHECK(same(a.diagnostics.param_vector, b.diagnostics.param_vector));
    CHECK(a.trace == b.trace);
    CHECK(a.kernel == b.kernel);
}

TEST_CASE("frozen incidence reduces the EM to one weighted Cox fit") {
    const SimDataset d = sim(SimMethod::m1, 200, 13);
    const auto& data = d.data;
    const std::size_t n = data.size();
    const Vector truth = Eigen::Map<const Vector>(d.true_pi.data(), static_cast<Eigen::Index>(n));
    EmConfig config = fast_config(1);
    config.max_iter = 1;
    const EmRun run = run_em(data, config, truth, [&](const Vector&, const Vector&, int) { return truth; });

    // Weights from the starting latency: beta = 0.5 and the unweighted null
    // Breslow curve, evaluated by direct summation.
    const Eigen::Index q = data.z.cols();
    const std::vector<double> unit(n, 1.0);
    const Vector start = Vector::Constant(q, 0.5);
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double s0 = oracle::breslow(data.time[i], Vector::Zero(q), data.time, data.delta, unit, data.z);
        const double cdf = 1.0 - std::pow(s0, std::exp(data.z.row(r).dot(start)));
        weights[i] = data.delta[i] - std::log(1.0 - clip_pi(truth[r])) * (1.0 - cdf);
    }
    const RiskSetIndex idx = build_risk_index(data.time, data.delta, data.z);
    const CoxFitResult once = fit_beta(idx, weights, data.z, start);
    CHECK((run.state.latency.beta - once.beta).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("sub-solver errors carry the iteration") {
    const SimDataset d = sim(SimMethod::m1, 60, 3);
    EmConfig config = fast_config(1);
    const Vector start = Vector::Constant(static_cast<Eigen::Index>(d.data.size()), 0.5);
    try {
        run_em(d.data, config, start, [](const Vector&, const Vector&, int it) -> Vector {
            if (it == 2) fail(ErrorCode::numerical, "boom");
            return Vector::Constant(60, 0.5);
        });
        FAIL("expected an Error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::numerical);
        CHECK(std::string(e.what()) == "EM iteration 2: boom");
    }
}

TEST_CASE("EM rejects data without censoring or events") {
    SimDataset d = sim(SimMethod::m1, 40, 3);
    std::fill(d.data.delta.begin(), d.data.delta.end(), 1);
    CHECK(code_of([&] { em_fit(d.data, fast_config(1)); }) == ErrorCode::invalid_input);
    std::fill(d.data.delta.begin(), d.data.delta.end(), 0);
    CHECK(code_of([&] { logit_em_fit(d.data, fast_config(1)); }) == ErrorCode::invalid_input);
}

TEST_CASE("predictions by hand") {
    PcmFit fit;
    fit.kind = IncidenceKind::logit;
    fit.incidence = LogitParams{Vector::Zero(2)};
    fit.latency = LatencyModel{Vector::Zero(1), BaselineSurvival({1.0, 50.0}, {0.5, 1e-300})};
    const Eigen::RowVectorXd x = Eigen::RowVectorXd::Constant(1, 0.3), z = Eigen::RowVectorXd::Zero(1);

    const Prediction start = predict(fit, x, z, 0.0);
    CHECK(start.s_pop == 1.0);
    CHECK(start.s_susceptible == 1.0);
    CHECK(start.s_promotion == 1.0);

    const Prediction mid = predict(fit, x, z, 2.0);
    CHECK(mid.pi == 0.5);
    CHECK(mid.s_pop == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
    CHECK(mid.s_pop == doctest::Approx(0.7071).epsilon(1e-4));
    CHECK(mid.s_susceptible == doctest::Approx(0.4142).epsilon(1e-4));
    CHECK(mid.s_promotion == doctest::Approx(0.5).epsilon(1e-15));

    const Prediction late = predict(fit, x, z, 100.0);
    CHECK(late.s_pop == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(late.s_pop >= 1.0 - late.pi);

    fit.incidence = LogitParams{(Vector(2) << 40.0, 0.0).finished()};
    const Prediction clipped = predict(fit, x, z, 2.0);
    CHECK(clipped.pi == kPiCeil);
    CHECK(clipped.pi_clipped);
}

TEST_CASE("bootstrap with identical resamples has zero spread") {
    const SimDataset d = sim(SimMethod::m1, 80, 9);
    const std::vector<std::size_t> rows = [&] {
        std::vector<std::size_t> r(80);
        for (std::size_t i = 0; i < 80; ++i) r[i] = (i * 7) % 80;
        return r;
    }();
    const std::vector<std::vector<std::size_t>> resamples{rows, rows};
    const std::vector<std::uint64_t> seeds{5, 5};
    const RowMatrix points = d.data.x.topRows(3);
    for (IncidenceKind kind : {IncidenceKind::svm, IncidenceKind::logit}) {
        const BootstrapResult r = bootstrap_from_resamples(d.data, kind, fast_config(1), resamples, seeds, 2, &points);
        CHECK(r.successes == 2);
        CHECK(r.beta_se.isZero(0.0));
        CHECK(r.pi_se.isZero(0.0));
    }
}

TEST_CASE("bootstrap counts failures and needs two successes") {
    const SimDataset d = sim(SimMethod::m1, 60, 9);
    std::size_t censored = 0;
    while (d.data.delta[censored] == 1) ++censored;
    const std::vector<std::size_t> bad(60, censored);
    std::vector<std::size_t> good(60);
    for (std::size_t i = 0; i < 60; ++i) good[i] = i;
    const std::vector<std::vector<std::size_t>> mixed{good, bad, good};
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const BootstrapResult r = bootstrap_from_resamples(d.data, IncidenceKind::logit, fast_config(1), mixed, seeds);
    CHECK(r.replicates == 3);
    CHECK(r.successes == 2);
    CHECK(r.failures == 1);

    const std::vector<std::vector<std::size_t>> hopeless{bad, bad};
    const std::vector<std::uint64_t> two{1, 2};
    CHECK(code_of([&] { bootstrap_from_resamples(d.data, IncidenceKind::logit, fast_config(1), hopeless, two); }) ==
          ErrorCode::bootstrap_failure);
}

TEST_CASE("bootstrap is independent of the job count") {
    const SimDataset d = sim(SimMethod::m2, 80, 31);
    const BootstrapResult one = bootstrap_se(d.data, IncidenceKind::svm, fast_config(2), 4, 11, 1);
    const BootstrapResult three = bootstrap_se(d.data, IncidenceKind::svm, fast_config(2), 4, 11, 3);
    CHECK(one.beta_draws == three.beta_draws);
    CHECK(one.beta_se == three.beta_se);
}
