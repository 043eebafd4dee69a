#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "pcm/cox_latency.hpp"
#include "pcm/error.hpp"

using namespace pcm;

namespace {

struct Instance {
    std::vector<double> t;
    std::vector<int> delta;
    std::vector<double> w;
    RowMatrix z;
};

// Random survival instance with integer-valued times so that ties occur.
Instance random_instance(std::size_t n, Eigen::Index q, std::mt19937_64& rng, bool ties, bool weighted) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    Instance in{std::vector<double>(n), std::vector<int>(n), std::vector<double>(n, 1.0),
                RowMatrix(static_cast<Eigen::Index>(n), q)};
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < q; ++j) in.z(static_cast<Eigen::Index>(i), j) = normal(rng);
        const double raw = -std::log(unit(rng)) * 5.0;
        in.t[i] = ties ? std::ceil(raw) : raw + 1e-3;
        in.delta[i] = unit(rng) < 0.7 ? 1 : 0;
        if (weighted) in.w[i] = 0.2 + 2.0 * unit(rng);
    }
    in.delta[0] = 1;
    return in;
}

Vector random_beta(Eigen::Index q, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 0.5);
    Vector b(q);
    for (Eigen::Index j = 0; j < q; ++j) b[j] = normal(rng);
    return b;
}

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::invalid_input;
}

}  // namespace

TEST_CASE("risk index from hand-built records") {
    const std::vector<double> t{1.0, 2.0, 2.0};
    const std::vector<int> d{1, 0, 1};
    const RowMatrix z = RowMatrix::Zero(3, 1);
    const RiskSetIndex idx = build_risk_index(t, d, z);
    REQUIRE(idx.num_events() == 2);
    CHECK(idx.event_times == std::vector<double>{1.0, 2.0});
    CHECK(idx.event_counts == std::vector<int>{1, 1});
    auto as_set = [](std::span<const std::size_t> s) {
        std::vector<std::size_t> v(s.begin(), s.end());
        std::sort(v.begin(), v.end());
        return v;
    };
    CHECK(as_set(idx.risk_set(0)) == std::vector<std::size_t>{0, 1, 2});
    CHECK(as_set(idx.risk_set(1)) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("tied events are aggregated") {
    const std::vector<double> t{1.0, 1.0, 3.0};
    const std::vector<int> d{1, 1, 0};
    RowMatrix z(3, 2);
    z << 0.5, -1.0, 2.0, 4.0, 9.0, 9.0;
    const RiskSetIndex idx = build_risk_index(t, d, z);
    REQUIRE(idx.num_events() == 1);
    CHECK(idx.event_counts[0] == 2);
    CHECK(idx.event_cov_sums(0, 0) == 2.5);
    CHECK(idx.event_cov_sums(0, 1) == 3.0);
}

TEST_CASE("risk index rejects bad inputs") {
    const RowMatrix z = RowMatrix::Zero(2, 1);
    CHECK(code_of([&] { build_risk_index(std::vector<double>{1, 2}, std::vector<int>{0, 0}, z); }) ==
          ErrorCode::empty_events);
    CHECK(code_of([&] { build_risk_index(std::vector<double>{0, 2}, std::vector<int>{1, 0}, z); }) ==
          ErrorCode::invalid_input);
    const RiskSetIndex idx = build_risk_index(std::vector<double>{1, 2}, std::vector<int>{1, 0}, z);
    CHECK(code_of([&] { partial_loglik(Vector::Zero(1), idx, std::vector<double>{1.0, 0.0}, z); }) ==
          ErrorCode::invalid_input);
}

TEST_CASE("partial likelihood at zero beta") {
    const std::size_t m = 7;
    std::vector<double> t(m);
    std::vector<int> d(m, 0);
    for (std::size_t i = 0; i < m; ++i) t[i] = 1.0 + static_cast<double>(i);
    d[0] = 1;
    const RowMatrix z = RowMatrix::Random(static_cast<Eigen::Index>(m), 2);
    const RiskSetIndex idx = build_risk_index(t, d, z);
    CHECK(partial_loglik(Vector::Zero(2), idx, std::vector<double>(m, 1.0), z) ==
          doctest::Approx(-std::log(7.0)).epsilon(1e-14));

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Instance in = random_instance(25, 3, rng, true, true);
        const RiskSetIndex ix = build_risk_index(in.t, in.delta, in.z);
        const Vector zero = Vector::Zero(3);
        CHECK(partial_loglik(zero, ix, in.w, in.z) ==
              doctest::Approx(oracle::partial_loglik(zero, in.t, in.delta, in.w, in.z)).epsilon(1e-12));
        const Vector b = random_beta(3, rng);
        CHECK(partial_loglik(b, ix, in.w, in.z) ==
              doctest::Approx(oracle::partial_loglik(b, in.t, in.delta, in.w, in.z)).epsilon(1e-12));
    }
}

TEST_CASE("partial likelihood derivatives match finite differences") {
    std::mt19937_64 rng(31);
    const double h = 1e-5;
    double worst_grad = 0.0, worst_hess = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 5 + static_cast<std::size_t>(trial % 26);
        const Eigen::Index q = 1 + trial % 4;
        const Instance in = random_instance(n, q, rng, trial % 2 == 0, true);
        const RiskSetIndex idx = build_risk_index(in.t, in.delta, in.z);
        const Vector b = random_beta(q, rng);
        const PartialLikelihood pl = partial_loglik_derivatives(b, idx, in.w, in.z);
        CHECK(pl.value == doctest::Approx(partial_loglik(b, idx, in.w, in.z)).epsilon(1e-13));

        Vector fd_grad(q);
        Matrix fd_hess(q, q);
        for (Eigen::Index j = 0; j < q; ++j) {
            Vector up = b, down = b;
            up[j] += h;
            down[j] -= h;
            fd_grad[j] = (partial_loglik(up, idx, in.w, in.z) - partial_loglik(down, idx, in.w, in.z)) / (2 * h);
            fd_hess.col(j) = (partial_loglik_derivatives(up, idx, in.w, in.z).gradient -
                              partial_loglik_derivatives(down, idx, in.w, in.z).gradient) /
                             (2 * h);
        }
        const double grad_scale = pl.gradient.lpNorm<Eigen::Infinity>();
        const double hess_scale = pl.hessian.lpNorm<Eigen::Infinity>();
        if (grad_scale > 0) worst_grad = std::max(worst_grad, (fd_grad - pl.gradient).lpNorm<Eigen::Infinity>() / grad_scale);
        if (hess_scale > 0) worst_hess = std::max(worst_hess, (fd_hess - pl.hessian).lpNorm<Eigen::Infinity>() / hess_scale);
    }
    CHECK(worst_grad <= 1e-5);
    CHECK(worst_hess <= 1e-3);
}

TEST_CASE("fit_beta recovers no effect") {
    std::mt19937_64 rng(404);
    std::normal_distribution<double> normal;
    std::exponential_distribution<double> expo(1.0);
    const std::size_t n = 200;
    std::vector<double> t(n);
    std::vector<int> d(n);
    RowMatrix z(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
        z(static_cast<Eigen::Index>(i), 0) = normal(rng);
        z(static_cast<Eigen::Index>(i), 1) = normal(rng);
        const double y = expo(rng), c = expo(rng) * 4.0;
        t[i] = std::min(y, c);
        d[i] = y <= c ? 1 : 0;
    }
    const RiskSetIndex idx = build_risk_index(t, d, z);
    const std::vector<double> ones(n, 1.0);
    const CoxFitResult fit = fit_beta(idx, ones, z, Vector::Constant(2, 0.5));
    CHECK(std::abs(fit.beta[0]) <= 0.2);
    CHECK(std::abs(fit.beta[1]) <= 0.2);
    CHECK(partial_loglik_derivatives(fit.beta, idx, ones, z).gradient.lpNorm<Eigen::Infinity>() <= 1e-6);
    CHECK(fit.loglik >= partial_loglik(Vector::Constant(2, 0.5), idx, ones, z));

    const CoxFitResult again = fit_beta(idx, ones, z, fit.beta);
    CHECK(again.iterations <= 1);
    CHECK((again.beta - fit.beta).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("integer weights equal replicated subjects") {
    // A weight k on a subject is k copies in every risk set it belongs to; the
    // extra copies carry no event of their own.
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> count(1, 4);
    for (int trial = 0; trial < 10; ++trial) {
        Instance in = random_instance(25, 2, rng, trial % 2 == 1, false);
        std::vector<double> rt;
        std::vector<int> rd;
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < in.t.size(); ++i) {
            const int k = count(rng);
            in.w[i] = k;
            for (int c = 0; c < k; ++c) {
                rt.push_back(in.t[i]);
                rd.push_back(c == 0 ? in.delta[i] : 0);
                rows.push_back(static_cast<Eigen::Index>(i));
            }
        }
        const RowMatrix rz = in.z(rows, Eigen::all);
        const RiskSetIndex weighted = build_risk_index(in.t, in.delta, in.z);
        const RiskSetIndex replicated = build_risk_index(rt, rd, rz);
        const Vector init = Vector::Zero(2);
        const Vector a = fit_beta(weighted, in.w, in.z, init).beta;
        const Vector b = fit_beta(replicated, std::vector<double>(rt.size(), 1.0), rz, init).beta;
        CHECK((a - b).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
}

TEST_CASE("breslow baseline by hand") {
    const std::size_t m = 5;
    const std::vector<double> t{1.0, 2.0, 3.0, 4.0, 5.0};
    const std::vector<int> d{1, 0, 0, 0, 0};
    const RowMatrix z = RowMatrix::Random(static_cast<Eigen::Index>(m), 1);
    const RiskSetIndex idx = build_risk_index(t, d, z);
    const BaselineSurvival s0 = breslow_baseline(Vector::Zero(1), idx, std::vector<double>(m, 1.0), z);
    CHECK(s0(0.5) == 1.0);
    CHECK(s0(1.0) == 1.0);
    CHECK(s0(1.0 + 1e-9) == doctest::Approx(std::exp(-1.0 / 5.0)).epsilon(1e-15));
    CHECK(s0(100.0) == doctest::Approx(std::exp(-1.0 / 5.0)).epsilon(1e-15));
}

TEST_CASE("breslow baseline matches direct summation") {
    std::mt19937_64 rng(88);
    for (int trial = 0; trial < 30; ++trial) {
        const Instance in = random_instance(10, 2, rng, trial % 2 == 0, true);
        const RiskSetIndex idx = build_risk_index(in.t, in.delta, in.z);
        const Vector b = random_beta(2, rng);
        const BaselineSurvival s0 = breslow_baseline(b, idx, in.w, in.z);
        double previous = 1.0;
        for (double ti : in.t) {
            CHECK(std::abs(s0(ti) - oracle::breslow(ti, b, in.t, in.delta, in.w, in.z)) <= 1e-12);
            const double after = std::nextafter(ti, 1e9);
            CHECK(std::abs(s0(after) - oracle::breslow(after, b, in.t, in.delta, in.w, in.z)) <= 1e-12);
        }
        for (double v : s0.values()) {
            CHECK(v > 0.0);
            CHECK(v <= previous);
            previous = v;
        }
    }
}

TEST_CASE("unit-weight fit agrees with the brute-force reference") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 8 + static_cast<std::size_t>(trial % 13);
        const Eigen::Index q = 1 + trial % 3;
        Instance in = random_instance(n, q, rng, trial % 3 == 0, false);
        // Keep a censored subject at the largest time so that beta stays finite.
        in.delta[n - 1] = 0;
        in.t[n - 1] = 1e3;
        const RiskSetIndex idx = build_risk_index(in.t, in.delta, in.z);
        const Vector reference = oracle::cox_fit(in.t, in.delta, in.w, in.z);
        CoxFitResult fit;
        try {
            fit = fit_beta(idx, in.w, in.z, Vector::Zero(q));
        } catch (const IterationLimitError<CoxFitResult>&) {
            FAIL("fit_beta did not converge on trial " << trial);
        }
        CHECK((fit.beta - reference).lpNorm<Eigen::Infinity>() <= 1e-6);
        const BaselineSurvival s0 = breslow_baseline(fit.beta, idx, in.w, in.z);
        for (double ti : in.t) {
            const double after = std::nextafter(ti, 1e9);
            CHECK(std::abs(s0(after) - oracle::breslow(after, reference, in.t, in.delta, in.w, in.z)) <= 1e-6);
        }
    }
}

TEST_CASE("shifting covariates leaves beta and the promotion cdf unchanged") {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 10; ++trial) {
        const Instance in = random_instance(40, 2, rng, false, true);
        RowMatrix shifted = in.z;
        shifted.col(0).array() += 3.0;
        shifted.col(1).array() -= 1.5;
        const RiskSetIndex a = build_risk_index(in.t, in.delta, in.z);
        const RiskSetIndex b = build_risk_index(in.t, in.delta, shifted);
        const Vector init = Vector::Zero(2);
        const Vector beta_a = fit_beta(a, in.w, in.z, init).beta;
        const Vector beta_b = fit_beta(b, in.w, shifted, init).beta;
        CHECK((beta_a - beta_b).lpNorm<Eigen::Infinity>() <= 1e-7);
        const LatencyModel ma{beta_a, breslow_baseline(beta_a, a, in.w, in.z)};
        const LatencyModel mb{beta_b, breslow_baseline(beta_b, b, in.w, shifted)};
        for (std::size_t i = 0; i < in.t.size(); ++i) {
            const double s = in.t[i] + 1e-6;
            const auto r = static_cast<Eigen::Index>(i);
            CHECK(promotion_cdf(s, in.z.row(r), ma) == doctest::Approx(promotion_cdf(s, shifted.row(r), mb)).epsilon(1e-7));
        }
    }
}

TEST_CASE("promotion cdf by hand") {
    const LatencyModel model{Vector::Ones(1), BaselineSurvival({1.0}, {0.5})};
    const Eigen::RowVectorXd one = Eigen::RowVectorXd::Ones(1), zero = Eigen::RowVectorXd::Zero(1);
    CHECK(promotion_cdf(0.0, one, model) == 0.0);
    CHECK(promotion_cdf(2.0, zero, model) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(promotion_cdf(2.0, one, model) == doctest::Approx(1.0 - std::pow(0.5, std::exp(1.0))).epsilon(1e-14));
    CHECK(promotion_cdf(2.0, one, model) == doctest::Approx(0.84804).epsilon(1e-5));

    std::mt19937_64 rng(3);
    const Instance in = random_instance(30, 1, rng, false, false);
    const RiskSetIndex idx = build_risk_index(in.t, in.delta, in.z);
    const LatencyModel fitted{Vector::Constant(1, 0.7), breslow_baseline(Vector::Constant(1, 0.7), idx, in.w, in.z)};
    double previous = 0.0;
    for (double s = 0.0; s < 40.0; s += 0.25) {
        const double f = promotion_cdf(s, one, fitted);
        CHECK(f >= previous);
        CHECK(f < 1.0);
        previous = f;
    }
}
