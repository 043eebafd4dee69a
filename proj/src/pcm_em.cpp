#include "pcm/pcm_em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "pcm/error.hpp"
#include "pcm/parallel.hpp"

namespace pcm {

namespace {

constexpr double kMinRiskWeight = 1e-10;

double logistic(double eta) {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double softplus(double eta) { return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double log_softplus(double eta) {
    if (eta < -30.0) return eta - 0.5 * std::exp(eta);
    return std::log(softplus(eta));
}

template <class Fn>
auto with_iteration_context(int iteration, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), "EM iteration " + std::to_string(iteration) + ": " + e.what());
    }
}

Vector pack_parameters(const Vector& pi, const LatencyModel& latency) {
    const auto& s0 = latency.baseline.values();
    Vector psi(pi.size() + latency.beta.size() + static_cast<Eigen::Index>(s0.size()));
    psi << pi, latency.beta, Eigen::Map<const Vector>(s0.data(), static_cast<Eigen::Index>(s0.size()));
    return psi;
}

void check_em_data(const SurvivalData& data, const EmConfig& config) {
    data.validate();
    const std::size_t events = data.num_events();
    require(events >= 1, "EM: the data set needs at least one event");
    require(events < data.size(), "EM: the data set needs at least one censored subject");
    require(config.max_iter >= 1, "EM: max_iter must be at least 1");
    require(config.imputations >= 1, "EM: the number of imputations must be at least 1");
    require(config.eps > 0.0, "EM: eps must be positive");
}

}  // namespace

double clip_pi(double pi) { return std::clamp(pi, kPiFloor, kPiCeil); }

double expected_count(double pi, double cdf, int delta) {
    if (!(pi >= 0.0 && pi < 1.0)) fail(ErrorCode::numerical, "E-step: pi outside [0, 1) (" + std::to_string(pi) + ")");
    const double theta = -std::log1p(-pi);
    return delta + theta * (1.0 - cdf);
}

Vector e_step_counts(std::span<const double> pi, std::span<const double> cdf, std::span<const int> delta) {
    require(pi.size() == cdf.size() && pi.size() == delta.size(), "e_step_counts: length mismatch");
    Vector out(static_cast<Eigen::Index>(pi.size()));
    for (std::size_t i = 0; i < pi.size(); ++i) out[static_cast<Eigen::Index>(i)] = expected_count(pi[i], cdf[i], delta[i]);
    return out;
}

double uncured_weight(double pi, double cdf, int delta) {
    if (delta == 1) return 1.0;
    return std::clamp(-std::expm1((1.0 - cdf) * std::log1p(-pi)), 0.0, 1.0);
}

std::vector<std::vector<int>> impute_statuses(std::span<const double> w, int m, Rng& rng) {
    require(m >= 1, "impute_statuses: m must be at least 1");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(m), std::vector<int>(w.size()));
    for (auto& labels : out)
        for (std::size_t i = 0; i < w.size(); ++i) labels[i] = unif(rng) < w[i] ? 1 : -1;
    return out;
}

void ensure_two_classes(std::vector<int>& labels, std::span<const double> w, std::span<const int> delta, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto both = [&] {
        const auto pos = std::count(labels.begin(), labels.end(), 1);
        return pos > 0 && pos < static_cast<std::ptrdiff_t>(labels.size());
    };
    for (int attempt = 0; attempt < 20 && !both(); ++attempt)
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = unif(rng) < w[i] ? 1 : -1;
    if (both()) return;

    std::size_t pick = labels.size();
    if (labels.front() > 0) {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (delta[i] == 0 && (pick == labels.size() || w[i] < w[pick])) pick = i;
        if (pick == labels.size())
            fail(ErrorCode::degenerate_labels, "imputation: every subject is an event, no cured label possible");
        labels[pick] = -1;
    } else {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (pick == labels.size() || w[i] > w[pick]) pick = i;
        labels[pick] = 1;
    }
}

double IncidenceModel::predict(RowRef x) const {
    require(!members.empty(), "incidence model has no members");
    double sum = 0.0;
    for (const auto& member : members) sum += platt_prob(member.platt, decision_value(member.svm, x));
    return sum / static_cast<double>(members.size());
}

Vector IncidenceModel::predict_all(const RowMatrix& x) const {
    Vector out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
    return out;
}

IncidenceModel fit_incidence(const RowMatrix& x, std::span<const std::vector<int>> labels, const KernelSpec& kernel,
                             std::uint64_t seed, double kkt_tol) {
    require(!labels.empty(), "fit_incidence: no label vectors");
    IncidenceModel model;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        SvmModel svm;
        try {
            svm = smo_train(x, labels[k], kernel, {kkt_tol, seed});
        } catch (const IterationLimitError<SvmModel>& limit) {
            svm = limit.best();
        }
        const Vector g = cross_validated_decisions(x, labels[k], svm, kernel, kPlattFolds, seed, kkt_tol);
        const PlattCalibration platt =
            platt_fit(std::span<const double>(g.data(), static_cast<std::size_t>(g.size())), labels[k]);
        model.members.push_back({std::move(svm), platt});
    }
    return model;
}

double LogitParams::predict(RowRef x) const {
    require(x.size() + 1 == gamma.size(), "logit predict: covariate dimension mismatch");
    return logistic(gamma[0] + x.dot(gamma.tail(gamma.size() - 1)));
}

const char* to_string(IncidenceKind kind) { return kind == IncidenceKind::svm ? "pcm-svm" : "pcm-logit"; }

double PcmFit::incidence_prob(RowRef x) const {
    return clip_pi(std::visit([&](const auto& model) { return model.predict(x); }, incidence));
}

EmRun run_em(const SurvivalData& data, const EmConfig& config, Vector initial_pi, const IncidenceStep& incidence_step) {
    check_em_data(data, config);
    const std::size_t n = data.size();
    const Eigen::Index q = data.z.cols();
    require(static_cast<std::size_t>(initial_pi.size()) == n, "EM: initial pi has the wrong length");

    const RiskSetIndex index = build_risk_index(data.time, data.delta, data.z);
    const std::vector<double> unit(n, 1.0);
    LatencyModel latency{Vector::Constant(q, 0.5), breslow_baseline(Vector::Zero(q), index, unit, data.z)};
    Vector pi = initial_pi.unaryExpr([](double p) { return clip_pi(p); });

    std::vector<double> cdf(n), weights(n);
    Vector n_expect(static_cast<Eigen::Index>(n)), w(static_cast<Eigen::Index>(n));
    auto e_step = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            cdf[i] = promotion_cdf(data.time[i], data.z.row(row), latency);
            n_expect[row] = expected_count(pi[row], cdf[i], data.delta[i]);
            w[row] = uncured_weight(pi[row], cdf[i], data.delta[i]);
        }
    };

    EmRun run;
    Vector psi_prev = pack_parameters(pi, latency);
    int iteration = 0;
    while (iteration < config.max_iter) {
        ++iteration;
        with_iteration_context(iteration, [&] {
            e_step();
            Vector next_pi = incidence_step(n_expect, w, iteration);
            require(static_cast<std::size_t>(next_pi.size()) == n, "incidence step returned the wrong length");
            for (std::size_t i = 0; i < n; ++i) weights[i] = std::max(n_expect[static_cast<Eigen::Index>(i)], kMinRiskWeight);
            CoxFitResult cox;
            try {
                cox = fit_beta(index, weights, data.z, latency.beta);
            } catch (const IterationLimitError<CoxFitResult>& limit) {
                cox = limit.best();
            }
            latency = LatencyModel{cox.beta, breslow_baseline(cox.beta, index, weights, data.z)};
            pi = next_pi.unaryExpr([](double p) { return clip_pi(p); });
            return 0;
        });
        const Vector psi = pack_parameters(pi, latency);
        const double change = (psi - psi_prev).squaredNorm();
        if (!std::isfinite(change))
            fail(ErrorCode::numerical, "EM iteration " + std::to_string(iteration) + ": parameter change is not finite");
        run.trace.push_back(change);
        psi_prev = psi;
        if (change < config.eps) {
            run.converged = true;
            break;
        }
    }

    e_step();
    run.state = EmState{pi, n_expect, w, latency, iteration, psi_prev};
    return run;
}

PcmFit em_fit(const SurvivalData& data, const EmConfig& config) {
    check_em_data(data, config);
    const std::size_t n = data.size();
    std::vector<int> initial_labels(n);
    for (std::size_t i = 0; i < n; ++i) initial_labels[i] = data.delta[i] == 1 ? 1 : -1;

    PcmFit fit;
    fit.kind = IncidenceKind::svm;
    fit.config = config;
    if (config.kernel) {
        config.kernel->validate();
        fit.kernel = config.kernel;
        fit.cv_accuracy = std::numeric_limits<double>::quiet_NaN();
    } else {
        const TuningResult tuned = tune_hyperparams(
            data.x, initial_labels,
            {config.gamma_grid, config.cost_grid, config.cv_folds, derive_seed(config.seed, stream::tuning), config.kkt_tol});
        fit.kernel = tuned.spec;
        fit.cv_accuracy = tuned.cv_accuracy;
    }
    const KernelSpec kernel = *fit.kernel;
    const std::uint64_t smo_seed = derive_seed(config.seed, stream::smo);

    const std::vector<std::vector<int>> initial_set{initial_labels};
    IncidenceModel current = fit_incidence(data.x, initial_set, kernel, smo_seed, config.kkt_tol);
    const Vector initial_pi = current.predict_all(data.x);

    // The imputation stream restarts every iteration, so the EM map is a
    // deterministic function of the current parameters.
    auto step = [&](const Vector& /*n_expect*/, const Vector& w, int /*iteration*/) {
        Rng rng(derive_seed(config.seed, stream::imputation));
        const std::span<const double> wspan(w.data(), static_cast<std::size_t>(w.size()));
        auto labels = impute_statuses(wspan, config.imputations, rng);
        for (auto& v : labels) ensure_two_classes(v, wspan, data.delta, rng);
        current = fit_incidence(data.x, labels, kernel, smo_seed, config.kkt_tol);
        return current.predict_all(data.x);
    };

    EmRun run = run_em(data, config, initial_pi, step);
    fit.incidence = std::move(current);
    fit.latency = run.state.latency;
    fit.diagnostics = std::move(run.state);
    fit.converged = run.converged;
    fit.trace = std::move(run.trace);
    return fit;
}

RowMatrix with_intercept(const RowMatrix& x) {
    RowMatrix design(x.rows(), x.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(x.cols()) = x;
    return design;
}

double logit_q1(const Vector& gamma, const RowMatrix& design, std::span<const double> n_expect) {
    const Vector eta = design * gamma;
    double value = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double nn = n_expect[static_cast<std::size_t>(i)];
        value += -softplus(eta[i]) + (nn > 0.0 ? nn * log_softplus(eta[i]) : 0.0);
    }
    return value;
}

Vector logit_q1_gradient(const Vector& gamma, const RowMatrix& design, std::span<const double> n_expect) {
    const Vector eta = design * gamma;
    Vector grad = Vector::Zero(gamma.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double p = logistic(eta[i]);
        const double ratio = n_expect[static_cast<std::size_t>(i)] * std::exp(std::log(p) - log_softplus(eta[i]));
        grad.noalias() += (ratio - p) * design.row(i).transpose();
    }
    return grad;
}

namespace {

// Maximizes a concave objective by Newton with step halving. `derivs` fills
// the gradient and the negative Hessian.
template <class Value, class Derivs>
Vector newton_ascent(Vector x, double grad_tol, int max_iter, Value&& value_of, Derivs&& derivs, const char* what) {
    const Eigen::Index d = x.size();
    double value = value_of(x);
    Vector grad(d);
    Matrix info(d, d);
    for (int iter = 0;; ++iter) {
        derivs(x, grad, info);
        if (grad.lpNorm<Eigen::Infinity>() <= grad_tol) return x;
        if (iter >= max_iter) throw IterationLimitError<Vector>(std::string(what) + ": Newton iteration cap reached", x);
        Eigen::LLT<Matrix> llt(info);
        if (llt.info() != Eigen::Success) {
            llt.compute(info + 1e-8 * Matrix::Identity(d, d));
            if (llt.info() != Eigen::Success) fail(ErrorCode::numerical, std::string(what) + ": singular Hessian");
        }
        const Vector direction = llt.solve(grad);
        double step = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 50; ++halving, step *= 0.5) {
            const Vector trial = x + step * direction;
            const double trial_value = value_of(trial);
            if (std::isfinite(trial_value) && trial_value >= value) {
                accepted = trial != x;
                x = trial;
                value = trial_value;
                break;
            }
        }
        if (!accepted) return x;
    }
}

}  // namespace

Vector maximize_logit_q1(const RowMatrix& design, std::span<const double> n_expect, const Vector& init) {
    require(static_cast<std::size_t>(design.rows()) == n_expect.size(), "logit Q1: length mismatch");
    auto derivs = [&](const Vector& gamma, Vector& grad, Matrix& info) {
        const Vector eta = design * gamma;
        grad.setZero();
        info.setZero();
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            const double nn = n_expect[static_cast<std::size_t>(i)];
            const double p = logistic(eta[i]);
            const double ratio = nn * std::exp(std::log(p) - log_softplus(eta[i]));  // N pi / theta
            const double first = ratio - p;
            const double second = (1.0 - p) * (ratio - p) - ratio * ratio / std::max(nn, 1e-300);
            grad.noalias() += first * design.row(i).transpose();
            info.noalias() -= (nn > 0.0 ? second : -p * (1.0 - p)) * design.row(i).transpose() * design.row(i);
        }
    };
    return newton_ascent(
        init, 1e-9, 100, [&](const Vector& g) { return logit_q1(g, design, n_expect); }, derivs, "logit Q1");
}

Vector fit_logistic(const RowMatrix& design, std::span<const int> response) {
    require(static_cast<std::size_t>(design.rows()) == response.size(), "fit_logistic: length mismatch");
    auto loglik = [&](const Vector& gamma) {
        const Vector eta = design * gamma;
        double value = 0.0;
        for (Eigen::Index i = 0; i < eta.size(); ++i)
            value += response[static_cast<std::size_t>(i)] * eta[i] - softplus(eta[i]);
        return value;
    };
    auto derivs = [&](const Vector& gamma, Vector& grad, Matrix& info) {
        const Vector eta = design * gamma;
        grad.setZero();
        info.setZero();
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            const double p = logistic(eta[i]);
            grad.noalias() += (response[static_cast<std::size_t>(i)] - p) * design.row(i).transpose();
            info.noalias() += p * (1.0 - p) * design.row(i).transpose() * design.row(i);
        }
    };
    try {
        return newton_ascent(Vector::Zero(design.cols()), 1e-9, 100, loglik, derivs, "logistic start");
    } catch (const IterationLimitError<Vector>& limit) {
        return limit.best();
    }
}

PcmFit logit_em_fit(const SurvivalData& data, const EmConfig& config) {
    check_em_data(data, config);
    const RowMatrix design = with_intercept(data.x);
    Vector gamma = fit_logistic(design, data.delta);
    auto probabilities = [&](const Vector& g) {
        Vector eta = design * g;
        return Vector(eta.unaryExpr([](double e) { return logistic(e); }));
    };

    auto step = [&](const Vector& n_expect, const Vector& /*w*/, int /*iteration*/) {
        const std::span<const double> counts(n_expect.data(), static_cast<std::size_t>(n_expect.size()));
        try {
            gamma = maximize_logit_q1(design, counts, gamma);
        } catch (const IterationLimitError<Vector>& limit) {
            gamma = limit.best();
        }
        return probabilities(gamma);
    };

    EmRun run = run_em(data, config, probabilities(gamma), step);
    PcmFit fit;
    fit.kind = IncidenceKind::logit;
    fit.config = config;
    fit.incidence = LogitParams{gamma};
    fit.latency = run.state.latency;
    fit.diagnostics = std::move(run.state);
    fit.converged = run.converged;
    fit.trace = std::move(run.trace);
    return fit;
}

PcmFit fit_model(IncidenceKind kind, const SurvivalData& data, const EmConfig& config) {
    return kind == IncidenceKind::svm ? em_fit(data, config) : logit_em_fit(data, config);
}

Prediction predict(const PcmFit& fit, RowRef x, RowRef z, double t) {
    require(t >= 0.0, "predict: time must be non-negative");
    Eigen::RowVectorXd xs = x, zs = z;
    if (fit.standardization) {
        xs = fit.standardization->apply_x(x);
        zs = fit.standardization->apply_z(z);
    }
    Prediction out;
    const double raw = std::visit([&](const auto& model) { return model.predict(xs); }, fit.incidence);
    out.pi = clip_pi(raw);
    out.pi_clipped = out.pi != raw;
    const double cdf = promotion_cdf(t, zs, fit.latency);
    out.s_promotion = 1.0 - cdf;
    out.s_pop = std::exp(cdf * std::log1p(-out.pi));
    out.s_susceptible = std::clamp((out.s_pop - (1.0 - out.pi)) / out.pi, 0.0, 1.0);
    return out;
}

BootstrapResult bootstrap_from_resamples(const SurvivalData& data, IncidenceKind kind, const EmConfig& config,
                                         std::span<const std::vector<std::size_t>> resamples,
                                         std::span<const std::uint64_t> fit_seeds, unsigned jobs,
                                         const RowMatrix* pi_points) {
    require(resamples.size() == fit_seeds.size(), "bootstrap: one fit seed per resample is required");
    require(resamples.size() >= 2, "bootstrap: at least two replicates are required");
    struct Replicate {
        bool ok = false;
        bool converged = false;
        Vector beta;
        Vector pi;
    };
    std::vector<Replicate> results(resamples.size());
    parallel_for(resamples.size(), jobs, [&](std::size_t r) {
        try {
            EmConfig replicate_config = config;
            replicate_config.seed = fit_seeds[r];
            const PcmFit fit = fit_model(kind, subset(data, resamples[r]), replicate_config);
            Replicate& out = results[r];
            out.beta = fit.latency.beta;
            if (pi_points) {
                out.pi.resize(pi_points->rows());
                for (Eigen::Index k = 0; k < pi_points->rows(); ++k) out.pi[k] = fit.incidence_prob(pi_points->row(k));
            }
            out.converged = fit.converged;
            out.ok = true;
        } catch (const Error&) {
            results[r].ok = false;
        }
    });

    BootstrapResult out;
    out.replicates = static_cast<int>(resamples.size());
    std::vector<const Replicate*> good;
    for (const auto& r : results) {
        if (r.ok) {
            good.push_back(&r);
            if (!r.converged) ++out.not_converged;
        } else {
            ++out.failures;
        }
    }
    out.successes = static_cast<int>(good.size());
    if (good.size() < 2)
        fail(ErrorCode::bootstrap_failure, "bootstrap: only " + std::to_string(good.size()) + " of " +
                                               std::to_string(resamples.size()) + " replicates succeeded");

    const Eigen::Index q = good.front()->beta.size();
    out.beta_draws.resize(static_cast<Eigen::Index>(good.size()), q);
    for (std::size_t k = 0; k < good.size(); ++k) out.beta_draws.row(static_cast<Eigen::Index>(k)) = good[k]->beta.transpose();
    auto column_sd = [](const RowMatrix& draws) {
        const Eigen::RowVectorXd mean = draws.colwise().mean();
        const double denom = static_cast<double>(draws.rows() - 1);
        return Vector(((draws.rowwise() - mean).array().square().colwise().sum() / denom).sqrt().transpose());
    };
    out.beta_se = column_sd(out.beta_draws);
    if (pi_points && pi_points->rows() > 0) {
        RowMatrix pi_draws(static_cast<Eigen::Index>(good.size()), pi_points->rows());
        for (std::size_t k = 0; k < good.size(); ++k) pi_draws.row(static_cast<Eigen::Index>(k)) = good[k]->pi.transpose();
        out.pi_se = column_sd(pi_draws);
    }
    return out;
}

BootstrapResult bootstrap_se(const SurvivalData& data, IncidenceKind kind, const EmConfig& config, int replicates,
                             std::uint64_t seed, unsigned jobs, const RowMatrix* pi_points) {
    require(replicates >= 2, "bootstrap: at least two replicates are required");
    const std::size_t n = data.size();
    std::vector<std::vector<std::size_t>> resamples(static_cast<std::size_t>(replicates));
    std::vector<std::uint64_t> seeds(resamples.size());
    for (std::size_t r = 0; r < resamples.size(); ++r) {
        Rng rng(derive_seed(seed, stream::bootstrap_resample, r));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        resamples[r].resize(n);
        for (auto& i : resamples[r]) i = pick(rng);
        seeds[r] = derive_seed(seed, stream::bootstrap_fit, r);
    }
    return bootstrap_from_resamples(data, kind, config, resamples, seeds, jobs, pi_points);
}

}  // namespace pcm
