#include "pcm/cox_latency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pcm/error.hpp"

namespace pcm {

RiskSetIndex build_risk_index(std::span<const double> times, std::span<const int> delta, const RowMatrix& z) {
    const std::size_t n = times.size();
    require(delta.size() == n && static_cast<std::size_t>(z.rows()) == n,
            "build_risk_index: times, delta and z disagree in length");
    for (std::size_t i = 0; i < n; ++i) {
        require(std::isfinite(times[i]) && times[i] > 0.0,
                "build_risk_index: observed time must be positive (subject " + std::to_string(i) + ")");
        require(delta[i] == 0 || delta[i] == 1, "build_risk_index: delta must be 0 or 1");
    }

    RiskSetIndex index;
    index.order.resize(n);
    std::iota(index.order.begin(), index.order.end(), std::size_t{0});
    std::stable_sort(index.order.begin(), index.order.end(),
                     [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    std::vector<RowMatrix::Scalar> sums;
    const Eigen::Index q = z.cols();
    for (std::size_t pos = 0; pos < n;) {
        const double t = times[index.order[pos]];
        std::size_t end = pos;
        int events = 0;
        Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(q);
        while (end < n && times[index.order[end]] == t) {
            const std::size_t i = index.order[end];
            if (delta[i] == 1) {
                ++events;
                s += z.row(static_cast<Eigen::Index>(i));
            }
            ++end;
        }
        if (events > 0) {
            index.event_times.push_back(t);
            index.event_counts.push_back(events);
            index.risk_start.push_back(pos);
            sums.insert(sums.end(), s.data(), s.data() + q);
        }
        pos = end;
    }
    if (index.event_times.empty()) fail(ErrorCode::empty_events, "build_risk_index: no uncensored event times");
    index.event_cov_sums =
        Eigen::Map<const RowMatrix>(sums.data(), static_cast<Eigen::Index>(index.event_times.size()), q);
    return index;
}

namespace {

void check_inputs(const Vector& beta, const RiskSetIndex& index, std::span<const double> weights,
                  const RowMatrix& z) {
    require(weights.size() == index.num_subjects() && static_cast<std::size_t>(z.rows()) == index.num_subjects(),
            "partial likelihood: weights or z do not match the risk index");
    require(beta.size() == z.cols(), "partial likelihood: beta has " + std::to_string(beta.size()) +
                                         " entries but z has " + std::to_string(z.cols()) + " columns");
    for (std::size_t pos = index.risk_start.front(); pos < index.num_subjects(); ++pos) {
        const double w = weights[index.order[pos]];
        require(std::isfinite(w) && w > 0.0,
                "partial likelihood: non-positive weight inside a risk set (subject " +
                    std::to_string(index.order[pos]) + ")");
    }
}

// Accumulates the weighted risk-set sums from the latest time backwards and
// hands (j, S0, S1, S2, shift) to `visit`; sums are scaled by exp(-shift).
template <class Visit>
void sweep_risk_sets(const Vector& beta, const RiskSetIndex& index, std::span<const double> weights,
                     const RowMatrix& z, bool second_order, Visit&& visit) {
    const Eigen::Index q = z.cols();
    const Vector eta = z * beta;
    const double shift = eta.size() > 0 ? eta.maxCoeff() : 0.0;
    double s0 = 0.0;
    Vector s1 = Vector::Zero(q);
    Matrix s2 = Matrix::Zero(second_order ? q : 0, second_order ? q : 0);
    std::size_t pos = index.num_subjects();
    for (std::size_t jj = index.num_events(); jj-- > 0;) {
        while (pos > index.risk_start[jj]) {
            --pos;
            const auto i = static_cast<Eigen::Index>(index.order[pos]);
            const double r = weights[index.order[pos]] * std::exp(eta[i] - shift);
            s0 += r;
            s1.noalias() += r * z.row(i).transpose();
            if (second_order) s2.noalias() += r * z.row(i).transpose() * z.row(i);
        }
        visit(jj, s0, s1, s2, shift);
    }
}

}  // namespace

double partial_loglik(const Vector& beta, const RiskSetIndex& index, std::span<const double> weights,
                      const RowMatrix& z) {
    check_inputs(beta, index, weights, z);
    double value = 0.0;
    sweep_risk_sets(beta, index, weights, z, false,
                    [&](std::size_t j, double s0, const Vector&, const Matrix&, double shift) {
                        const auto row = static_cast<Eigen::Index>(j);
                        value += index.event_cov_sums.row(row).dot(beta) -
                                 index.event_counts[j] * (std::log(s0) + shift);
                    });
    return value;
}

PartialLikelihood partial_loglik_derivatives(const Vector& beta, const RiskSetIndex& index,
                                             std::span<const double> weights, const RowMatrix& z) {
    check_inputs(beta, index, weights, z);
    const Eigen::Index q = z.cols();
    PartialLikelihood out{0.0, Vector::Zero(q), Matrix::Zero(q, q)};
    sweep_risk_sets(beta, index, weights, z, true,
                    [&](std::size_t j, double s0, const Vector& s1, const Matrix& s2, double shift) {
                        const auto row = static_cast<Eigen::Index>(j);
                        const double d = index.event_counts[j];
                        const Vector mean = s1 / s0;
                        out.value += index.event_cov_sums.row(row).dot(beta) - d * (std::log(s0) + shift);
                        out.gradient += index.event_cov_sums.row(row).transpose() - d * mean;
                        out.hessian -= d * (s2 / s0 - mean * mean.transpose());
                    });
    return out;
}

CoxFitResult fit_beta(const RiskSetIndex& index, std::span<const double> weights, const RowMatrix& z,
                      const Vector& init_beta) {
    constexpr int kMaxIter = 100;
    constexpr double kGradTol = 1e-6;
    const Eigen::Index q = z.cols();
    CoxFitResult current{init_beta, 0, 0.0};
    PartialLikelihood pl = partial_loglik_derivatives(current.beta, index, weights, z);
    current.loglik = pl.value;
    require(std::isfinite(pl.value), "fit_beta: partial likelihood is not finite at the initial beta");

    for (;;) {
        if (pl.gradient.lpNorm<Eigen::Infinity>() <= kGradTol) return current;
        if (current.iterations >= kMaxIter)
            throw IterationLimitError<CoxFitResult>("fit_beta: no convergence in 100 Newton iterations", current);

        const Matrix info = -pl.hessian;
        Eigen::LLT<Matrix> llt(info);
        if (llt.info() != Eigen::Success) {
            llt.compute(info + 1e-8 * Matrix::Identity(q, q));
            if (llt.info() != Eigen::Success)
                fail(ErrorCode::numerical, "fit_beta: information matrix is singular even after the ridge fallback");
        }
        const Vector direction = llt.solve(pl.gradient);

        double step = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
            const Vector trial = current.beta + step * direction;
            const double value = partial_loglik(trial, index, weights, z);
            if (std::isfinite(value) && value >= current.loglik) {
                current.beta = trial;
                accepted = true;
                break;
            }
        }
        ++current.iterations;
        if (!accepted)
            throw IterationLimitError<CoxFitResult>("fit_beta: step halving could not increase the likelihood",
                                                    current);
        pl = partial_loglik_derivatives(current.beta, index, weights, z);
        current.loglik = pl.value;
    }
}

BaselineSurvival::BaselineSurvival(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
    require(times_.size() == values_.size(), "baseline survival: times and values differ in length");
    for (std::size_t j = 0; j < times_.size(); ++j) {
        require(j == 0 || times_[j] > times_[j - 1], "baseline survival: times must be strictly increasing");
        require(values_[j] > 0.0 && values_[j] <= 1.0, "baseline survival: values must lie in (0, 1]");
        require(j == 0 || values_[j] <= values_[j - 1], "baseline survival: values must be non-increasing");
    }
}

double BaselineSurvival::operator()(double t) const {
    const auto past = std::lower_bound(times_.begin(), times_.end(), t) - times_.begin();
    return past == 0 ? 1.0 : values_[static_cast<std::size_t>(past - 1)];
}

BaselineSurvival breslow_baseline(const Vector& beta, const RiskSetIndex& index, std::span<const double> weights,
                                  const RowMatrix& z) {
    check_inputs(beta, index, weights, z);
    std::vector<double> increments(index.num_events());
    sweep_risk_sets(beta, index, weights, z, false,
                    [&](std::size_t j, double s0, const Vector&, const Matrix&, double shift) {
                        increments[j] = index.event_counts[j] * std::exp(-shift) / s0;
                    });
    std::vector<double> values(index.num_events());
    double cumulative = 0.0;
    for (std::size_t j = 0; j < increments.size(); ++j) {
        cumulative += increments[j];
        values[j] = std::max(std::exp(-cumulative), std::numeric_limits<double>::min());
    }
    return BaselineSurvival(index.event_times, std::move(values));
}

double promotion_cdf(double t, RowRef z, const LatencyModel& model) {
    require(z.size() == model.beta.size(), "promotion_cdf: covariate dimension mismatch");
    const double s0 = model.baseline(t);
    if (s0 >= 1.0) return 0.0;
    const double f = -std::expm1(std::exp(z.dot(model.beta)) * std::log(s0));
    return std::clamp(f, 0.0, 1.0);
}

}  // namespace pcm
