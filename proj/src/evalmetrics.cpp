#include "pcm/evalmetrics.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include "pcm/error.hpp"
#include "pcm/parallel.hpp"
#include "pcm/rng.hpp"

namespace pcm {

BiasMse run_error(std::span<const double> estimates, std::span<const double> truths) {
    require(estimates.size() == truths.size(), "run_error: estimates and truths differ in length");
    require(!estimates.empty(), "run_error: no subjects");
    BiasMse out;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const double e = estimates[i] - truths[i];
        out.bias += e;
        out.mse += e * e;
    }
    const auto n = static_cast<double>(estimates.size());
    out.bias /= n;
    out.mse /= n;
    return out;
}

BiasMse bias_mse(std::span<const std::vector<double>> estimates, std::span<const std::vector<double>> truths) {
    require(estimates.size() == truths.size(), "bias_mse: run counts differ");
    require(!estimates.empty(), "bias_mse: at least one run is required");
    McAccumulator acc;
    for (std::size_t r = 0; r < estimates.size(); ++r) acc.add(Quantity::pi, run_error(estimates[r], truths[r]));
    return acc.result(Quantity::pi);
}

const char* to_string(Quantity q) {
    switch (q) {
    case Quantity::pi: return "pi";
    case Quantity::s_pop: return "s_pop";
    case Quantity::s_susceptible: return "s_susceptible";
    case Quantity::s_promotion: return "s_promotion";
    }
    return "?";
}

void McAccumulator::add(Quantity q, const BiasMse& run) {
    Sums& s = sums_[static_cast<std::size_t>(q)];
    s.error += run.bias;
    s.squared += run.mse;
    ++s.runs;
}

BiasMse McAccumulator::result(Quantity q) const {
    const Sums& s = slot(q);
    require(s.runs > 0, std::string("McAccumulator: no runs recorded for ") + to_string(q));
    const auto r = static_cast<double>(s.runs);
    return {s.error / r, s.squared / r};
}

double classification_accuracy(std::span<const double> pi_hat, std::span<const int> susceptible, double threshold) {
    require(pi_hat.size() == susceptible.size(), "classification_accuracy: length mismatch");
    require(!pi_hat.empty(), "classification_accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pi_hat.size(); ++i)
        if ((pi_hat[i] > threshold ? 1 : 0) == (susceptible[i] != 0 ? 1 : 0)) ++correct;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(pi_hat.size());
}

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
    require(scores.size() == labels.size(), "roc_auc: scores and labels differ in length");
    const auto positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int v) { return v != 0; }));
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) fail(ErrorCode::degenerate_labels, "roc_auc: AUC is undefined with a single class");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < order.size();) {
        const double s = scores[order[k]];
        while (k < order.size() && scores[order[k]] == s) {
            (labels[order[k]] != 0 ? tp : fp) += 1;
            ++k;
        }
        curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(negatives));
        curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(positives));
    }
    for (std::size_t k = 1; k < curve.fpr.size(); ++k)
        curve.auc += (curve.fpr[k] - curve.fpr[k - 1]) * (curve.tpr[k] + curve.tpr[k - 1]) / 2.0;
    return curve;
}

double tpr_at(const RocCurve& curve, double x) {
    const auto upper = std::upper_bound(curve.fpr.begin(), curve.fpr.end(), x);
    const auto k = static_cast<std::size_t>(upper - curve.fpr.begin());
    if (k == 0) return 0.0;
    if (k == curve.fpr.size()) return curve.tpr.back();
    const double x0 = curve.fpr[k - 1], x1 = curve.fpr[k];
    const double y0 = curve.tpr[k - 1], y1 = curve.tpr[k];
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
}

ImputedRoc imputed_roc(std::span<const double> pi_hat, std::span<const double> w, std::span<const int> delta,
                       int reps, std::uint64_t seed, unsigned jobs) {
    require(pi_hat.size() == w.size() && pi_hat.size() == delta.size(), "imputed_roc: length mismatch");
    require(reps >= 1, "imputed_roc: reps must be at least 1");

    struct Replicate {
        std::vector<double> tpr;
        double auc = 0.0;
    };
    std::vector<std::optional<Replicate>> results(static_cast<std::size_t>(reps));
    parallel_for(results.size(), jobs, [&](std::size_t r) {
        Rng rng(derive_seed(seed, stream::roc_imputation, r));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<int> labels(pi_hat.size());
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = delta[i] == 1 || unif(rng) < w[i] ? 1 : 0;
        const auto pos = std::count(labels.begin(), labels.end(), 1);
        if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) return;
        const RocCurve curve = roc_auc(pi_hat, labels);
        Replicate rep;
        rep.auc = curve.auc;
        rep.tpr.resize(kRocGridPoints);
        for (int g = 0; g < kRocGridPoints; ++g) rep.tpr[static_cast<std::size_t>(g)] = tpr_at(curve, g / 100.0);
        results[r] = std::move(rep);
    });

    ImputedRoc out;
    std::vector<double> tpr_sum(kRocGridPoints, 0.0);
    double auc_sum = 0.0;
    for (const auto& rep : results) {
        if (!rep) {
            ++out.reps_dropped;
            continue;
        }
        ++out.reps_used;
        auc_sum += rep->auc;
        for (std::size_t g = 0; g < tpr_sum.size(); ++g) tpr_sum[g] += rep->tpr[g];
    }
    if (out.reps_used == 0) fail(ErrorCode::degenerate_labels, "imputed_roc: every replicate drew a single class");

    out.mean_auc = auc_sum / out.reps_used;
    RocCurve& curve = out.mean_curve;
    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);
    for (int g = 0; g < kRocGridPoints; ++g) {
        curve.fpr.push_back(g / 100.0);
        curve.tpr.push_back(tpr_sum[static_cast<std::size_t>(g)] / out.reps_used);
    }
    for (std::size_t k = 1; k < curve.fpr.size(); ++k)
        curve.auc += (curve.fpr[k] - curve.fpr[k - 1]) * (curve.tpr[k] + curve.tpr[k - 1]) / 2.0;
    return out;
}

}  // namespace pcm
