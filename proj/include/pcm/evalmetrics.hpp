#pragma once

// Monte Carlo bias/MSE aggregation, classification accuracy and ROC analysis,
// including ROC curves averaged over imputed cure statuses.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pcm {

struct BiasMse {
    double bias = 0.0;
    double mse = 0.0;
};

// One run: mean of (est - truth) and of (est - truth)^2 over subjects.
BiasMse run_error(std::span<const double> estimates, std::span<const double> truths);

// Means over runs of the per-run quantities above.
BiasMse bias_mse(std::span<const std::vector<double>> estimates, std::span<const std::vector<double>> truths);

enum class Quantity { pi, s_pop, s_susceptible, s_promotion };
inline constexpr std::array<Quantity, 4> kQuantities{Quantity::pi, Quantity::s_pop, Quantity::s_susceptible,
                                                      Quantity::s_promotion};
const char* to_string(Quantity q);

class McAccumulator {
public:
    void add(Quantity q, const BiasMse& run);
    BiasMse result(Quantity q) const;
    std::size_t runs(Quantity q) const { return slot(q).runs; }

private:
    struct Sums {
        double error = 0.0;
        double squared = 0.0;
        std::size_t runs = 0;
    };
    const Sums& slot(Quantity q) const { return sums_[static_cast<std::size_t>(q)]; }
    std::array<Sums, 4> sums_{};
};

// Percentage of subjects whose call (susceptible iff pi_hat > threshold)
// matches the truth (1 susceptible, 0 cured).
double classification_accuracy(std::span<const double> pi_hat, std::span<const int> susceptible,
                               double threshold = 0.5);

struct RocCurve {
    std::vector<double> fpr;
    std::vector<double> tpr;
    double auc = 0.0;  // trapezoidal area of the stored points
};

// Descending-score sweep with tied scores collapsed into one step. Throws
// Error(degenerate_labels) unless both classes are present.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

// Piecewise-linear TPR of `curve` at `x`, taking the top of vertical segments.
double tpr_at(const RocCurve& curve, double x);

struct ImputedRoc {
    RocCurve mean_curve;    // (0,0) followed by the vertically averaged grid
    double mean_auc = 0.0;  // mean of the per-replicate AUCs
    int reps_used = 0;
    int reps_dropped = 0;
};

inline constexpr int kRocGridPoints = 101;

// Each replicate keeps events susceptible and draws censored subjects'
// statuses from Bernoulli(w). Single-class replicates are dropped; throws
// Error(degenerate_labels) if every replicate is.
ImputedRoc imputed_roc(std::span<const double> pi_hat, std::span<const double> w, std::span<const int> delta,
                       int reps, std::uint64_t seed, unsigned jobs = 1);

}  // namespace pcm
