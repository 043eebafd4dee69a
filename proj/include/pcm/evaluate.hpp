#pragma once

// Scores a fitted model on a dataset, against the true cure statuses when a
// truth table is available and against imputed statuses otherwise.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>

#include "pcm/evalmetrics.hpp"
#include "pcm/io.hpp"
#include "pcm/pcm_em.hpp"

namespace pcm {

enum class EvalSubset { all, train, test };
const char* to_string(EvalSubset subset);

struct EvaluationOptions {
    EvalSubset subset = EvalSubset::all;
    bool use_truth = true;  // false: the truth table only supplies the split
    int reps = 500;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

struct Evaluation {
    bool used_truth = false;
    EvalSubset subset = EvalSubset::all;
    std::size_t subjects = 0;
    std::size_t events = 0;
    bool fit_converged = false;
    RocCurve roc;        // truth ROC, or the vertically averaged imputed curve
    double auc = 0.0;    // truth AUC, or the mean imputed AUC
    // Truth only.
    double ca = 0.0;
    std::array<BiasMse, 4> errors{};  // indexed by Quantity
    // Imputation only.
    int reps_used = 0;
    int reps_dropped = 0;
    std::uint64_t seed = 0;
};

// Data on the original scale. Imputation weights come from the fit itself:
// w = uncured_weight(pi_hat, F(t; z), delta).
Evaluation evaluate_fit(const PcmFit& fit, const SurvivalData& data, const TruthTable* truth,
                        const EvaluationOptions& options);

void write_evaluation(std::ostream& out, const Evaluation& eval);

}  // namespace pcm
