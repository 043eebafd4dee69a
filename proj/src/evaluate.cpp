#include "pcm/evaluate.hpp"

#include <algorithm>
#include <ostream>

#include "pcm/error.hpp"

namespace pcm {

const char* to_string(EvalSubset subset) {
    switch (subset) {
    case EvalSubset::all: return "all";
    case EvalSubset::train: return "train";
    case EvalSubset::test: return "test";
    }
    return "?";
}

Evaluation evaluate_fit(const PcmFit& fit, const SurvivalData& data, const TruthTable* truth,
                        const EvaluationOptions& options) {
    data.validate();
    if (truth) require(truth->size() == data.size(), "evaluate: truth table and dataset differ in length");
    require(options.subset == EvalSubset::all || truth, "evaluate: a train or test subset needs the truth table");

    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (options.subset == EvalSubset::all || (truth->train[i] == 1) == (options.subset == EvalSubset::train))
            rows.push_back(i);
    }
    require(!rows.empty(), "evaluate: the selected subset is empty");

    std::array<std::vector<double>, 4> est;
    std::vector<double> w;
    std::vector<int> delta;
    for (std::size_t i : rows) {
        const auto r = static_cast<Eigen::Index>(i);
        const Prediction p = predict(fit, data.x.row(r), data.z.row(r), data.time[i]);
        est[0].push_back(p.pi);
        est[1].push_back(p.s_pop);
        est[2].push_back(p.s_susceptible);
        est[3].push_back(p.s_promotion);
        w.push_back(uncured_weight(p.pi, 1.0 - p.s_promotion, data.delta[i]));
        delta.push_back(data.delta[i]);
    }

    Evaluation out;
    out.subset = options.subset;
    out.subjects = rows.size();
    out.events = static_cast<std::size_t>(std::count(delta.begin(), delta.end(), 1));
    out.fit_converged = fit.converged;
    out.seed = options.seed;
    if (truth && options.use_truth) {
        out.used_truth = true;
        auto pick = [&](const auto& v) {
            std::vector<std::decay_t<decltype(v[0])>> o;
            for (std::size_t i : rows) o.push_back(v[i]);
            return o;
        };
        const auto labels = pick(truth->true_susceptible);
        out.roc = roc_auc(est[0], labels);
        out.auc = out.roc.auc;
        out.ca = classification_accuracy(est[0], labels);
        out.errors[0] = run_error(est[0], pick(truth->true_pi));
        out.errors[1] = run_error(est[1], pick(truth->true_s_pop));
        out.errors[2] = run_error(est[2], pick(truth->true_s_susceptible));
        out.errors[3] = run_error(est[3], pick(truth->true_s_promotion));
    } else {
        const ImputedRoc imputed = imputed_roc(est[0], w, delta, options.reps, options.seed, options.jobs);
        out.roc = imputed.mean_curve;
        out.auc = imputed.mean_auc;
        out.reps_used = imputed.reps_used;
        out.reps_dropped = imputed.reps_dropped;
    }
    return out;
}

void write_evaluation(std::ostream& out, const Evaluation& eval) {
    out << "# pcm evaluation\n";
    out << "format_version " << kReportFormatVersion << '\n';
    out << "labels " << (eval.used_truth ? "truth" : "imputed") << '\n';
    out << "subset " << to_string(eval.subset) << '\n';
    out << "subjects " << eval.subjects << '\n';
    out << "events " << eval.events << '\n';
    out << "fit_converged " << (eval.fit_converged ? 1 : 0) << '\n';
    out << "auc " << format_double(eval.auc) << '\n';
    out << "curve_auc " << format_double(eval.roc.auc) << '\n';
    if (eval.used_truth) {
        out << "classification_accuracy " << format_double(eval.ca) << '\n';
        out << "\n[errors]\n# quantity bias mse\n";
        for (Quantity q : kQuantities) {
            const BiasMse& e = eval.errors[static_cast<std::size_t>(q)];
            out << to_string(q) << ' ' << format_double(e.bias) << ' ' << format_double(e.mse) << '\n';
        }
    } else {
        out << "seed " << eval.seed << '\n';
        out << "reps_used " << eval.reps_used << '\n';
        out << "reps_dropped " << eval.reps_dropped << '\n';
    }
}

}  // namespace pcm
