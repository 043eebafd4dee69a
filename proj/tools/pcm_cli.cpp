// Command-line front end over the C interface.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcmsvm/pcmsvm.h"

namespace {

enum Exit { kOk = 0, kOther = 1, kInput = 2, kNonConvergence = 3, kNumerical = 4, kDegenerate = 5 };

int exit_code(pcm_status s) {
    switch (s) {
    case PCM_OK: return kOk;
    case PCM_ERR_INVALID_INPUT:
    case PCM_ERR_IO:
    case PCM_ERR_PARSE: return kInput;
    case PCM_ERR_NON_CONVERGENCE: return kNonConvergence;
    case PCM_ERR_NUMERICAL: return kNumerical;
    case PCM_ERR_DEGENERATE_LABELS:
    case PCM_ERR_EMPTY_EVENTS:
    case PCM_ERR_BOOTSTRAP: return kDegenerate;
    case PCM_ERR_INTERNAL: return kOther;
    }
    return kOther;
}

struct Failure {
    int code;
};

void check(pcm_status s, const char* action) {
    if (s == PCM_OK) return;
    std::fprintf(stderr, "error: %s: %s (%s)\n", action, pcm_last_error_message(), pcm_status_string(s));
    throw Failure{exit_code(s)};
}

[[noreturn]] void usage_error(const std::string& msg) {
    std::fprintf(stderr, "error: %s\n", msg.c_str());
    throw Failure{kInput};
}

template <class T, void (*Free)(T*)>
struct Owned {
    T* p = nullptr;
    Owned() = default;
    Owned(const Owned&) = delete;
    Owned& operator=(const Owned&) = delete;
    ~Owned() { Free(p); }
    T** out() { return &p; }
    T* get() const { return p; }
};
using Dataset = Owned<pcm_dataset, pcm_dataset_free>;
using Fit = Owned<pcm_fit, pcm_fit_free>;
using Eval = Owned<pcm_eval, pcm_eval_free>;
using Study = Owned<pcm_study, pcm_study_free>;

std::string default_truth_path(const std::string& out) {
    std::filesystem::path p(out);
    p.replace_extension();
    return p.string() + ".truth.csv";
}

struct SimulateArgs {
    std::string method, out, truth_out;
    std::size_t n = 300;
    std::optional<std::uint64_t> seed;
    bool no_stratify = false;
    double train_fraction = 2.0 / 3.0;
    double censor_rate = 0.2;
};

struct EmArgs {
    int imputations = 5;
    double eps = 1e-3;
    int max_iter = 50;
    int cv_folds = 0;
    std::vector<double> gamma_grid, cost_grid;
};

struct FitArgs {
    std::string data, model = "pcm-svm", out, truth, pi_surface;
    std::optional<std::uint64_t> seed;
    EmArgs em;
    bool standardize = false, train_only = false;
    double gamma = 0.0, cost = 0.0;
    int bootstrap = 0;
    unsigned jobs = 1;
    std::vector<double> surface_range{-3.0, 3.0};
    int surface_points = 61;
};

struct StudyArgs {
    std::string method, out;
    std::size_t n = 300;
    int runs = 50;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    bool no_stratify = false;
    EmArgs em;
};

struct EvaluateArgs {
    std::string fit, data, truth, out, roc_out, subset = "all", labels;
    int reps = 500;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
};

void add_em_options(CLI::App* cmd, EmArgs& a) {
    cmd->add_option("--imputations", a.imputations, "Imputed label vectors per EM iteration")->check(CLI::PositiveNumber);
    cmd->add_option("--eps", a.eps, "Convergence threshold on the squared parameter change")->check(CLI::PositiveNumber);
    cmd->add_option("--max-iter", a.max_iter, "EM iteration cap")->check(CLI::PositiveNumber);
    cmd->add_option("--cv-folds", a.cv_folds, "Tuning folds (default 10 when n < 200, else 5)")->check(CLI::Range(2, 1000));
    cmd->add_option("--gamma-grid", a.gamma_grid, "Kernel width grid")->delimiter(',');
    cmd->add_option("--cost-grid", a.cost_grid, "Box constraint grid")->delimiter(',');
}

int run_simulate(const SimulateArgs& a) {
    pcm_sim_options o;
    pcm_sim_options_init(&o);
    check(pcm_parse_method(a.method.c_str(), &o.method), "simulate");
    if (!a.seed) usage_error("simulate requires --seed");
    o.n = a.n;
    o.seed = *a.seed;
    o.stratify_split = a.no_stratify ? 0 : 1;
    o.train_fraction = a.train_fraction;
    o.censor_rate = a.censor_rate;
    Dataset data;
    check(pcm_simulate(&o, data.out()), "simulate");
    check(pcm_dataset_write_csv(data.get(), a.out.c_str()), "write dataset");
    const std::string truth = a.truth_out.empty() ? default_truth_path(a.out) : a.truth_out;
    check(pcm_dataset_write_truth(data.get(), truth.c_str()), "write truth sidecar");
    std::printf("wrote %zu rows (%zu events) to %s, truth to %s\n", pcm_dataset_size(data.get()),
                pcm_dataset_num_events(data.get()), a.out.c_str(), truth.c_str());
    return kOk;
}

int run_fit(const FitArgs& a) {
    pcm_fit_options o;
    pcm_fit_options_init(&o);
    check(pcm_parse_model(a.model.c_str(), &o.model), "fit");
    if (!a.seed && (o.model == PCM_MODEL_SVM || a.bootstrap > 0))
        usage_error("fit requires --seed for pcm-svm or --bootstrap");
    if ((a.gamma > 0.0) != (a.cost > 0.0)) usage_error("--gamma and --cost must be given together");
    if (a.train_only && a.truth.empty()) usage_error("--train-only needs --truth for the split");
    if (a.surface_range.size() != 2) usage_error("--surface-range takes lo,hi");

    Dataset all;
    check(pcm_dataset_read_csv(a.data.c_str(), all.out()), "read dataset");
    if (!a.truth.empty()) check(pcm_dataset_read_truth(all.get(), a.truth.c_str()), "read truth sidecar");
    Dataset train;
    const pcm_dataset* data = all.get();
    if (a.train_only) {
        check(pcm_dataset_subset(all.get(), PCM_SUBSET_TRAIN, train.out()), "select training rows");
        data = train.get();
    }

    o.seed = a.seed.value_or(0);
    o.imputations = a.em.imputations;
    o.eps = a.em.eps;
    o.max_iter = a.em.max_iter;
    o.cv_folds = a.em.cv_folds;
    o.gamma = a.gamma;
    o.cost = a.cost;
    if (!a.em.gamma_grid.empty()) {
        o.gamma_grid = a.em.gamma_grid.data();
        o.gamma_grid_len = a.em.gamma_grid.size();
    }
    if (!a.em.cost_grid.empty()) {
        o.cost_grid = a.em.cost_grid.data();
        o.cost_grid_len = a.em.cost_grid.size();
    }
    o.standardize = a.standardize ? 1 : 0;
    o.bootstrap = a.bootstrap;
    o.jobs = a.jobs;

    Fit fit;
    check(pcm_fit_run(data, &o, fit.out()), "fit");
    check(pcm_fit_write_report(fit.get(), a.out.c_str()), "write report");
    if (!a.pi_surface.empty())
        check(pcm_fit_write_pi_surface(fit.get(), a.pi_surface.c_str(), a.surface_range[0], a.surface_range[1],
                                       a.surface_points),
              "write pi surface");
    const bool converged = pcm_fit_converged(fit.get()) != 0;
    std::printf("%s fit on %zu rows: %s after %d iterations, report %s\n", a.model.c_str(), pcm_dataset_size(data),
                converged ? "converged" : "NOT converged", pcm_fit_iterations(fit.get()), a.out.c_str());
    return converged ? kOk : kNonConvergence;
}

void apply_em(pcm_study_options& o, const EmArgs& em) {
    o.imputations = em.imputations;
    o.eps = em.eps;
    o.max_iter = em.max_iter;
    o.cv_folds = em.cv_folds;
    if (!em.gamma_grid.empty()) {
        o.gamma_grid = em.gamma_grid.data();
        o.gamma_grid_len = em.gamma_grid.size();
    }
    if (!em.cost_grid.empty()) {
        o.cost_grid = em.cost_grid.data();
        o.cost_grid_len = em.cost_grid.size();
    }
}

int run_study(const StudyArgs& a) {
    pcm_study_options o;
    pcm_study_options_init(&o);
    check(pcm_parse_method(a.method.c_str(), &o.method), "mc-study");
    if (!a.seed) usage_error("mc-study requires --seed");
    o.n = a.n;
    o.runs = a.runs;
    o.seed = *a.seed;
    o.jobs = a.jobs;
    o.stratify_split = a.no_stratify ? 0 : 1;
    apply_em(o, a.em);
    Study study;
    check(pcm_mc_study(&o, study.out()), "mc-study");
    check(pcm_study_write_report(study.get(), a.out.c_str()), "write study report");
    for (pcm_model m : {PCM_MODEL_SVM, PCM_MODEL_LOGIT}) {
        pcm_study_summary s;
        if (pcm_study_summary_get(study.get(), m, &s) != PCM_OK) continue;
        std::printf("%s: %d ok, %d failed; pi bias %.4f mse %.4f; test AUC %.4f\n",
                    m == PCM_MODEL_SVM ? "pcm-svm" : "pcm-logit", s.successes, s.failures, s.pi_bias, s.pi_mse,
                    s.auc_test);
    }
    return kOk;
}

int run_evaluate(const EvaluateArgs& a) {
    Fit fit;
    check(pcm_fit_read_report(a.fit.c_str(), fit.out()), "read fit report");
    Dataset data;
    check(pcm_dataset_read_csv(a.data.c_str(), data.out()), "read dataset");
    if (!a.truth.empty()) check(pcm_dataset_read_truth(data.get(), a.truth.c_str()), "read truth sidecar");

    pcm_eval_options o;
    pcm_eval_options_init(&o);
    if (a.subset == "all")
        o.subset = PCM_SUBSET_ALL;
    else if (a.subset == "train")
        o.subset = PCM_SUBSET_TRAIN;
    else if (a.subset == "test")
        o.subset = PCM_SUBSET_TEST;
    else
        usage_error("--subset must be all, train or test");
    const std::string labels = a.labels.empty() ? (a.truth.empty() ? "imputed" : "truth") : a.labels;
    if (labels != "truth" && labels != "imputed") usage_error("--labels must be truth or imputed");
    if (labels == "truth" && a.truth.empty()) usage_error("--labels truth needs --truth");
    o.use_truth = labels == "truth" ? 1 : 0;
    if (!o.use_truth && !a.seed) usage_error("evaluate with imputed labels requires --seed");
    o.reps = a.reps;
    o.seed = a.seed.value_or(0);
    o.jobs = a.jobs;

    Eval eval;
    check(pcm_evaluate(fit.get(), data.get(), &o, eval.out()), "evaluate");
    check(pcm_eval_write(eval.get(), a.out.c_str()), "write metrics");
    if (!a.roc_out.empty()) check(pcm_eval_write_roc(eval.get(), a.roc_out.c_str()), "write ROC curve");
    std::printf("%s AUC %.4f (%s labels), metrics %s\n", a.subset.c_str(), pcm_eval_auc(eval.get()), labels.c_str(),
                a.out.c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Promotion-time cure models with SVM or logistic incidence"};
    app.require_subcommand(1);
    app.set_version_flag("--version", pcm_version());

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset and its truth sidecar");
    simulate->add_option("--method", sim.method, "m1, m2, m3 or m10")->required();
    simulate->add_option("--n", sim.n, "Number of subjects")->check(CLI::Range(10, 100000000));
    simulate->add_option("--seed", sim.seed, "Master seed");
    simulate->add_option("--out", sim.out, "Dataset CSV")->required();
    simulate->add_option("--truth-out", sim.truth_out, "Truth sidecar CSV (default <out>.truth.csv)");
    simulate->add_flag("--no-stratify", sim.no_stratify, "Split train/test without stratifying on delta");
    simulate->add_option("--train-fraction", sim.train_fraction, "Share of subjects in the training split");
    simulate->add_option("--censor-rate", sim.censor_rate, "Rate of the exponential censoring time");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit PCM-SVM or PCM-Logit by EM");
    fit->add_option("--data", fa.data, "Dataset CSV")->required();
    fit->add_option("--model", fa.model, "pcm-svm or pcm-logit");
    fit->add_option("--seed", fa.seed, "Master seed");
    fit->add_option("--out", fa.out, "Fit report")->required();
    add_em_options(fit, fa.em);
    fit->add_flag("--standardize", fa.standardize, "Center and scale x and z before fitting");
    fit->add_option("--gamma", fa.gamma, "Fixed kernel width (with --cost; skips tuning)")->check(CLI::PositiveNumber);
    fit->add_option("--cost", fa.cost, "Fixed box constraint (with --gamma)")->check(CLI::PositiveNumber);
    fit->add_option("--bootstrap", fa.bootstrap, "Bootstrap replicates for standard errors")->check(CLI::NonNegativeNumber);
    fit->add_option("--jobs", fa.jobs, "Worker threads")->check(CLI::PositiveNumber);
    fit->add_option("--truth", fa.truth, "Truth sidecar providing the train/test split");
    fit->add_flag("--train-only", fa.train_only, "Fit on the training split only");
    fit->add_option("--pi-surface", fa.pi_surface, "TSV of pi-hat over a grid of x1, x2");
    fit->add_option("--surface-range", fa.surface_range, "lo,hi of the surface grid")->delimiter(',');
    fit->add_option("--surface-points", fa.surface_points, "Grid points per axis")->check(CLI::Range(2, 10000));

    StudyArgs sa;
    auto* study = app.add_subcommand("mc-study", "Monte Carlo comparison of PCM-SVM and PCM-Logit");
    study->add_option("--method", sa.method, "m1, m2, m3 or m10")->required();
    study->add_option("--n", sa.n, "Subjects per run")->check(CLI::Range(10, 100000000));
    study->add_option("--runs", sa.runs, "Monte Carlo runs")->check(CLI::PositiveNumber);
    study->add_option("--seed", sa.seed, "Master seed");
    study->add_option("--jobs", sa.jobs, "Worker threads")->check(CLI::PositiveNumber);
    study->add_option("--out", sa.out, "Study report")->required();
    study->add_flag("--no-stratify", sa.no_stratify, "Split train/test without stratifying on delta");
    add_em_options(study, sa.em);

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "Score a fitted model on a dataset");
    evaluate->add_option("--fit", ea.fit, "Fit report")->required();
    evaluate->add_option("--data", ea.data, "Dataset CSV")->required();
    evaluate->add_option("--truth", ea.truth, "Truth sidecar");
    evaluate->add_option("--labels", ea.labels, "truth or imputed (default truth when --truth is given)");
    evaluate->add_option("--subset", ea.subset, "all, train or test (train/test need --truth)");
    evaluate->add_option("--reps", ea.reps, "Imputation replicates")->check(CLI::PositiveNumber);
    evaluate->add_option("--seed", ea.seed, "Master seed for imputation");
    evaluate->add_option("--jobs", ea.jobs, "Worker threads")->check(CLI::PositiveNumber);
    evaluate->add_option("--out", ea.out, "Metrics file")->required();
    evaluate->add_option("--roc-out", ea.roc_out, "ROC curve TSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInput;
    }

    try {
        if (*simulate) return run_simulate(sim);
        if (*fit) return run_fit(fa);
        if (*study) return run_study(sa);
        if (*evaluate) return run_evaluate(ea);
    } catch (const Failure& f) {
        return f.code;
    }
    return kOther;
}
