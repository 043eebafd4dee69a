#include "pcmsvm/pcmsvm.h"

#include <fstream>
#include <cmath>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include "pcm/error.hpp"
#include "pcm/evaluate.hpp"
#include "pcm/io.hpp"
#include "pcm/pcm_em.hpp"
#include "pcm/simgen.hpp"
#include "pcm/study.hpp"

struct pcm_dataset {
    pcm::SurvivalData data;
    std::optional<pcm::TruthTable> truth;
};

struct pcm_fit {
    pcm::PcmFit fit;
    std::optional<pcm::SurvivalData> data;  // on the fitted scale; absent when read from a report
};

struct pcm_eval {
    pcm::Evaluation eval;
};

struct pcm_study {
    pcm::StudyResult result;
};

namespace {

thread_local std::string g_last_error;

pcm_status status_of(pcm::ErrorCode code) {
    using pcm::ErrorCode;
    switch (code) {
    case ErrorCode::invalid_input: return PCM_ERR_INVALID_INPUT;
    case ErrorCode::degenerate_labels: return PCM_ERR_DEGENERATE_LABELS;
    case ErrorCode::empty_events: return PCM_ERR_EMPTY_EVENTS;
    case ErrorCode::non_convergence: return PCM_ERR_NON_CONVERGENCE;
    case ErrorCode::numerical: return PCM_ERR_NUMERICAL;
    case ErrorCode::bootstrap_failure: return PCM_ERR_BOOTSTRAP;
    case ErrorCode::io: return PCM_ERR_IO;
    case ErrorCode::parse: return PCM_ERR_PARSE;
    }
    return PCM_ERR_INTERNAL;
}

template <class Fn>
pcm_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return PCM_OK;
    } catch (const pcm::Error& e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return PCM_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PCM_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown exception";
        return PCM_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    if (!p) pcm::fail(pcm::ErrorCode::invalid_input, std::string(what) + " must not be NULL");
}

std::ifstream open_in(const char* path) {
    need(path, "path");
    std::ifstream in(path, std::ios::binary);
    if (!in) pcm::fail(pcm::ErrorCode::io, std::string("cannot open '") + path + "' for reading");
    return in;
}

template <class Writer>
void write_to(const char* path, Writer&& writer) {
    need(path, "path");
    std::ostringstream buffer;
    writer(buffer);
    pcm::write_file(path, buffer.str());
}

pcm::SimMethod sim_method(pcm_method m) {
    switch (m) {
    case PCM_METHOD_M1: return pcm::SimMethod::m1;
    case PCM_METHOD_M2: return pcm::SimMethod::m2;
    case PCM_METHOD_M3: return pcm::SimMethod::m3;
    case PCM_METHOD_M10: return pcm::SimMethod::m10;
    }
    pcm::fail(pcm::ErrorCode::invalid_input, "unknown simulation method");
}

pcm::IncidenceKind kind_of(pcm_model m) {
    if (m == PCM_MODEL_SVM) return pcm::IncidenceKind::svm;
    if (m == PCM_MODEL_LOGIT) return pcm::IncidenceKind::logit;
    pcm::fail(pcm::ErrorCode::invalid_input, "unknown model");
}

std::vector<double> grid_or(const double* values, std::size_t len, std::vector<double> fallback) {
    if (!values) return fallback;
    pcm::require(len > 0, "a hyper-parameter grid must not be empty");
    return std::vector<double>(values, values + len);
}

int auto_folds(int requested, std::size_t n) {
    if (requested > 0) return requested;
    return n < 200 ? 10 : 5;
}

}  // namespace

extern "C" {

const char* pcm_last_error_message(void) { return g_last_error.c_str(); }

const char* pcm_status_string(pcm_status status) {
    switch (status) {
    case PCM_OK: return "ok";
    case PCM_ERR_INVALID_INPUT: return "invalid input";
    case PCM_ERR_DEGENERATE_LABELS: return "degenerate labels";
    case PCM_ERR_EMPTY_EVENTS: return "no events";
    case PCM_ERR_NON_CONVERGENCE: return "non-convergence";
    case PCM_ERR_NUMERICAL: return "numerical failure";
    case PCM_ERR_BOOTSTRAP: return "bootstrap failure";
    case PCM_ERR_IO: return "i/o error";
    case PCM_ERR_PARSE: return "parse error";
    case PCM_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* pcm_version(void) { return "1.0.0"; }

pcm_status pcm_parse_method(const char* name, pcm_method* out) {
    return guarded([&] {
        need(name, "name");
        need(out, "out");
        const auto m = pcm::parse_sim_method(name);
        if (!m) pcm::fail(pcm::ErrorCode::invalid_input, std::string("unknown method '") + name + "' (m1, m2, m3, m10)");
        switch (*m) {
        case pcm::SimMethod::m1: *out = PCM_METHOD_M1; break;
        case pcm::SimMethod::m2: *out = PCM_METHOD_M2; break;
        case pcm::SimMethod::m3: *out = PCM_METHOD_M3; break;
        case pcm::SimMethod::m10: *out = PCM_METHOD_M10; break;
        }
    });
}

pcm_status pcm_parse_model(const char* name, pcm_model* out) {
    return guarded([&] {
        need(name, "name");
        need(out, "out");
        const std::string s = name;
        if (s == pcm::to_string(pcm::IncidenceKind::svm))
            *out = PCM_MODEL_SVM;
        else if (s == pcm::to_string(pcm::IncidenceKind::logit))
            *out = PCM_MODEL_LOGIT;
        else
            pcm::fail(pcm::ErrorCode::invalid_input, "unknown model '" + s + "' (pcm-svm, pcm-logit)");
    });
}

void pcm_sim_options_init(pcm_sim_options* options) {
    if (!options) return;
    options->method = PCM_METHOD_M1;
    options->n = 300;
    options->seed = 0;
    options->stratify_split = 1;
    options->train_fraction = 2.0 / 3.0;
    options->censor_rate = 0.2;
}

pcm_status pcm_simulate(const pcm_sim_options* options, pcm_dataset** out) {
    return guarded([&] {
        need(options, "options");
        need(out, "out");
        pcm::SimConfig config = pcm::default_sim_config(sim_method(options->method), options->n, options->seed);
        config.stratify_split = options->stratify_split != 0;
        config.train_fraction = options->train_fraction;
        config.censor_rate = options->censor_rate;
        pcm::SimDataset sim = pcm::gen_dataset(config);
        *out = new pcm_dataset{std::move(sim.data), pcm::truth_of(sim)};
    });
}

pcm_status pcm_dataset_read_csv(const char* path, pcm_dataset** out) {
    return guarded([&] {
        need(out, "out");
        std::ifstream in = open_in(path);
        try {
            *out = new pcm_dataset{pcm::read_dataset_csv(in), std::nullopt};
        } catch (const pcm::Error& e) {
            throw pcm::Error(e.code(), std::string(path) + ": " + e.what());
        }
    });
}

pcm_status pcm_dataset_write_csv(const pcm_dataset* data, const char* path) {
    return guarded([&] {
        need(data, "data");
        write_to(path, [&](std::ostream& o) { pcm::write_dataset_csv(o, data->data); });
    });
}

pcm_status pcm_dataset_read_truth(pcm_dataset* data, const char* path) {
    return guarded([&] {
        need(data, "data");
        std::ifstream in = open_in(path);
        pcm::TruthTable truth;
        try {
            truth = pcm::read_truth_csv(in);
        } catch (const pcm::Error& e) {
            throw pcm::Error(e.code(), std::string(path) + ": " + e.what());
        }
        pcm::require(truth.size() == data->data.size(), std::string(path) + ": truth sidecar has " +
                                                            std::to_string(truth.size()) + " rows, dataset has " +
                                                            std::to_string(data->data.size()));
        data->truth = std::move(truth);
    });
}

pcm_status pcm_dataset_write_truth(const pcm_dataset* data, const char* path) {
    return guarded([&] {
        need(data, "data");
        pcm::require(data->truth.has_value(), "dataset carries no truth table");
        write_to(path, [&](std::ostream& o) { pcm::write_truth_csv(o, *data->truth); });
    });
}

pcm_status pcm_dataset_subset(const pcm_dataset* data, pcm_subset subset, pcm_dataset** out) {
    return guarded([&] {
        need(data, "data");
        need(out, "out");
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < data->data.size(); ++i) {
            const bool keep = subset == PCM_SUBSET_ALL ||
                              (data->truth && (data->truth->train[i] == 1) == (subset == PCM_SUBSET_TRAIN));
            if (subset != PCM_SUBSET_ALL && !data->truth)
                pcm::fail(pcm::ErrorCode::invalid_input, "a train or test subset needs the truth table");
            if (keep) rows.push_back(i);
        }
        pcm::require(!rows.empty(), "the selected subset is empty");
        auto result = std::make_unique<pcm_dataset>();
        result->data = pcm::subset(data->data, rows);
        if (data->truth) {
            pcm::TruthTable t;
            const pcm::TruthTable& s = *data->truth;
            for (std::size_t i : rows) {
                t.true_pi.push_back(s.true_pi[i]);
                t.true_susceptible.push_back(s.true_susceptible[i]);
                t.train.push_back(s.train[i]);
                t.true_s_pop.push_back(s.true_s_pop[i]);
                t.true_s_susceptible.push_back(s.true_s_susceptible[i]);
                t.true_s_promotion.push_back(s.true_s_promotion[i]);
            }
            result->truth = std::move(t);
        }
        *out = result.release();
    });
}

size_t pcm_dataset_size(const pcm_dataset* data) { return data ? data->data.size() : 0; }
size_t pcm_dataset_x_dim(const pcm_dataset* data) { return data ? data->data.x_dim() : 0; }
size_t pcm_dataset_z_dim(const pcm_dataset* data) { return data ? data->data.z_dim() : 0; }
size_t pcm_dataset_num_events(const pcm_dataset* data) { return data ? data->data.num_events() : 0; }
int pcm_dataset_has_truth(const pcm_dataset* data) { return data && data->truth ? 1 : 0; }
void pcm_dataset_free(pcm_dataset* data) { delete data; }

void pcm_fit_options_init(pcm_fit_options* options) {
    if (!options) return;
    *options = pcm_fit_options{};
    options->model = PCM_MODEL_SVM;
    options->imputations = 5;
    options->eps = 1e-3;
    options->max_iter = 50;
    options->kkt_tol = 1e-3;
    options->jobs = 1;
}

pcm_status pcm_fit_run(const pcm_dataset* data, const pcm_fit_options* options, pcm_fit** out) {
    return guarded([&] {
        need(data, "data");
        need(options, "options");
        need(out, "out");
        pcm::SurvivalData fit_data = data->data;
        std::optional<pcm::Standardization> standardization;
        if (options->standardize) {
            standardization = pcm::compute_standardization(fit_data);
            standardization->apply(fit_data);
        }
        pcm::EmConfig config;
        config.imputations = options->imputations;
        config.eps = options->eps;
        config.max_iter = options->max_iter;
        config.seed = options->seed;
        config.kkt_tol = options->kkt_tol;
        config.cv_folds = auto_folds(options->cv_folds, fit_data.size());
        config.gamma_grid = grid_or(options->gamma_grid, options->gamma_grid_len, pcm::default_gamma_grid());
        config.cost_grid = grid_or(options->cost_grid, options->cost_grid_len, pcm::default_cost_grid());
        if (options->gamma > 0.0 || options->cost > 0.0) config.kernel = pcm::KernelSpec{options->gamma, options->cost};

        const pcm::IncidenceKind kind = kind_of(options->model);
        auto result = std::make_unique<pcm_fit>();
        result->fit = pcm::fit_model(kind, fit_data, config);
        result->fit.standardization = standardization;
        if (options->bootstrap > 0) {
            result->fit.bootstrap = pcm::bootstrap_se(fit_data, kind, config, options->bootstrap,
                                                      pcm::derive_seed(options->seed, pcm::stream::bootstrap_resample),
                                                      options->jobs);
        }
        result->data = std::move(fit_data);
        *out = result.release();
    });
}

pcm_status pcm_fit_write_report(const pcm_fit* fit, const char* path) {
    return guarded([&] {
        need(fit, "fit");
        pcm::require(fit->data.has_value(), "a fit read back from a report cannot be re-serialized");
        write_to(path, [&](std::ostream& o) { pcm::write_fit_report(o, fit->fit, *fit->data); });
    });
}

pcm_status pcm_fit_read_report(const char* path, pcm_fit** out) {
    return guarded([&] {
        need(out, "out");
        std::ifstream in = open_in(path);
        try {
            *out = new pcm_fit{pcm::read_fit_report(in), std::nullopt};
        } catch (const pcm::Error& e) {
            throw pcm::Error(e.code(), std::string(path) + ": " + e.what());
        }
    });
}

pcm_status pcm_fit_write_pi_surface(const pcm_fit* fit, const char* path, double lo, double hi, int points) {
    return guarded([&] {
        need(fit, "fit");
        const auto* logit = std::get_if<pcm::LogitParams>(&fit->fit.incidence);
        const std::size_t x_dim = logit ? static_cast<std::size_t>(logit->gamma.size() - 1)
                                        : std::get<pcm::IncidenceModel>(fit->fit.incidence).members.front().svm.dim();
        write_to(path, [&](std::ostream& o) { pcm::write_pi_surface_tsv(o, fit->fit, x_dim, lo, hi, points); });
    });
}

int pcm_fit_converged(const pcm_fit* fit) { return fit && fit->fit.converged ? 1 : 0; }
int pcm_fit_iterations(const pcm_fit* fit) { return fit ? fit->fit.diagnostics.iteration : 0; }

size_t pcm_fit_beta(const pcm_fit* fit, double* out, size_t capacity) {
    if (!fit) return 0;
    const auto& beta = fit->fit.latency.beta;
    const auto count = static_cast<std::size_t>(beta.size());
    for (std::size_t j = 0; out && j < count && j < capacity; ++j) out[j] = beta[static_cast<Eigen::Index>(j)];
    return count;
}

pcm_status pcm_fit_predict(const pcm_fit* fit, const double* x, size_t x_len, const double* z, size_t z_len, double t,
                           pcm_prediction* out) {
    return guarded([&] {
        need(fit, "fit");
        need(out, "out");
        pcm::require((x || x_len == 0) && (z || z_len == 0), "covariate pointers must not be NULL");
        const Eigen::Map<const Eigen::RowVectorXd> xv(x, static_cast<Eigen::Index>(x_len));
        const Eigen::Map<const Eigen::RowVectorXd> zv(z, static_cast<Eigen::Index>(z_len));
        const pcm::Prediction p = pcm::predict(fit->fit, xv, zv, t);
        *out = pcm_prediction{p.pi, p.s_pop, p.s_susceptible, p.s_promotion, p.pi_clipped ? 1 : 0};
    });
}

void pcm_fit_free(pcm_fit* fit) { delete fit; }

void pcm_eval_options_init(pcm_eval_options* options) {
    if (!options) return;
    options->subset = PCM_SUBSET_ALL;
    options->use_truth = 1;
    options->reps = 500;
    options->seed = 0;
    options->jobs = 1;
}

pcm_status pcm_evaluate(const pcm_fit* fit, const pcm_dataset* data, const pcm_eval_options* options, pcm_eval** out) {
    return guarded([&] {
        need(fit, "fit");
        need(data, "data");
        need(options, "options");
        need(out, "out");
        pcm::EvaluationOptions eo;
        eo.subset = options->subset == PCM_SUBSET_TRAIN  ? pcm::EvalSubset::train
                    : options->subset == PCM_SUBSET_TEST ? pcm::EvalSubset::test
                                                         : pcm::EvalSubset::all;
        eo.reps = options->reps;
        eo.seed = options->seed;
        eo.jobs = options->jobs;
        eo.use_truth = options->use_truth != 0;
        const pcm::TruthTable* truth = data->truth ? &*data->truth : nullptr;
        *out = new pcm_eval{pcm::evaluate_fit(fit->fit, data->data, truth, eo)};
    });
}

double pcm_eval_auc(const pcm_eval* eval) { return eval ? eval->eval.auc : 0.0; }
int pcm_eval_used_truth(const pcm_eval* eval) { return eval && eval->eval.used_truth ? 1 : 0; }

pcm_status pcm_eval_write(const pcm_eval* eval, const char* path) {
    return guarded([&] {
        need(eval, "eval");
        write_to(path, [&](std::ostream& o) { pcm::write_evaluation(o, eval->eval); });
    });
}

pcm_status pcm_eval_write_roc(const pcm_eval* eval, const char* path) {
    return guarded([&] {
        need(eval, "eval");
        write_to(path, [&](std::ostream& o) { pcm::write_roc_tsv(o, eval->eval.roc); });
    });
}

void pcm_eval_free(pcm_eval* eval) { delete eval; }

void pcm_study_options_init(pcm_study_options* options) {
    if (!options) return;
    *options = pcm_study_options{};
    options->method = PCM_METHOD_M1;
    options->n = 300;
    options->runs = 50;
    options->jobs = 1;
    options->stratify_split = 1;
    options->imputations = 5;
    options->eps = 1e-3;
    options->max_iter = 50;
}

pcm_status pcm_mc_study(const pcm_study_options* options, pcm_study** out) {
    return guarded([&] {
        need(options, "options");
        need(out, "out");
        pcm::StudyConfig config;
        config.method = sim_method(options->method);
        config.n = options->n;
        config.runs = options->runs;
        config.seed = options->seed;
        config.jobs = options->jobs;
        config.stratify_split = options->stratify_split != 0;
        config.em.imputations = options->imputations;
        config.em.eps = options->eps;
        config.em.max_iter = options->max_iter;
        const auto train_size = static_cast<std::size_t>(std::llround(static_cast<double>(options->n) * 2.0 / 3.0));
        config.em.cv_folds = auto_folds(options->cv_folds, train_size);
        config.em.gamma_grid = grid_or(options->gamma_grid, options->gamma_grid_len, pcm::default_gamma_grid());
        config.em.cost_grid = grid_or(options->cost_grid, options->cost_grid_len, pcm::default_cost_grid());
        *out = new pcm_study{pcm::run_study(config)};
    });
}

pcm_status pcm_study_summary_get(const pcm_study* study, pcm_model model, pcm_study_summary* out) {
    return guarded([&] {
        need(study, "study");
        need(out, "out");
        const pcm::ModelSummary& s = study->result.models[model == PCM_MODEL_SVM ? 0 : 1];
        pcm::require(s.successes > 0, "no successful runs for this model");
        const auto r = [&](pcm::Quantity q) { return s.pooled.result(q); };
        *out = pcm_study_summary{s.successes,
                                 s.failures,
                                 s.not_converged,
                                 r(pcm::Quantity::pi).bias,
                                 r(pcm::Quantity::pi).mse,
                                 r(pcm::Quantity::s_pop).bias,
                                 r(pcm::Quantity::s_pop).mse,
                                 r(pcm::Quantity::s_susceptible).bias,
                                 r(pcm::Quantity::s_susceptible).mse,
                                 r(pcm::Quantity::s_promotion).bias,
                                 r(pcm::Quantity::s_promotion).mse,
                                 s.ca_test,
                                 s.auc_train,
                                 s.auc_test};
    });
}

double pcm_study_censored_fraction(const pcm_study* study) { return study ? study->result.censored_fraction : 0.0; }

pcm_status pcm_study_write_report(const pcm_study* study, const char* path) {
    return guarded([&] {
        need(study, "study");
        write_to(path, [&](std::ostream& o) { pcm::write_study_report(o, study->result); });
    });
}

void pcm_study_free(pcm_study* study) { delete study; }

}  // extern "C"
