#ifndef PCMSVM_H
#define PCMSVM_H

/* C interface to the promotion-time cure model library. Every call returns a
 * pcm_status; on failure pcm_last_error_message() describes the error for the
 * calling thread. Handles are opaque and released with their _free call. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define PCM_API __declspec(dllexport)
#else
#define PCM_API __attribute__((visibility("default")))
#endif

typedef enum pcm_status {
    PCM_OK = 0,
    PCM_ERR_INVALID_INPUT = 1,
    PCM_ERR_DEGENERATE_LABELS = 2,
    PCM_ERR_EMPTY_EVENTS = 3,
    PCM_ERR_NON_CONVERGENCE = 4,
    PCM_ERR_NUMERICAL = 5,
    PCM_ERR_BOOTSTRAP = 6,
    PCM_ERR_IO = 7,
    PCM_ERR_PARSE = 8,
    PCM_ERR_INTERNAL = 9
} pcm_status;

PCM_API const char* pcm_last_error_message(void);
PCM_API const char* pcm_status_string(pcm_status status);
PCM_API const char* pcm_version(void);

typedef struct pcm_dataset pcm_dataset;
typedef struct pcm_fit pcm_fit;
typedef struct pcm_eval pcm_eval;
typedef struct pcm_study pcm_study;

typedef enum pcm_method { PCM_METHOD_M1 = 1, PCM_METHOD_M2 = 2, PCM_METHOD_M3 = 3, PCM_METHOD_M10 = 10 } pcm_method;
typedef enum pcm_model { PCM_MODEL_SVM = 0, PCM_MODEL_LOGIT = 1 } pcm_model;
typedef enum pcm_subset { PCM_SUBSET_ALL = 0, PCM_SUBSET_TRAIN = 1, PCM_SUBSET_TEST = 2 } pcm_subset;

/* "m1", "m2", "m3", "m10" and "pcm-svm", "pcm-logit". */
PCM_API pcm_status pcm_parse_method(const char* name, pcm_method* out);
PCM_API pcm_status pcm_parse_model(const char* name, pcm_model* out);

/* ---- datasets ---------------------------------------------------------- */

typedef struct pcm_sim_options {
    pcm_method method;
    size_t n;
    uint64_t seed;
    int stratify_split;    /* nonzero: split train/test within event and censored groups */
    double train_fraction; /* default 2/3 */
    double censor_rate;    /* default 0.2 */
} pcm_sim_options;

PCM_API void pcm_sim_options_init(pcm_sim_options* options);
/* The dataset carries its truth table (true pi, cure status, split, survival). */
PCM_API pcm_status pcm_simulate(const pcm_sim_options* options, pcm_dataset** out);

PCM_API pcm_status pcm_dataset_read_csv(const char* path, pcm_dataset** out);
PCM_API pcm_status pcm_dataset_write_csv(const pcm_dataset* data, const char* path);
PCM_API pcm_status pcm_dataset_read_truth(pcm_dataset* data, const char* path);
PCM_API pcm_status pcm_dataset_write_truth(const pcm_dataset* data, const char* path);
/* Rows marked train (or test) in the truth table, truth included. */
PCM_API pcm_status pcm_dataset_subset(const pcm_dataset* data, pcm_subset subset, pcm_dataset** out);

PCM_API size_t pcm_dataset_size(const pcm_dataset* data);
PCM_API size_t pcm_dataset_x_dim(const pcm_dataset* data);
PCM_API size_t pcm_dataset_z_dim(const pcm_dataset* data);
PCM_API size_t pcm_dataset_num_events(const pcm_dataset* data);
PCM_API int pcm_dataset_has_truth(const pcm_dataset* data);
PCM_API void pcm_dataset_free(pcm_dataset* data);

/* ---- fitting ----------------------------------------------------------- */

typedef struct pcm_fit_options {
    pcm_model model;
    uint64_t seed;
    int imputations;       /* default 5 */
    double eps;            /* default 1e-3 */
    int max_iter;          /* default 50 */
    int cv_folds;          /* 0: 10 when n < 200, else 5 */
    double kkt_tol;        /* default 1e-3 */
    double gamma;          /* > 0 together with cost fixes the kernel; 0 tunes */
    double cost;
    const double* gamma_grid; /* NULL: 2^-6 .. 2^2 */
    size_t gamma_grid_len;
    const double* cost_grid;  /* NULL: 2^-2 .. 2^6 */
    size_t cost_grid_len;
    int standardize;       /* nonzero: center and scale x and z */
    int bootstrap;         /* replicates; 0 disables */
    unsigned jobs;         /* worker threads for bootstrap */
} pcm_fit_options;

PCM_API void pcm_fit_options_init(pcm_fit_options* options);
/* Non-convergence is not an error here: check pcm_fit_converged. */
PCM_API pcm_status pcm_fit_run(const pcm_dataset* data, const pcm_fit_options* options, pcm_fit** out);
PCM_API pcm_status pcm_fit_write_report(const pcm_fit* fit, const char* path);
PCM_API pcm_status pcm_fit_read_report(const char* path, pcm_fit** out);
PCM_API pcm_status pcm_fit_write_pi_surface(const pcm_fit* fit, const char* path, double lo, double hi, int points);

PCM_API int pcm_fit_converged(const pcm_fit* fit);
PCM_API int pcm_fit_iterations(const pcm_fit* fit);
/* Copies up to `capacity` coefficients; returns the number available. */
PCM_API size_t pcm_fit_beta(const pcm_fit* fit, double* out, size_t capacity);

typedef struct pcm_prediction {
    double pi;
    double s_pop;
    double s_susceptible;
    double s_promotion;
    int pi_clipped;
} pcm_prediction;

/* x and z on the data scale; the fit's standardization is applied inside. */
PCM_API pcm_status pcm_fit_predict(const pcm_fit* fit, const double* x, size_t x_len, const double* z, size_t z_len,
                                   double t, pcm_prediction* out);
PCM_API void pcm_fit_free(pcm_fit* fit);

/* ---- evaluation -------------------------------------------------------- */

typedef struct pcm_eval_options {
    pcm_subset subset; /* needs a truth table unless ALL */
    int use_truth;     /* nonzero: score against the truth table when present */
    int reps;          /* imputed-ROC replicates, default 500 */
    uint64_t seed;
    unsigned jobs;
} pcm_eval_options;

PCM_API void pcm_eval_options_init(pcm_eval_options* options);
/* With truth: ROC/AUC, accuracy and bias/MSE against the true values.
 * Without: ROC averaged over cure statuses imputed from the fitted weights. */
PCM_API pcm_status pcm_evaluate(const pcm_fit* fit, const pcm_dataset* data, const pcm_eval_options* options,
                                pcm_eval** out);
PCM_API double pcm_eval_auc(const pcm_eval* eval);
PCM_API int pcm_eval_used_truth(const pcm_eval* eval);
PCM_API pcm_status pcm_eval_write(const pcm_eval* eval, const char* path);
PCM_API pcm_status pcm_eval_write_roc(const pcm_eval* eval, const char* path);
PCM_API void pcm_eval_free(pcm_eval* eval);

/* ---- Monte Carlo study ------------------------------------------------- */

typedef struct pcm_study_options {
    pcm_method method;
    size_t n;
    int runs;
    uint64_t seed;
    unsigned jobs;
    int stratify_split;
    int imputations;
    double eps;
    int max_iter;
    int cv_folds; /* 0: 10 when the training split has fewer than 200 rows, else 5 */
    const double* gamma_grid;
    size_t gamma_grid_len;
    const double* cost_grid;
    size_t cost_grid_len;
} pcm_study_options;

typedef struct pcm_study_summary {
    int successes;
    int failures;
    int not_converged;
    double pi_bias, pi_mse;
    double s_pop_bias, s_pop_mse;
    double s_susceptible_bias, s_susceptible_mse;
    double s_promotion_bias, s_promotion_mse;
    double ca_test;
    double auc_train, auc_test;
} pcm_study_summary;

PCM_API void pcm_study_options_init(pcm_study_options* options);
PCM_API pcm_status pcm_mc_study(const pcm_study_options* options, pcm_study** out);
/* Pooled (all subjects) summary for one model. */
PCM_API pcm_status pcm_study_summary_get(const pcm_study* study, pcm_model model, pcm_study_summary* out);
PCM_API double pcm_study_censored_fraction(const pcm_study* study);
PCM_API pcm_status pcm_study_write_report(const pcm_study* study, const char* path);
PCM_API void pcm_study_free(pcm_study* study);

#ifdef __cplusplus
}
#endif

#endif
