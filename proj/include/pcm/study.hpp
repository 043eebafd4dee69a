#pragma once

// Monte Carlo study: simulate, fit both incidence models on the training
// split, score every subject and aggregate bias/MSE, accuracy and AUC.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pcm/evalmetrics.hpp"
#include "pcm/pcm_em.hpp"
#include "pcm/simgen.hpp"

namespace pcm {

struct StudyConfig {
    SimMethod method = SimMethod::m1;
    std::size_t n = 300;
    int runs = 50;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    bool stratify_split = true;
    EmConfig em;  // seed is replaced per run
};

struct RunMetrics {
    bool ok = false;
    bool converged = false;
    std::string error;
    std::array<BiasMse, 4> pooled{};  // indexed by Quantity
    std::array<BiasMse, 4> test{};
    double ca_test = 0.0;
    double ca_train = 0.0;
    double auc_train = 0.0;  // NaN when the split holds a single class
    double auc_test = 0.0;
};

struct StudyRun {
    double censored_fraction = 0.0;
    double cured_fraction = 0.0;
    std::array<RunMetrics, 2> models;  // svm, logit
};

struct ModelSummary {
    IncidenceKind kind = IncidenceKind::svm;
    int successes = 0;
    int failures = 0;
    int not_converged = 0;
    McAccumulator pooled;
    McAccumulator test;
    double ca_test = 0.0;
    double ca_train = 0.0;
    double auc_train = 0.0;
    double auc_test = 0.0;
    int auc_runs = 0;
};

struct StudyResult {
    StudyConfig config;
    std::vector<StudyRun> runs;
    std::array<ModelSummary, 2> models;
    double censored_fraction = 0.0;
    double cured_fraction = 0.0;
};

// Run r uses data seed derive_seed(seed, study_data, r) and fit seed
// derive_seed(seed, study_fit, r). A model that throws on a run is counted as
// a failure for that run and left out of its aggregates.
StudyRun run_study_replicate(const StudyConfig& config, int r);
StudyResult run_study(const StudyConfig& config);

void write_study_report(std::ostream& out, const StudyResult& result);

}  // namespace pcm
