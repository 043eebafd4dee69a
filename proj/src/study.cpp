#include "pcm/study.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "pcm/error.hpp"
#include "pcm/io.hpp"
#include "pcm/parallel.hpp"

namespace pcm {

namespace {

constexpr std::array<IncidenceKind, 2> kKinds{IncidenceKind::svm, IncidenceKind::logit};

double auc_or_nan(std::span<const double> scores, std::span<const int> labels) {
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) return std::numeric_limits<double>::quiet_NaN();
    return roc_auc(scores, labels).auc;
}

template <class T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& rows) {
    std::vector<T> out;
    out.reserve(rows.size());
    for (std::size_t i : rows) out.push_back(v[i]);
    return out;
}

RunMetrics score_fit(const PcmFit& fit, const SimDataset& sim, const std::vector<std::size_t>& train_rows,
                     const std::vector<std::size_t>& test_rows) {
    const SurvivalData& data = sim.data;
    const std::size_t n = data.size();
    std::array<std::vector<double>, 4> est;
    for (auto& v : est) v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const Prediction p = predict(fit, data.x.row(r), data.z.row(r), data.time[i]);
        est[0][i] = p.pi;
        est[1][i] = p.s_pop;
        est[2][i] = p.s_susceptible;
        est[3][i] = p.s_promotion;
    }
    const std::array<const std::vector<double>*, 4> truth{&sim.true_pi, &sim.true_s_pop, &sim.true_s_susceptible,
                                                          &sim.true_s_promotion};
    RunMetrics m;
    for (std::size_t q = 0; q < 4; ++q) {
        m.pooled[q] = run_error(est[q], *truth[q]);
        m.test[q] = run_error(pick(est[q], test_rows), pick(*truth[q], test_rows));
    }
    const auto pi_train = pick(est[0], train_rows), pi_test = pick(est[0], test_rows);
    const auto lab_train = pick(sim.true_susceptible, train_rows), lab_test = pick(sim.true_susceptible, test_rows);
    m.ca_train = classification_accuracy(pi_train, lab_train);
    m.ca_test = classification_accuracy(pi_test, lab_test);
    m.auc_train = auc_or_nan(pi_train, lab_train);
    m.auc_test = auc_or_nan(pi_test, lab_test);
    m.converged = fit.converged;
    m.ok = true;
    return m;
}

}  // namespace

StudyRun run_study_replicate(const StudyConfig& config, int r) {
    SimConfig sim_config = default_sim_config(config.method, config.n, derive_seed(config.seed, stream::study_data,
                                                                                  static_cast<std::uint64_t>(r)));
    sim_config.stratify_split = config.stratify_split;
    const SimDataset sim = gen_dataset(sim_config);
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < sim.data.size(); ++i) (sim.train[i] ? train_rows : test_rows).push_back(i);
    const SurvivalData train = subset(sim.data, train_rows);

    StudyRun run;
    const auto n = static_cast<double>(sim.data.size());
    run.censored_fraction = 1.0 - static_cast<double>(sim.data.num_events()) / n;
    run.cured_fraction = 1.0 - static_cast<double>(std::count(sim.true_susceptible.begin(), sim.true_susceptible.end(), 1)) / n;

    EmConfig em = config.em;
    em.seed = derive_seed(config.seed, stream::study_fit, static_cast<std::uint64_t>(r));
    for (std::size_t k = 0; k < kKinds.size(); ++k) {
        try {
            run.models[k] = score_fit(fit_model(kKinds[k], train, em), sim, train_rows, test_rows);
        } catch (const Error& e) {
            run.models[k] = RunMetrics{};
            run.models[k].error = e.what();
        }
    }
    return run;
}

StudyResult run_study(const StudyConfig& config) {
    require(config.runs >= 1, "study: runs must be at least 1");
    StudyResult result;
    result.config = config;
    result.runs.resize(static_cast<std::size_t>(config.runs));
    parallel_for(result.runs.size(), config.jobs,
                 [&](std::size_t r) { result.runs[r] = run_study_replicate(config, static_cast<int>(r)); });

    for (std::size_t k = 0; k < kKinds.size(); ++k) {
        ModelSummary& s = result.models[k];
        s.kind = kKinds[k];
        for (const StudyRun& run : result.runs) {
            const RunMetrics& m = run.models[k];
            if (!m.ok) {
                ++s.failures;
                continue;
            }
            ++s.successes;
            if (!m.converged) ++s.not_converged;
            for (Quantity q : kQuantities) {
                s.pooled.add(q, m.pooled[static_cast<std::size_t>(q)]);
                s.test.add(q, m.test[static_cast<std::size_t>(q)]);
            }
            s.ca_test += m.ca_test;
            s.ca_train += m.ca_train;
            if (std::isfinite(m.auc_train) && std::isfinite(m.auc_test)) {
                s.auc_train += m.auc_train;
                s.auc_test += m.auc_test;
                ++s.auc_runs;
            }
        }
        if (s.successes > 0) {
            s.ca_test /= s.successes;
            s.ca_train /= s.successes;
        }
        if (s.auc_runs > 0) {
            s.auc_train /= s.auc_runs;
            s.auc_test /= s.auc_runs;
        }
    }
    for (const StudyRun& run : result.runs) {
        result.censored_fraction += run.censored_fraction;
        result.cured_fraction += run.cured_fraction;
    }
    result.censored_fraction /= config.runs;
    result.cured_fraction /= config.runs;
    return result;
}

void write_study_report(std::ostream& out, const StudyResult& result) {
    const StudyConfig& c = result.config;
    const auto f = [](double v) { return format_double(v); };
    out << "# pcm Monte Carlo study\n";
    out << "format_version " << kReportFormatVersion << '\n';
    out << "method " << to_string(c.method) << '\n';
    out << "n " << c.n << '\n';
    out << "runs " << c.runs << '\n';
    out << "seed " << c.seed << '\n';
    out << "imputations " << c.em.imputations << '\n';
    out << "cv_folds " << c.em.cv_folds << '\n';
    out << "eps " << f(c.em.eps) << '\n';
    out << "max_iter " << c.em.max_iter << '\n';
    out << "stratified_split " << (c.stratify_split ? 1 : 0) << '\n';
    out << "mean_censored_fraction " << f(result.censored_fraction) << '\n';
    out << "mean_cured_fraction " << f(result.cured_fraction) << '\n';

    out << "\n[fits]\n# model successes failures not_converged\n";
    for (const ModelSummary& s : result.models)
        out << to_string(s.kind) << ' ' << s.successes << ' ' << s.failures << ' ' << s.not_converged << '\n';

    // Pooled rows average over every subject; test rows over the held-out split.
    auto table = [&](const char* name, std::initializer_list<Quantity> qs) {
        out << "\n[" << name << "]\n# model subjects";
        for (Quantity q : qs) out << ' ' << to_string(q) << "_bias " << to_string(q) << "_mse";
        out << '\n';
        for (const ModelSummary& s : result.models) {
            if (s.successes == 0) {
                out << to_string(s.kind) << " all nan\n";
                continue;
            }
            for (const auto& [label, acc] : {std::pair{"pooled", &s.pooled}, std::pair{"test", &s.test}}) {
                out << to_string(s.kind) << ' ' << label;
                for (Quantity q : qs) {
                    const BiasMse bm = acc->result(q);
                    out << ' ' << f(bm.bias) << ' ' << f(bm.mse);
                }
                out << '\n';
            }
        }
    };
    table("incidence", {Quantity::pi});
    table("survival", {Quantity::s_pop, Quantity::s_susceptible});
    table("promotion", {Quantity::s_promotion});

    out << "\n[classification]\n# model ca_test ca_train auc_train auc_test auc_runs\n";
    for (const ModelSummary& s : result.models)
        out << to_string(s.kind) << ' ' << f(s.ca_test) << ' ' << f(s.ca_train) << ' ' << f(s.auc_train) << ' '
            << f(s.auc_test) << ' ' << s.auc_runs << '\n';

    out << "\n[runs]\n# run model status converged pi_bias pi_mse s_pop_mse ca_test auc_test\n";
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
        for (std::size_t k = 0; k < kKinds.size(); ++k) {
            const RunMetrics& m = result.runs[r].models[k];
            out << r + 1 << ' ' << to_string(kKinds[k]) << ' ';
            if (!m.ok) {
                out << "failed " << m.error << '\n';
                continue;
            }
            out << "ok " << (m.converged ? 1 : 0) << ' ' << f(m.pooled[0].bias) << ' ' << f(m.pooled[0].mse) << ' '
                << f(m.pooled[1].mse) << ' ' << f(m.ca_test) << ' ' << f(m.auc_test) << '\n';
        }
    }
}

}  // namespace pcm
