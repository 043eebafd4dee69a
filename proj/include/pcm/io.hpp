#pragma once

// Text formats: the dataset CSV, the truth sidecar, the versioned fit report
// and plot-ready TSV tables. Numbers are written in shortest round-trip form.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pcm/evalmetrics.hpp"
#include "pcm/pcm_em.hpp"
#include "pcm/simgen.hpp"
#include "pcm/survival_data.hpp"

namespace pcm {

inline constexpr int kReportFormatVersion = 1;

std::string format_double(double v);
// Throws Error(parse) naming `line` and `what` when `text` is not a full number.
double parse_double(std::string_view text, std::size_t line, std::string_view what);
long long parse_integer(std::string_view text, std::size_t line, std::string_view what);

// Header t,delta,x1..xp,z1..zq.
void write_dataset_csv(std::ostream& out, const SurvivalData& data);
SurvivalData read_dataset_csv(std::istream& in);

struct TruthTable {
    std::vector<double> true_pi;
    std::vector<int> true_susceptible;
    std::vector<int> train;
    std::vector<double> true_s_pop;
    std::vector<double> true_s_susceptible;
    std::vector<double> true_s_promotion;

    std::size_t size() const { return true_pi.size(); }
};

TruthTable truth_of(const SimDataset& sim);
// Columns row,true_pi,true_cure,split,true_s_pop,true_s_susceptible,true_s_promotion.
void write_truth_csv(std::ostream& out, const TruthTable& truth);
TruthTable read_truth_csv(std::istream& in);

// The report carries everything needed to rebuild the fitted model, so that
// read_fit_report(write_fit_report(fit)) predicts identically.
void write_fit_report(std::ostream& out, const PcmFit& fit, const SurvivalData& data);
PcmFit read_fit_report(std::istream& in);

void write_roc_tsv(std::ostream& out, const RocCurve& curve);
// pi-hat over a rectangular grid of the first two covariates, others held at 0.
void write_pi_surface_tsv(std::ostream& out, const PcmFit& fit, std::size_t x_dim, double lo, double hi,
                          int points);

void write_file(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace pcm
