#pragma once

// RBF-kernel support vector classifier: SMO dual solver, Platt sigmoid
// calibration and grid-search cross-validation of (gamma, cost).

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pcm/linalg.hpp"

namespace pcm {

struct KernelSpec {
    double gamma = 0.0;  // exp(-gamma * |a - b|^2), gamma = 1 / (2 sigma^2)
    double cost = 0.0;   // box constraint on the dual coefficients

    void validate() const;
    bool operator==(const KernelSpec&) const = default;
};

double rbf_kernel(RowRef a, RowRef b, double gamma);

// Decision function g(x) = sum_i c_i v_i K(x_i, x) - b, stored over the
// support vectors only (c_i > 0).
struct SvmModel {
    RowMatrix support_points;
    Vector dual_coefs;
    std::vector<int> labels;
    std::vector<std::size_t> support_index;  // rows of the training matrix
    double threshold = 0.0;
    KernelSpec kernel;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(support_points.cols()); }
};

struct SmoOptions {
    double kkt_tol = 1e-3;
    std::uint64_t seed = 0;  // start points of the second-choice scans
};

// Throws Error(degenerate_labels) when only one class is present and
// IterationLimitError<SvmModel> once 10*n*max(n,1000) coefficient updates are spent.
SvmModel smo_train(const RowMatrix& x, std::span<const int> labels, const KernelSpec& kernel,
                   const SmoOptions& options = {});

double decision_value(const SvmModel& model, RowRef x);
Vector decision_values(const SvmModel& model, const RowMatrix& x);

// sum_i c_i - 1/2 sum_ij c_i c_j v_i v_j K_ij
double dual_objective(const SvmModel& model);

struct PlattCalibration {
    double slope = 0.0;      // A
    double intercept = 0.0;  // B
};

// pi(g) = 1 / (1 + exp(A g + B)); never exactly 0 or 1 for finite g.
double platt_prob(const PlattCalibration& cal, double g);

// Smoothed targets: (n1 + 1) / (n1 + 2) for +1, 1 / (n0 + 2) for -1.
std::vector<double> platt_targets(std::span<const int> labels);
double platt_objective(const PlattCalibration& cal, std::span<const double> decisions,
                       std::span<const double> targets);
std::array<double, 2> platt_gradient(const PlattCalibration& cal, std::span<const double> decisions,
                                     std::span<const double> targets);

PlattCalibration platt_fit(std::span<const double> decisions, std::span<const int> labels);

// Out-of-fold decision values from stratified k-fold retraining with the same
// kernel. Points whose training part holds a single class get `full`'s value.
Vector cross_validated_decisions(const RowMatrix& x, std::span<const int> labels, const SvmModel& full,
                                 const KernelSpec& kernel, int folds, std::uint64_t seed, double kkt_tol = 1e-3);

struct TuningOptions {
    std::vector<double> gamma_grid;
    std::vector<double> cost_grid;
    int folds = 5;
    std::uint64_t seed = 0;
    double kkt_tol = 1e-3;
};

struct TuningResult {
    KernelSpec spec;
    double cv_accuracy = 0.0;  // NaN when the grid has a single cell
    int folds_used = 0;
};

std::vector<double> default_gamma_grid();  // 2^-6 .. 2^2
std::vector<double> default_cost_grid();   // 2^-2 .. 2^6

// Maximizes mean stratified k-fold accuracy; ties go to the smaller cost, then
// the smaller gamma.
TuningResult tune_hyperparams(const RowMatrix& x, std::span<const int> labels, const TuningOptions& options);

}  // namespace pcm
