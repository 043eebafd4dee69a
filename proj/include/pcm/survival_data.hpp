#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pcm/linalg.hpp"

namespace pcm {

struct SurvivalRecord {
    double t = 0.0;
    int delta = 0;
    std::vector<double> x;
    std::vector<double> z;
};

// Observed data stored column-wise: one row of x and z per subject.
struct SurvivalData {
    std::vector<double> time;
    std::vector<int> delta;
    RowMatrix x;
    RowMatrix z;

    std::size_t size() const { return time.size(); }
    std::size_t x_dim() const { return static_cast<std::size_t>(x.cols()); }
    std::size_t z_dim() const { return static_cast<std::size_t>(z.cols()); }
    std::size_t num_events() const;

    SurvivalRecord record(std::size_t i) const;

    // t > 0, delta in {0, 1}, consistent row counts.
    void validate() const;
};

SurvivalData from_records(std::span<const SurvivalRecord> records);
SurvivalData subset(const SurvivalData& data, std::span<const std::size_t> rows);

// Column centering and scaling, kept so that new covariates can be mapped
// into the fitted scale.
struct Standardization {
    Vector x_mean, x_sd, z_mean, z_sd;

    Eigen::RowVectorXd apply_x(RowRef x) const;
    Eigen::RowVectorXd apply_z(RowRef z) const;
    void apply(SurvivalData& data) const;
};

Standardization compute_standardization(const SurvivalData& data);

}  // namespace pcm
