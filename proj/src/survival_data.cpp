#include "pcm/survival_data.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcm/error.hpp"

namespace pcm {

std::size_t SurvivalData::num_events() const {
    return static_cast<std::size_t>(std::count(delta.begin(), delta.end(), 1));
}

SurvivalRecord SurvivalData::record(std::size_t i) const {
    const auto row = static_cast<Eigen::Index>(i);
    SurvivalRecord r{time[i], delta[i], std::vector<double>(x_dim()), std::vector<double>(z_dim())};
    for (Eigen::Index k = 0; k < x.cols(); ++k) r.x[static_cast<std::size_t>(k)] = x(row, k);
    for (Eigen::Index k = 0; k < z.cols(); ++k) r.z[static_cast<std::size_t>(k)] = z(row, k);
    return r;
}

void SurvivalData::validate() const {
    const std::size_t n = size();
    require(delta.size() == n && static_cast<std::size_t>(x.rows()) == n && static_cast<std::size_t>(z.rows()) == n,
            "survival data: column lengths disagree");
    for (std::size_t i = 0; i < n; ++i) {
        require(std::isfinite(time[i]) && time[i] > 0.0,
                "survival data: time must be positive and finite (row " + std::to_string(i + 1) + ")");
        require(delta[i] == 0 || delta[i] == 1, "survival data: delta must be 0 or 1 (row " + std::to_string(i + 1) + ")");
    }
    require(x.allFinite() && z.allFinite(), "survival data: covariates must be finite");
}

SurvivalData from_records(std::span<const SurvivalRecord> records) {
    SurvivalData data;
    const std::size_t p = records.empty() ? 0 : records.front().x.size();
    const std::size_t q = records.empty() ? 0 : records.front().z.size();
    data.x.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(p));
    data.z.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(q));
    for (std::size_t i = 0; i < records.size(); ++i) {
        const SurvivalRecord& r = records[i];
        require(r.x.size() == p && r.z.size() == q, "survival data: covariate dimension changes at record " +
                                                        std::to_string(i + 1));
        data.time.push_back(r.t);
        data.delta.push_back(r.delta);
        const auto row = static_cast<Eigen::Index>(i);
        for (std::size_t k = 0; k < p; ++k) data.x(row, static_cast<Eigen::Index>(k)) = r.x[k];
        for (std::size_t k = 0; k < q; ++k) data.z(row, static_cast<Eigen::Index>(k)) = r.z[k];
    }
    data.validate();
    return data;
}

SurvivalData subset(const SurvivalData& data, std::span<const std::size_t> rows) {
    SurvivalData out;
    std::vector<Eigen::Index> idx;
    idx.reserve(rows.size());
    for (std::size_t r : rows) {
        require(r < data.size(), "subset: row index out of range");
        out.time.push_back(data.time[r]);
        out.delta.push_back(data.delta[r]);
        idx.push_back(static_cast<Eigen::Index>(r));
    }
    out.x = data.x(idx, Eigen::all);
    out.z = data.z(idx, Eigen::all);
    return out;
}

namespace {

void column_moments(const RowMatrix& m, Vector& mean, Vector& sd) {
    const auto n = static_cast<double>(m.rows());
    mean = m.colwise().mean().transpose();
    sd.resize(m.cols());
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
        const double ss = (m.col(k).array() - mean[k]).square().sum();
        sd[k] = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        require(sd[k] > 0.0, "standardize: column " + std::to_string(k + 1) + " has zero variance");
    }
}

}  // namespace

Eigen::RowVectorXd Standardization::apply_x(RowRef x) const {
    require(x.size() == x_mean.size(), "standardize: x dimension mismatch");
    return ((x.transpose() - x_mean).array() / x_sd.array()).matrix().transpose();
}

Eigen::RowVectorXd Standardization::apply_z(RowRef z) const {
    require(z.size() == z_mean.size(), "standardize: z dimension mismatch");
    return ((z.transpose() - z_mean).array() / z_sd.array()).matrix().transpose();
}

void Standardization::apply(SurvivalData& data) const {
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) data.x.row(i) = apply_x(data.x.row(i));
    for (Eigen::Index i = 0; i < data.z.rows(); ++i) data.z.row(i) = apply_z(data.z.row(i));
}

Standardization compute_standardization(const SurvivalData& data) {
    Standardization s;
    column_moments(data.x, s.x_mean, s.x_sd);
    column_moments(data.z, s.z_mean, s.z_sd);
    return s;
}

}  // namespace pcm
