#include "pcm/kernel_svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

#include "pcm/error.hpp"
#include "pcm/rng.hpp"

namespace pcm {

void KernelSpec::validate() const {
    require(std::isfinite(gamma) && gamma > 0.0, "kernel gamma must be positive, got " + std::to_string(gamma));
    require(std::isfinite(cost) && cost > 0.0, "kernel cost must be positive, got " + std::to_string(cost));
}

double rbf_kernel(RowRef a, RowRef b, double gamma) {
    require(a.size() == b.size(), "rbf_kernel: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                                      std::to_string(b.size()) + ")");
    require(gamma > 0.0, "rbf_kernel: gamma must be positive");
    return std::exp(-gamma * (a - b).squaredNorm());
}

namespace {

constexpr std::size_t kFullCacheLimit = 4000;
constexpr std::size_t kRowCacheCapacity = 512;

// Full n x n matrix up to kFullCacheLimit rows, LRU row cache above.
class KernelCache {
public:
    KernelCache(const RowMatrix& x, double gamma) : x_(x), gamma_(gamma), n_(static_cast<std::size_t>(x.rows())) {
        if (n_ <= kFullCacheLimit) {
            full_.resize(n_ * n_);
            for (std::size_t i = 0; i < n_; ++i) {
                full_[i * n_ + i] = 1.0;
                for (std::size_t j = 0; j < i; ++j) {
                    const double k = std::exp(-gamma_ * (x_.row(i) - x_.row(j)).squaredNorm());
                    full_[i * n_ + j] = k;
                    full_[j * n_ + i] = k;
                }
            }
        }
    }

    const double* row(std::size_t i) {
        if (!full_.empty()) return full_.data() + i * n_;
        if (auto it = rows_.find(i); it != rows_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second.second);
            return it->second.first.data();
        }
        if (rows_.size() >= kRowCacheCapacity) {
            rows_.erase(lru_.back());
            lru_.pop_back();
        }
        std::vector<double> values(n_);
        for (std::size_t j = 0; j < n_; ++j)
            values[j] = (i == j) ? 1.0 : std::exp(-gamma_ * (x_.row(i) - x_.row(j)).squaredNorm());
        lru_.push_front(i);
        auto [it, inserted] = rows_.emplace(i, std::make_pair(std::move(values), lru_.begin()));
        return it->second.first.data();
    }

    double at(std::size_t i, std::size_t j) {
        if (!full_.empty()) return full_[i * n_ + j];
        return row(i)[j];
    }

private:
    const RowMatrix& x_;
    double gamma_;
    std::size_t n_;
    std::vector<double> full_;
    std::list<std::size_t> lru_;
    std::unordered_map<std::size_t, std::pair<std::vector<double>, std::list<std::size_t>::iterator>> rows_;
};

// Platt's SMO with the first-choice / second-choice heuristics. The running
// state keeps F_i = sum_j c_j v_j K_ij - v_i, which does not depend on b.
class SmoSolver {
public:
    SmoSolver(const RowMatrix& x, std::span<const int> y, const KernelSpec& kernel, const SmoOptions& options)
        : x_(x),
          y_(y.begin(), y.end()),
          cost_(kernel.cost),
          tol_(options.kkt_tol),
          kernel_(kernel),
          n_(y.size()),
          cache_(x, kernel.gamma),
          alpha_(n_, 0.0),
          grad_(n_),
          rng_(options.seed) {
        for (std::size_t i = 0; i < n_; ++i) grad_[i] = -y_[i];
        max_updates_ = 10 * n_ * std::max<std::size_t>(n_, 1000);
    }

    SvmModel solve() {
        bool examine_all = true;
        std::size_t changed = 0;
        while ((changed > 0 || examine_all) && !exhausted()) {
            changed = 0;
            for (std::size_t i = 0; i < n_ && !exhausted(); ++i) {
                if (examine_all || is_free(i)) changed += examine(i);
            }
            if (examine_all)
                examine_all = false;
            else if (changed == 0)
                examine_all = true;
        }
        polish();
        SvmModel model = build_model();
        if (exhausted()) {
            throw IterationLimitError<SvmModel>("smo_train: update cap of " + std::to_string(max_updates_) +
                                                    " reached before the KKT conditions held",
                                                std::move(model));
        }
        return model;
    }

private:
    bool exhausted() const { return updates_ >= max_updates_; }
    bool is_free(std::size_t i) const { return alpha_[i] > 0.0 && alpha_[i] < cost_; }

    // Members of the "b <= F_i + tol" side and the "b >= F_i - tol" side of
    // the KKT conditions.
    bool in_upper(std::size_t i) const { return y_[i] > 0 ? alpha_[i] < cost_ : alpha_[i] > 0.0; }
    bool in_lower(std::size_t i) const { return y_[i] > 0 ? alpha_[i] > 0.0 : alpha_[i] < cost_; }

    int examine(std::size_t i2) {
        const double e2 = grad_[i2] - b_;
        const double r2 = e2 * y_[i2];
        const double a2 = alpha_[i2];
        if (!((r2 < -tol_ && a2 < cost_) || (r2 > tol_ && a2 > 0.0))) return 0;

        std::size_t free_count = 0;
        std::size_t best = n_;
        double best_gap = -1.0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (!is_free(i)) continue;
            ++free_count;
            const double gap = std::abs(grad_[i] - grad_[i2]);
            if (gap > best_gap) {
                best_gap = gap;
                best = i;
            }
        }
        if (free_count > 1 && best < n_ && take_step(best, i2)) return 1;

        std::uniform_int_distribution<std::size_t> start_dist(0, n_ - 1);
        std::size_t start = start_dist(rng_);
        for (std::size_t k = 0; k < n_; ++k) {
            const std::size_t i1 = (start + k) % n_;
            if (is_free(i1) && take_step(i1, i2)) return 1;
        }
        start = start_dist(rng_);
        for (std::size_t k = 0; k < n_; ++k) {
            const std::size_t i1 = (start + k) % n_;
            if (take_step(i1, i2)) return 1;
        }
        return 0;
    }

    double snap(double a) const {
        const double eps = 1e-10 * cost_;
        if (a < eps) return 0.0;
        if (a > cost_ - eps) return cost_;
        return a;
    }

    bool take_step(std::size_t i1, std::size_t i2) {
        if (i1 == i2 || exhausted()) return false;
        const double a1 = alpha_[i1];
        const double a2 = alpha_[i2];
        const double y1 = y_[i1];
        const double y2 = y_[i2];
        const double s = y1 * y2;
        double lo, hi;
        if (y_[i1] != y_[i2]) {
            lo = std::max(0.0, a2 - a1);
            hi = std::min(cost_, cost_ + a2 - a1);
        } else {
            lo = std::max(0.0, a1 + a2 - cost_);
            hi = std::min(cost_, a1 + a2);
        }
        if (hi - lo <= 1e-14 * cost_) return false;

        const double k11 = 1.0;
        const double k22 = 1.0;
        const double k12 = cache_.at(i1, i2);
        const double eta = k11 + k22 - 2.0 * k12;
        const double f1 = grad_[i1];
        const double f2 = grad_[i2];
        double new_a2;
        if (eta > 1e-12) {
            new_a2 = std::clamp(a2 + y2 * (f1 - f2) / eta, lo, hi);
        } else {
            // Flat or concave direction: the optimum sits at an end of the segment.
            const double g1 = y1 * f1 - a1 * k11 - s * a2 * k12;
            const double g2 = y2 * f2 - s * a1 * k12 - a2 * k22;
            auto end_objective = [&](double a2_end) {
                const double a1_end = a1 + s * (a2 - a2_end);
                return a1_end * g1 + a2_end * g2 + 0.5 * a1_end * a1_end * k11 + 0.5 * a2_end * a2_end * k22 +
                       s * a1_end * a2_end * k12;
            };
            const double lo_obj = end_objective(lo);
            const double hi_obj = end_objective(hi);
            if (lo_obj < hi_obj - 1e-12)
                new_a2 = lo;
            else if (lo_obj > hi_obj + 1e-12)
                new_a2 = hi;
            else
                new_a2 = a2;
        }
        new_a2 = snap(new_a2);
        if (std::abs(new_a2 - a2) < 1e-12 * (new_a2 + a2 + 1e-12)) return false;
        double new_a1 = snap(std::clamp(a1 + s * (a2 - new_a2), 0.0, cost_));

        const double d1 = y1 * (new_a1 - a1);
        const double d2 = y2 * (new_a2 - a2);
        const double e1 = f1 - b_;
        const double e2 = f2 - b_;
        const double b1 = e1 + d1 * k11 + d2 * k12 + b_;
        const double b2 = e2 + d1 * k12 + d2 * k22 + b_;
        alpha_[i1] = new_a1;
        alpha_[i2] = new_a2;
        if (is_free(i1))
            b_ = b1;
        else if (is_free(i2))
            b_ = b2;
        else
            b_ = 0.5 * (b1 + b2);

        const double* row1 = cache_.row(i1);
        const double* row2 = cache_.row(i2);
        for (std::size_t i = 0; i < n_; ++i) grad_[i] += d1 * row1[i] + d2 * row2[i];
        ++updates_;
        return true;
    }

    std::pair<double, double> extreme_gradients(std::size_t* i_low = nullptr, std::size_t* i_high = nullptr) const {
        double low = std::numeric_limits<double>::infinity();
        double high = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n_; ++i) {
            if (in_upper(i) && grad_[i] < low) {
                low = grad_[i];
                if (i_low) *i_low = i;
            }
            if (in_lower(i) && grad_[i] > high) {
                high = grad_[i];
                if (i_high) *i_high = i;
            }
        }
        return {low, high};
    }

    // The heuristic loop only certifies KKT against its running threshold.
    // Maximal-violating-pair steps close the gap to kkt_tol so that the
    // averaged threshold satisfies every condition.
    void polish() {
        while (!exhausted()) {
            std::size_t i_low = 0, i_high = 0;
            const auto [low, high] = extreme_gradients(&i_low, &i_high);
            if (high - low <= tol_) return;
            if (!take_step(i_high, i_low)) return;
        }
    }

    double final_threshold() const {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (is_free(i)) {
                sum += grad_[i];
                ++count;
            }
        }
        if (count > 0) return sum / static_cast<double>(count);
        const auto [low, high] = extreme_gradients();
        return 0.5 * (low + high);
    }

    SvmModel build_model() const {
        SvmModel model;
        model.kernel = kernel_;
        model.threshold = final_threshold();
        std::vector<std::size_t> support;
        for (std::size_t i = 0; i < n_; ++i)
            if (alpha_[i] > 0.0) support.push_back(i);
        model.support_points.resize(static_cast<Eigen::Index>(support.size()), x_.cols());
        model.dual_coefs.resize(static_cast<Eigen::Index>(support.size()));
        for (std::size_t k = 0; k < support.size(); ++k) {
            const auto row = static_cast<Eigen::Index>(k);
            model.support_points.row(row) = x_.row(static_cast<Eigen::Index>(support[k]));
            model.dual_coefs[row] = alpha_[support[k]];
            model.labels.push_back(y_[support[k]]);
        }
        model.support_index = std::move(support);
        return model;
    }

    const RowMatrix& x_;
    std::vector<int> y_;
    double cost_;
    double tol_;
    KernelSpec kernel_;
    std::size_t n_;
    KernelCache cache_;
    std::vector<double> alpha_;
    std::vector<double> grad_;
    double b_ = 0.0;
    Rng rng_;
    std::size_t updates_ = 0;
    std::size_t max_updates_ = 0;
};

void check_labels(std::span<const int> labels, std::size_t rows) {
    require(labels.size() == rows, "label count does not match the number of samples");
    bool pos = false, neg = false;
    for (int v : labels) {
        require(v == 1 || v == -1, "labels must be -1 or +1");
        (v > 0 ? pos : neg) = true;
    }
    if (!(pos && neg)) fail(ErrorCode::degenerate_labels, "both label classes are required, got a single class");
}

// log(1 + exp(f)) without overflow.
double log1p_exp(double f) { return f > 0.0 ? f + std::log1p(std::exp(-f)) : std::log1p(std::exp(f)); }

// 1 / (1 + exp(f)) without overflow.
double logistic_of_negative(double f) {
    if (f >= 0.0) {
        const double e = std::exp(-f);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(f));
}

}  // namespace

SvmModel smo_train(const RowMatrix& x, std::span<const int> labels, const KernelSpec& kernel,
                   const SmoOptions& options) {
    kernel.validate();
    require(options.kkt_tol > 0.0, "smo_train: kkt_tol must be positive");
    check_labels(labels, static_cast<std::size_t>(x.rows()));
    SmoSolver solver(x, labels, kernel, options);
    return solver.solve();
}

double decision_value(const SvmModel& model, RowRef x) {
    require(static_cast<std::size_t>(x.size()) == model.dim() || model.size() == 0,
            "decision_value: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                std::to_string(model.dim()) + ")");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < model.support_points.rows(); ++i) {
        const double k = std::exp(-model.kernel.gamma * (model.support_points.row(i) - x).squaredNorm());
        sum += model.dual_coefs[i] * model.labels[static_cast<std::size_t>(i)] * k;
    }
    return sum - model.threshold;
}

Vector decision_values(const SvmModel& model, const RowMatrix& x) {
    Vector out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = decision_value(model, x.row(i));
    return out;
}

double dual_objective(const SvmModel& model) {
    const Eigen::Index m = model.support_points.rows();
    double quad = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const double k = std::exp(-model.kernel.gamma *
                                      (model.support_points.row(i) - model.support_points.row(j)).squaredNorm());
            quad += model.dual_coefs[i] * model.dual_coefs[j] * model.labels[static_cast<std::size_t>(i)] *
                    model.labels[static_cast<std::size_t>(j)] * k;
        }
    }
    return model.dual_coefs.sum() - 0.5 * quad;
}

double platt_prob(const PlattCalibration& cal, double g) {
    const double p = logistic_of_negative(cal.slope * g + cal.intercept);
    return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

std::vector<double> platt_targets(std::span<const int> labels) {
    check_labels(labels, labels.size());
    const auto n1 = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const auto n0 = static_cast<double>(labels.size()) - n1;
    const double hi = (n1 + 1.0) / (n1 + 2.0);
    const double lo = 1.0 / (n0 + 2.0);
    std::vector<double> targets(labels.size());
    std::transform(labels.begin(), labels.end(), targets.begin(), [&](int v) { return v > 0 ? hi : lo; });
    return targets;
}

double platt_objective(const PlattCalibration& cal, std::span<const double> decisions,
                       std::span<const double> targets) {
    double value = 0.0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const double f = cal.slope * decisions[i] + cal.intercept;
        value += (1.0 - targets[i]) * f - log1p_exp(f);
    }
    return value;
}

std::array<double, 2> platt_gradient(const PlattCalibration& cal, std::span<const double> decisions,
                                     std::span<const double> targets) {
    std::array<double, 2> grad{0.0, 0.0};
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const double p = logistic_of_negative(cal.slope * decisions[i] + cal.intercept);
        grad[0] += decisions[i] * (p - targets[i]);
        grad[1] += p - targets[i];
    }
    return grad;
}

PlattCalibration platt_fit(std::span<const double> decisions, std::span<const int> labels) {
    require(decisions.size() == labels.size(), "platt_fit: decisions and labels differ in length");
    require(decisions.size() >= 2, "platt_fit: at least two samples are required");
    for (double g : decisions) require(std::isfinite(g), "platt_fit: non-finite decision value");
    const std::vector<double> targets = platt_targets(labels);
    const auto n1 = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const auto n0 = static_cast<double>(labels.size()) - n1;

    PlattCalibration cal{0.0, std::log((n0 + 1.0) / (n1 + 1.0))};
    double value = platt_objective(cal, decisions, targets);
    constexpr int kMaxIter = 200;
    constexpr double kGradTol = 1e-9;
    for (int iter = 0; iter < kMaxIter; ++iter) {
        // Negative Hessian of the concave objective.
        double h11 = 1e-12, h22 = 1e-12, h12 = 0.0;
        double g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < decisions.size(); ++i) {
            const double p = logistic_of_negative(cal.slope * decisions[i] + cal.intercept);
            const double d = p * (1.0 - p);
            h11 += decisions[i] * decisions[i] * d;
            h22 += d;
            h12 += decisions[i] * d;
            g1 += decisions[i] * (p - targets[i]);
            g2 += p - targets[i];
        }
        if (std::max(std::abs(g1), std::abs(g2)) <= kGradTol) break;
        const double det = h11 * h22 - h12 * h12;
        double dA, dB;
        if (det > 0.0) {
            dA = (h22 * g1 - h12 * g2) / det;
            dB = (h11 * g2 - h12 * g1) / det;
        } else {
            dA = g1;
            dB = g2;
        }
        double step = 1.0;
        bool moved = false;
        while (step >= 1e-12) {
            const PlattCalibration trial{cal.slope + step * dA, cal.intercept + step * dB};
            const double trial_value = platt_objective(trial, decisions, targets);
            if (trial_value >= value - 1e-14 * std::abs(value)) {
                moved = trial.slope != cal.slope || trial.intercept != cal.intercept;
                cal = trial;
                value = std::max(value, trial_value);
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return cal;
}

namespace {

struct Fold {
    RowMatrix train_x, test_x;
    std::vector<int> train_y, test_y;
    std::vector<Eigen::Index> test_rows;
};

// Stratified assignment: each class is shuffled and dealt round-robin,
// continuing the deal across classes to balance fold sizes.
std::vector<Fold> split_folds(const RowMatrix& x, std::span<const int> labels, int folds, std::uint64_t seed) {
    const std::size_t n = labels.size();
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (labels[i] > 0 ? pos : neg).push_back(i);
    Rng rng(seed);
    std::vector<int> fold_of(n);
    int next = 0;
    for (auto* group : {&pos, &neg}) {
        std::shuffle(group->begin(), group->end(), rng);
        for (std::size_t i : *group) fold_of[i] = next++ % folds;
    }
    std::vector<Fold> parts(static_cast<std::size_t>(folds));
    for (int f = 0; f < folds; ++f) {
        Fold& part = parts[static_cast<std::size_t>(f)];
        std::vector<Eigen::Index> train_rows;
        for (std::size_t i = 0; i < n; ++i) {
            if (fold_of[i] == f) {
                part.test_rows.push_back(static_cast<Eigen::Index>(i));
                part.test_y.push_back(labels[i]);
            } else {
                train_rows.push_back(static_cast<Eigen::Index>(i));
                part.train_y.push_back(labels[i]);
            }
        }
        part.train_x = x(train_rows, Eigen::all);
        part.test_x = x(part.test_rows, Eigen::all);
    }
    return parts;
}

}  // namespace

Vector cross_validated_decisions(const RowMatrix& x, std::span<const int> labels, const SvmModel& full,
                                 const KernelSpec& kernel, int folds, std::uint64_t seed, double kkt_tol) {
    require(folds >= 2, "cross_validated_decisions: at least two folds are required");
    check_labels(labels, static_cast<std::size_t>(x.rows()));
    Vector out(x.rows());
    const int k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(folds), labels.size()));
    const std::vector<Fold> parts = split_folds(x, labels, k, seed);
    for (int f = 0; f < k; ++f) {
        const Fold& part = parts[static_cast<std::size_t>(f)];
        const bool both = std::any_of(part.train_y.begin(), part.train_y.end(), [](int v) { return v > 0; }) &&
                          std::any_of(part.train_y.begin(), part.train_y.end(), [](int v) { return v < 0; });
        if (!both) {
            for (Eigen::Index r : part.test_rows) out[r] = decision_value(full, x.row(r));
            continue;
        }
        SvmModel model;
        try {
            model = smo_train(part.train_x, part.train_y, kernel, {kkt_tol, seed});
        } catch (const IterationLimitError<SvmModel>& limit) {
            model = limit.best();
        }
        for (std::size_t i = 0; i < part.test_rows.size(); ++i)
            out[part.test_rows[i]] = decision_value(model, part.test_x.row(static_cast<Eigen::Index>(i)));
    }
    return out;
}

std::vector<double> default_gamma_grid() {
    std::vector<double> grid;
    for (int e = -6; e <= 2; ++e) grid.push_back(std::ldexp(1.0, e));
    return grid;
}

std::vector<double> default_cost_grid() {
    std::vector<double> grid;
    for (int e = -2; e <= 6; ++e) grid.push_back(std::ldexp(1.0, e));
    return grid;
}

TuningResult tune_hyperparams(const RowMatrix& x, std::span<const int> labels, const TuningOptions& options) {
    require(!options.gamma_grid.empty() && !options.cost_grid.empty(), "tune_hyperparams: empty grid");
    require(options.folds >= 2, "tune_hyperparams: at least two folds are required");
    std::vector<double> gammas = options.gamma_grid;
    std::vector<double> costs = options.cost_grid;
    std::sort(gammas.begin(), gammas.end());
    std::sort(costs.begin(), costs.end());
    for (double g : gammas) KernelSpec{g, 1.0}.validate();
    for (double c : costs) KernelSpec{1.0, c}.validate();
    check_labels(labels, static_cast<std::size_t>(x.rows()));

    if (gammas.size() == 1 && costs.size() == 1)
        return {KernelSpec{gammas.front(), costs.front()}, std::numeric_limits<double>::quiet_NaN(), 0};

    const std::size_t n = labels.size();
    const auto positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int v) { return v > 0; }));
    if (std::min(positives, n - positives) < 2)
        fail(ErrorCode::degenerate_labels, "tune_hyperparams: each class needs at least two samples");
    const int folds = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(options.folds), n));
    const std::vector<Fold> parts = split_folds(x, labels, folds, options.seed);

    TuningResult best{KernelSpec{gammas.front(), costs.front()}, -1.0, folds};
    for (double cost : costs) {
        for (double gamma : gammas) {
            const KernelSpec spec{gamma, cost};
            double accuracy_sum = 0.0;
            for (int f = 0; f < folds; ++f) {
                const Fold& part = parts[static_cast<std::size_t>(f)];
                SvmModel model;
                try {
                    model = smo_train(part.train_x, part.train_y, spec,
                                      {options.kkt_tol, derive_seed(options.seed, stream::smo,
                                                                    static_cast<std::uint64_t>(f))});
                } catch (const IterationLimitError<SvmModel>& limit) {
                    model = limit.best();
                }
                std::size_t correct = 0;
                for (Eigen::Index i = 0; i < part.test_x.rows(); ++i) {
                    const int predicted = decision_value(model, part.test_x.row(i)) > 0.0 ? 1 : -1;
                    if (predicted == part.test_y[static_cast<std::size_t>(i)]) ++correct;
                }
                accuracy_sum += static_cast<double>(correct) / static_cast<double>(part.test_y.size());
            }
            const double accuracy = accuracy_sum / folds;
            if (accuracy > best.cv_accuracy + 1e-12) best = {spec, accuracy, folds};
        }
    }
    return best;
}

}  // namespace pcm
