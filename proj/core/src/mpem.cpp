#include "rangefuse/mpem.hpp"

#include "rangefuse/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace rangefuse {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMonotoneRelTol = 1e-8;

// log(w) - log(2 pi var) / 2 and 1 / (2 var) for each component.
struct ComponentTerms {
    std::vector<double> offset;
    std::vector<double> half_precision;

    explicit ComponentTerms(const GmmBinModel& model) {
        const std::size_t m_count = model.num_components();
        offset.resize(m_count);
        half_precision.resize(m_count);
        for (std::size_t m = 0; m < m_count; ++m) {
            const double w = model.weights[m];
            offset[m] = (w > 0.0 ? std::log(w) : kNegInf) -
                        0.5 * std::log(2.0 * std::numbers::pi * model.variances[m]);
            half_precision[m] = 0.5 / model.variances[m];
        }
    }
};

void check_group(const BinGroup& group, std::size_t components) {
    if (group.count() == 0) throw ContractError("empty bin group");
    if (group.num_models() != components) {
        throw ContractError("group has " + std::to_string(group.num_models()) +
                            " models, mixture has " + std::to_string(components));
    }
    for (const auto& values : group.pred_values) {
        if (values.size() != group.count()) throw ContractError("bin group value lengths differ");
    }
}

// Sufficient statistics of one EM iteration: the E-step for `model` folded
// directly into the M-step sums, without materializing the N x M matrix.
struct StepStats {
    double loglik = 0.0;
    std::vector<double> mass;
    std::vector<double> scatter;
};

void accumulate(const BinGroup& group, const GmmBinModel& model, StepStats& stats) {
    const std::size_t n = group.count();
    const std::size_t m_count = model.num_components();
    const ComponentTerms terms(model);
    stats.loglik = 0.0;
    stats.mass.assign(m_count, 0.0);
    stats.scatter.assign(m_count, 0.0);

    std::vector<double> lp(m_count), sq(m_count);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = group.gt_values[i];
        double top = kNegInf;
        std::size_t arg = 0;
        for (std::size_t m = 0; m < m_count; ++m) {
            const double d = y - model.means[m];
            sq[m] = d * d;
            lp[m] = terms.offset[m] - sq[m] * terms.half_precision[m];
            if (lp[m] > top) {
                top = lp[m];
                arg = m;
            }
        }
        if (top == kNegInf) {
            for (std::size_t m = 0; m < m_count; ++m) {
                stats.mass[m] += model.weights[m];
                stats.scatter[m] += model.weights[m] * sq[m];
            }
            stats.loglik += kNegInf;
            continue;
        }
        double s = 0.0;
        for (std::size_t m = 0; m < m_count; ++m) {
            lp[m] = m == arg ? 1.0 : std::exp(lp[m] - top);
            s += lp[m];
        }
        const double inv_s = 1.0 / s;
        for (std::size_t m = 0; m < m_count; ++m) {
            const double g = lp[m] * inv_s;
            stats.mass[m] += g;
            stats.scatter[m] += g * sq[m];
        }
        stats.loglik += top + std::log(s);
    }
}

void update_from_stats(const StepStats& stats, const EmConfig& cfg, GmmBinModel& model) {
    double total_mass = 0.0;
    for (double v : stats.mass) total_mass += v;
    for (std::size_t m = 0; m < model.num_components(); ++m) {
        if (stats.mass[m] > 0.0) {
            model.weights[m] = stats.mass[m] / total_mass;
            model.variances[m] = std::max(stats.scatter[m] / stats.mass[m], cfg.variance_floor);
        } else {
            model.weights[m] = 0.0;
        }
    }
}

}  // namespace

InitMode parse_init_mode(std::string_view name) {
    if (name == "sample_variance") return InitMode::sample_variance;
    if (name == "scaled_norm") return InitMode::scaled_norm;
    throw ContractError("unknown init mode '" + std::string(name) + "'");
}

std::string_view to_string(InitMode mode) {
    return mode == InitMode::sample_variance ? "sample_variance" : "scaled_norm";
}

void EmConfig::validate() const {
    if (max_steps < 1) throw ContractError("max_steps must be >= 1");
    if (!(loglik_tol > 0.0)) throw ContractError("loglik_tol must be > 0");
    if (!(variance_floor > 0.0)) throw ContractError("variance_floor must be > 0");
}

double gaussian_log_pdf(double y, double mean, double variance) {
    if (!std::isfinite(y) || !std::isfinite(mean) || !std::isfinite(variance)) {
        throw ContractError("gaussian_pdf: non-finite input");
    }
    if (!(variance > 0.0)) throw ContractError("gaussian_pdf: variance must be positive");
    const double d = y - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * variance) - d * d / (2.0 * variance);
}

double gaussian_pdf(double y, double mean, double variance) {
    return std::exp(gaussian_log_pdf(y, mean, variance));
}

GmmBinModel init_priors(const BinGroup& group, const EmConfig& cfg) {
    check_group(group, group.num_models());
    const std::size_t n = group.count();
    const std::size_t m_count = group.num_models();
    const double inv_n = 1.0 / static_cast<double>(n);

    GmmBinModel model;
    model.count = n;
    model.means.resize(m_count);
    model.variances.resize(m_count);
    model.weights.assign(m_count, 1.0 / static_cast<double>(m_count));
    for (std::size_t m = 0; m < m_count; ++m) {
        const auto& x = group.pred_values[m];
        double sum = 0.0;
        for (double v : x) sum += v;
        const double mu = sum * inv_n;

        double sq = 0.0;
        for (double v : x) sq += (v - mu) * (v - mu);
        const double spread = cfg.init_mode == InitMode::sample_variance ? sq * inv_n
                                                                         : std::sqrt(sq) * inv_n;
        model.means[m] = mu;
        model.variances[m] = std::max(spread, cfg.variance_floor);
    }
    return model;
}

void e_step(const BinGroup& group, const GmmBinModel& model, Responsibilities& out) {
    const std::size_t n = group.count();
    const std::size_t m_count = model.num_components();
    const ComponentTerms terms(model);

    out.rows = n;
    out.cols = m_count;
    out.gamma.resize(n * m_count);
    std::vector<double> lp(m_count);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = group.gt_values[i];
        double top = kNegInf;
        for (std::size_t m = 0; m < m_count; ++m) {
            const double d = y - model.means[m];
            lp[m] = terms.offset[m] - d * d * terms.half_precision[m];
            top = std::max(top, lp[m]);
        }
        double* row = &out.gamma[i * m_count];
        if (top == kNegInf) {
            std::copy(model.weights.begin(), model.weights.end(), row);
            total += kNegInf;
            continue;
        }
        double s = 0.0;
        for (std::size_t m = 0; m < m_count; ++m) {
            row[m] = std::exp(lp[m] - top);
            s += row[m];
        }
        const double inv_s = 1.0 / s;
        for (std::size_t m = 0; m < m_count; ++m) row[m] *= inv_s;
        total += top + std::log(s);
    }
    out.loglik = total;
}

Responsibilities e_step(const BinGroup& group, const GmmBinModel& model) {
    check_group(group, model.num_components());
    Responsibilities out;
    e_step(group, model, out);
    return out;
}

GmmBinModel m_step(const BinGroup& group, const Responsibilities& resp, const GmmBinModel& model,
                   const EmConfig& cfg) {
    const std::size_t n = group.count();
    const std::size_t m_count = model.num_components();
    if (resp.rows != n || resp.cols != m_count) {
        throw ContractError("responsibility matrix shape does not match the group");
    }

    StepStats stats;
    stats.mass.assign(m_count, 0.0);
    stats.scatter.assign(m_count, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = group.gt_values[i];
        const double* row = &resp.gamma[i * m_count];
        for (std::size_t m = 0; m < m_count; ++m) {
            const double d = y - model.means[m];
            stats.mass[m] += row[m];
            stats.scatter[m] += row[m] * (d * d);
        }
    }

    // sum(mass) equals N up to rounding; dividing by it keeps the weights on
    // the simplex to a few ulps even for very large groups.
    GmmBinModel next = model;
    update_from_stats(stats, cfg, next);
    return next;
}

double log_likelihood(const BinGroup& group, const GmmBinModel& model) {
    return e_step(group, model).loglik;
}

GmmBinModel run_mpem(const BinGroup& group, const EmConfig& cfg, const StepObserver& observer) {
    cfg.validate();
    GmmBinModel model = init_priors(group, cfg);

    StepStats stats;
    accumulate(group, model, stats);
    model.loglik_trace.push_back(stats.loglik);

    for (int step = 1; step <= cfg.max_steps; ++step) {
        update_from_stats(stats, cfg, model);
        accumulate(group, model, stats);
        const double previous = model.loglik_trace.back();
        model.loglik_trace.push_back(stats.loglik);
        model.steps_taken = step;
        if (observer) observer(model);

        if (!std::isfinite(stats.loglik)) break;
        if (std::abs(stats.loglik - previous) < cfg.loglik_tol) {
            model.converged = true;
            break;
        }
    }
    return model;
}

bool is_undetermined(const GmmBinModel& model, const EmConfig& cfg) {
    for (std::size_t m = 0; m < model.num_components(); ++m) {
        if (!std::isfinite(model.weights[m]) || !std::isfinite(model.variances[m])) return true;
    }
    const bool all_floored = std::all_of(model.variances.begin(), model.variances.end(),
                                         [&](double v) { return v <= cfg.variance_floor; });
    if (all_floored) return true;

    const auto& trace = model.loglik_trace;
    for (std::size_t t = 0; t < trace.size(); ++t) {
        if (!std::isfinite(trace[t])) return true;
        if (t > 0 && trace[t] < trace[t - 1] - kMonotoneRelTol * std::abs(trace[t - 1])) return true;
    }
    return false;
}

}  // namespace rangefuse
