#pragma once

#include "rangefuse/binning.hpp"

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

namespace rangefuse {

// Univariate Gaussian mixture over the ground-truth pixels of one bin group.
// Component m is model m: its mean is fixed to the average of the model's
// predictions in the group, and EM only updates the mixing weights and the
// component variances.

enum class InitMode {
    sample_variance,  // (1/N) sum (x - mu)^2
    scaled_norm,      // (1/N) ||x - mu||_2, dimensionally a standard deviation / sqrt(N)
};

InitMode parse_init_mode(std::string_view name);
std::string_view to_string(InitMode mode);

struct EmConfig {
    int max_steps = 1000;
    double loglik_tol = 1e-5;     // absolute change of the total log-likelihood
    std::size_t min_pixels = 100; // smaller groups fall back to fixed weights
    double variance_floor = 1e-6; // squared intensity units
    InitMode init_mode = InitMode::sample_variance;

    void validate() const;
};

struct GmmBinModel {
    std::vector<double> means;
    std::vector<double> variances;
    std::vector<double> weights;
    std::size_t count = 0;
    bool converged = false;
    int steps_taken = 0;
    // Total log-likelihood before the first step, then after every step.
    std::vector<double> loglik_trace;

    std::size_t num_components() const { return weights.size(); }
};

/// Posterior responsibilities, N x M row-major, plus the total
/// log-likelihood of the model they were computed from.
struct Responsibilities {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> gamma;
    double loglik = 0.0;

    double operator()(std::size_t i, std::size_t m) const { return gamma[i * cols + m]; }
};

/// Normal density with the given mean and variance. Throws ContractError on
/// non-finite input or non-positive variance.
double gaussian_pdf(double y, double mean, double variance);
double gaussian_log_pdf(double y, double mean, double variance);

/// Means from the group's predictions, variances per cfg.init_mode (floored),
/// uniform weights. Throws ContractError for an empty group.
GmmBinModel init_priors(const BinGroup& group, const EmConfig& cfg);

/// Log-space E-step. Rows whose every component has zero density in log
/// space fall back to the current weights.
Responsibilities e_step(const BinGroup& group, const GmmBinModel& model);
void e_step(const BinGroup& group, const GmmBinModel& model, Responsibilities& out);

/// Weight and variance update; means are copied through unchanged. A
/// component with zero total responsibility keeps its variance and gets
/// weight 0.
GmmBinModel m_step(const BinGroup& group, const Responsibilities& resp, const GmmBinModel& model,
                   const EmConfig& cfg);

/// Total log-likelihood sum_i log sum_m w_m N(y_i; mu_m, var_m).
double log_likelihood(const BinGroup& group, const GmmBinModel& model);

/// Called with the model after every M-step.
using StepObserver = std::function<void(const GmmBinModel&)>;

/// Alternates E and M steps from init_priors until the log-likelihood
/// changes by less than cfg.loglik_tol or cfg.max_steps is reached.
GmmBinModel run_mpem(const BinGroup& group, const EmConfig& cfg, const StepObserver& observer = {});

/// True when the solution should not be trusted: non-finite parameters,
/// every variance at the floor, or a log-likelihood decrease beyond 1e-8
/// relative.
bool is_undetermined(const GmmBinModel& model, const EmConfig& cfg);

}  // namespace rangefuse
