#pragma once

#include <cstdint>
#include <vector>

#include "ccv/capacity.hpp"
#include "ccv/kfunction.hpp"

namespace ccv {

struct SchemeBranch {
    double p = 0.0;        // mixture weight
    double pi = 0.0;       // minimizer location
    double gamma_j = 0.0;  // mapped cost level
    CapacityCostSolution sol;
    NType type;
};

struct SchemeSpec {
    int64_t n = 0;
    double r = 0.0;
    double theta = 0.0;
    double gamma = 0.0;
    double v = 0.0;
    double capacity = 0.0;  // C(gamma) of the base solution
    std::vector<SchemeBranch> branches;
    int s_support = 0;      // s(P*)
    double kappa_hat = 0.0; // fitted constant of the output-law ratio correction
    double analytic_cost_mean = 0.0;  // max_k E[c(X_k)]
    double analytic_cost_var = 0.0;   // n^2 sum p_j (c_j - cbar)^2 after repair
};

struct FeedbackSchemeSpec {
    SchemeSpec base;              // branch types at blocklength n/2
    double beta = 0.0;
    double delta1 = 0.0;          // calibrated delta_n^(1) >= 0
    std::vector<double> beta_j;
    std::vector<double> tau_j;    // absolute halfway thresholds in nats
    std::vector<double> switch_prob;  // estimated U_j at the calibrated delta
    NType timid_type;             // [P*]_{n/2} at cost gamma
    CapacityCostSolution timid_sol;
    double calib_residual = 0.0;  // achieved second-half E[c(X_k)] minus gamma
    double analytic_var_bound = 0.0;
};

struct SimReport {
    int64_t trials = 0;
    int64_t n = 0;
    double r = 0.0;
    double theta = 0.0;
    double threshold_prob = 0.0;
    double std_err = 0.0;
    double lemma1_bound = 0.0;  // threshold_prob + exp(-n theta)
    double cost_mean = 0.0;     // E[sum c(X_i)] / n
    double cost_mean_se = 0.0;
    double cost_var = 0.0;      // Var(sum c(X_i))
    double cost_var_se = 0.0;
    uint64_t seed = 0;
    bool exact_reference = false;  // exact mixture reference measure used
};

struct RunOptions {
    int threads = 1;
    int64_t block = 4096;
    bool force_surrogate = false;  // skip the exact binary reference path
};

struct SchemeOptions {
    double feasibility_margin = 0.02;  // fraction of min(G-G0, G*-G) kept clear
    KOptions kopts;
    SolveOptions solve;
};

SchemeSpec build_nofeedback_scheme(const Dmc& dmc, const CapacityCostSolution& sol, const DispersionInfo& disp,
                                   double v, double r, int64_t n, double theta, const SchemeOptions& opts = {});

SimReport run_nofeedback_trials(const SchemeSpec& scheme, const Dmc& dmc, int64_t trials, uint64_t seed,
                                const RunOptions& run = {});

FeedbackSchemeSpec build_feedback_scheme(const Dmc& dmc, const CapacityCostSolution& sol, const DispersionInfo& disp,
                                         double v, double r, int64_t n, double theta, double beta,
                                         int64_t calibration_trials, uint64_t seed, const SchemeOptions& opts = {});

SimReport run_feedback_trials(const FeedbackSchemeSpec& scheme, const Dmc& dmc, int64_t trials, uint64_t seed,
                              const RunOptions& run = {});

struct ExactCodeReport {
    int64_t trials = 0;
    int64_t n = 0;
    int64_t messages = 0;
    double error_rate = 0.0;
    double error_se = 0.0;
    double lemma1_bound = 0.0;
    double bound_se = 0.0;
    uint64_t seed = 0;
};

ExactCodeReport run_exact_random_code(const Dmc& dmc, const SchemeSpec& scheme, int64_t num_messages, int64_t trials,
                                      uint64_t seed, const RunOptions& run = {});

double hoeffding_ratio_bound(std::span<const double> q_prime, std::span<const double> q, int64_t n, double c_n,
                             double gamma_floor);

// empirical P(log q(Y^n)/q'(Y^n) >= c_n) under Y^n iid q'
double hoeffding_exceedance_mc(std::span<const double> q_prime, std::span<const double> q, int64_t n, double c_n,
                               int64_t trials, uint64_t seed, const RunOptions& run = {});

}  // namespace ccv
