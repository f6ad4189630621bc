#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ccv/channel.hpp"

namespace ccv {

struct CapacityCostSolution {
    double gamma = 0.0;
    double capacity = 0.0;          // nats
    std::vector<double> p_star;
    std::vector<double> q_star;
    double c_prime = 0.0;           // Lagrange multiplier, nats per unit cost
    double kkt_residual = 0.0;
    bool saturated = false;         // gamma >= gamma*, constraint slack
    bool uniqueness_flag = false;   // multi-start agreement probe
};

struct DispersionInfo {
    std::vector<double> nu;   // per-symbol Var of i(a, .) under W(.|a)
    double v_gamma = 0.0;     // sum_a P*(a) nu_a
    double nu_min = 0.0;
    double nu_max = 0.0;
    double i_max = 0.0;       // max |i(a,b)| over supported pairs
};

struct QuantizedQuantities {
    int64_t n = 0;
    NType type_n;
    double c_n = 0.0;  // [C(Gamma)]_n
    double v_n = 0.0;  // [V(Gamma)]_n
    bool support_match = false;
    bool lemma6_part1_ok = false;
    bool lemma6_part2_ok = false;
};

struct KktReport {
    double max_equality_residual = 0.0;    // supported symbols
    double max_inequality_violation = 0.0; // unsupported symbols, positive part
    double residual = 0.0;                 // max of the two
};

struct QRatioReport {
    int64_t n = 0;
    double min_log_ratio = 0.0;   // min over outputs of log Q* - log Qcc
    double threshold_term = 0.0;  // ((s(P*)-1)/2) log n
    double kappa_fit = 0.0;       // max(0, -(min_log_ratio + threshold_term))
    bool shape_holds = false;     // min_log_ratio >= -threshold_term - kappa_cap
};

struct SolveOptions {
    double tol = 1e-10;       // mutual-information increment tolerance
    int64_t max_iters = 100000;
    double cost_tol = 1e-11;  // |c(P) - Gamma| target for the multiplier bisection
    bool probe_uniqueness = true;
    uint64_t probe_seed = 20240711;
};

CapacityCostSolution solve_capacity_cost(const Dmc& dmc, double gamma, const SolveOptions& opts = {});

KktReport verify_kkt(const CapacityCostSolution& sol, const Dmc& dmc);

double capacity_derivative(const Dmc& dmc, double gamma, const SolveOptions& opts = {});

// smallest gamma with C'(gamma) below 1e-8
double gamma_star(const Dmc& dmc, const SolveOptions& opts = {});

DispersionInfo dispersion(const CapacityCostSolution& sol, const Dmc& dmc);

QuantizedQuantities quantized_quantities(const CapacityCostSolution& sol, const DispersionInfo& disp, const Dmc& dmc,
                                         int64_t n);

// Exact Q^cc(y^n) for small instances, dynamic program over remaining counts.
double cc_output_prob(const NType& t, const Dmc& dmc, std::span<const int> y, int64_t state_cap = 2000000);

// log Q^cc(y^n) for a binary-input binary-output channel given the number of
// positions where y equals output symbol 1; O(n) hypergeometric sum.
double cc_log_output_prob_binary(const NType& t, const Dmc& dmc, int64_t ones);

QRatioReport check_q_ratio_bound(const NType& t, const CapacityCostSolution& sol, const Dmc& dmc, int64_t n,
                                 double kappa_cap = 2.0);

}  // namespace ccv
