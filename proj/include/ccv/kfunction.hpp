#pragma once

#include <cstdint>
#include <vector>

#include "ccv/capacity.hpp"

namespace ccv {

// Up to three point masses (p_j, pi_j).
struct ThreePointDist {
    int k = 0;
    double p[3] = {0, 0, 0};
    double pi[3] = {0, 0, 0};

    double mean() const {
        double m = 0;
        for (int j = 0; j < k; ++j) m += p[j] * pi[j];
        return m;
    }
    double variance() const {
        double m = mean(), s = 0;
        for (int j = 0; j < k; ++j) s += p[j] * (pi[j] - m) * (pi[j] - m);
        return s;
    }
    double phi_mean() const;  // E Phi(Pi)
    double max_location() const {
        double m = pi[0];
        for (int j = 1; j < k; ++j) m = std::max(m, pi[j]);
        return m;
    }
    static ThreePointDist point(double x) {
        ThreePointDist d;
        d.k = 1;
        d.p[0] = 1.0;
        d.pi[0] = x;
        return d;
    }
};

struct KResult {
    double r = 0.0;
    double v = 0.0;
    double value = 0.0;
    ThreePointDist minimizer;
    double oracle_gap = 0.0;  // |value - grid oracle| when the oracle ran
};

struct KOptions {
    double box_lo = -1e300;  // support box for the minimizer locations
    double box_hi = 1e300;
    int random_starts = 32;
    uint64_t seed = 0xC0FFEEull;
    int nm_iters = 800;
    int threads = 1;
};

KResult k_value(double r, double v, const KOptions& opts = {});

struct OracleGridSpec {
    double lo = 0.0;      // absolute grid endpoints; 0,0 means auto
    double hi = 0.0;
    double step = 0.01;
};

double k_oracle_grid(double r, double v, const OracleGridSpec& spec = {});

// the paper's two-point construction showing K(r, inf) = 0
double k_large_v_decay(double r, int64_t m);

struct SocrResult {
    double r_star = 0.0;
    double k_at_r_star = 0.0;
    double baseline_as = 0.0;  // sqrt(V(Gamma)) PhiInv(eps)
    ThreePointDist minimizer;
};

SocrResult socr(const CapacityCostSolution& sol, const DispersionInfo& disp, double v, double eps,
                const KOptions& opts = {});

double error_floor(double r, const CapacityCostSolution& sol, const DispersionInfo& disp, double v,
                   const KOptions& opts = {});

struct QuadSpec {
    double abs_tol = 1e-10;
    double truncation = 12.0;
};

struct L2Result {
    double r = 0.0;
    double beta = 0.0;
    double value = 0.0;
    ThreePointDist minimizer;
    double quad_error = 0.0;
};

L2Result l2_bound(double r, double beta, const DispersionInfo& disp, double v, const CapacityCostSolution& sol,
                  const QuadSpec& quad = {}, const KOptions& opts = {});

struct BetaScanResult {
    double beta = 0.0;
    double gap = 0.0;   // K - L2 at the best grid beta
    double k = 0.0;
    double l2 = 0.0;
    double tolerance = 0.0;  // numeric budget: quadrature + optimizer noise
    bool degenerate = false; // K minimizer has (numerically) zero variance
    std::vector<double> betas;
    std::vector<double> gaps;
};

BetaScanResult find_beta(double r, const DispersionInfo& disp, double v, const CapacityCostSolution& sol,
                         const QuadSpec& quad = {}, const KOptions& opts = {});

// Tail sequence (1/x) log E Phi(X - x) + x/2 over increasing x; approaches the
// essential supremum of X.
std::vector<double> essential_sup_limit_check(const ThreePointDist& dist, const std::vector<double>& x_values);

}  // namespace ccv
