#pragma once

// Closed-form reference values for a binary symmetric channel with crossover p
// and cost c(x) = x, independent of the solver under test. With the cost cap
// binding, P* = (1-G, G), the flip output marginal is q = p + (1-2p)G, and
// everything below follows from the entropy formulas.
#include <cmath>

namespace bsc_oracle {

inline double hb(double x) { return -x * std::log(x) - (1.0 - x) * std::log(1.0 - x); }

struct Ref {
    double p, gamma;
    double q;         // Q*(1)
    double capacity;  // Hb(q) - Hb(p)
    double c_prime;   // (1-2p) log((1-q)/q)
    double nu0, nu1, v_gamma, i_max;
    double d0, d1;    // D(W(.|a) || Q*)
};

inline Ref ref(double p, double gamma) {
    Ref r;
    r.p = p;
    r.gamma = gamma;
    r.q = p + (1.0 - 2.0 * p) * gamma;
    r.capacity = hb(r.q) - hb(p);
    r.c_prime = (1.0 - 2.0 * p) * std::log((1.0 - r.q) / r.q);
    double i00 = std::log((1.0 - p) / (1.0 - r.q)), i01 = std::log(p / r.q);
    double i10 = std::log(p / (1.0 - r.q)), i11 = std::log((1.0 - p) / r.q);
    r.d0 = (1.0 - p) * i00 + p * i01;
    r.d1 = p * i10 + (1.0 - p) * i11;
    r.nu0 = (1.0 - p) * i00 * i00 + p * i01 * i01 - r.d0 * r.d0;
    r.nu1 = p * i10 * i10 + (1.0 - p) * i11 * i11 - r.d1 * r.d1;
    r.v_gamma = (1.0 - gamma) * r.nu0 + gamma * r.nu1;
    r.i_max = std::max(std::max(std::fabs(i00), std::fabs(i01)), std::max(std::fabs(i10), std::fabs(i11)));
    return r;
}

}  // namespace bsc_oracle
