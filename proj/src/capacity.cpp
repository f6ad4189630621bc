#include "ccv/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "ccv/math.hpp"
#include "ccv/rng.hpp"

namespace ccv {

namespace {

struct BaResult {
    std::vector<double> p;
    double mi = 0.0;
    double cost = 0.0;
};

// Maximizes I(P,W) - lambda * c(P) by Blahut-Arimoto iterations. Stops when
// the Lagrangian exponents are equalized over the effective support, which is
// what pins the KKT residual, not just the objective increment.
BaResult ba_inner(const Dmc& dmc, double lambda, const SolveOptions& opts, std::span<const double> init) {
    const int J = dmc.J, B = dmc.B;
    std::vector<double> p(init.begin(), init.end());
    std::vector<double> q(size_t(B), 0.0);
    std::vector<double> u(size_t(J), 0.0);  // D(W(.|a)||q) - lambda c(a)
    double prev_obj = -std::numeric_limits<double>::infinity();
    for (int64_t it = 0; it < opts.max_iters; ++it) {
        q = output_distribution(p, dmc);
        for (int a = 0; a < J; ++a) {
            double d = 0.0;
            for (int b = 0; b < B; ++b) {
                double w = dmc.w(a, b);
                if (w > 0.0) d += w * std::log(w / q[b]);
            }
            u[size_t(a)] = d - lambda * dmc.cost[size_t(a)];
        }
        double mx = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < J; ++a) mx = std::max(mx, u[size_t(a)]);
        double z = 0.0;
        for (int a = 0; a < J; ++a) {
            p[size_t(a)] *= std::exp(u[size_t(a)] - mx);
            z += p[size_t(a)];
        }
        for (int a = 0; a < J; ++a) {
            p[size_t(a)] /= z;
            if (p[size_t(a)] < 1e-18) p[size_t(a)] = 0.0;
        }
        double obj = mx + std::log(z);
        if (it > 2 && std::fabs(obj - prev_obj) < opts.tol) {
            double hi = -std::numeric_limits<double>::infinity();
            double lo = std::numeric_limits<double>::infinity();
            for (int a = 0; a < J; ++a) {
                if (p[size_t(a)] > 1e-9) {
                    hi = std::max(hi, u[size_t(a)]);
                    lo = std::min(lo, u[size_t(a)]);
                }
            }
            if (hi - lo < 5e-8) break;
        }
        prev_obj = obj;
    }
    BaResult r;
    r.p = p;
    r.mi = mutual_information(p, dmc);
    r.cost = dmc.cost_of(p);
    return r;
}

std::vector<double> uniform_init(int J) { return std::vector<double>(size_t(J), 1.0 / double(J)); }

// Bisection on the cost multiplier so that c(P) hits gamma.
struct LagrangeSolve {
    BaResult at_gamma;
    double lambda = 0.0;
    bool saturated = false;
};

LagrangeSolve solve_multiplier(const Dmc& dmc, double gamma, const SolveOptions& opts, std::span<const double> init) {
    LagrangeSolve out;
    // warm starts between bisection steps; blend with uniform so support can regrow
    auto warm = [&](const std::vector<double>& prev) {
        std::vector<double> w(prev);
        for (auto& x : w) x = 0.99 * x + 0.01 / double(dmc.J);
        return w;
    };
    BaResult unconstrained = ba_inner(dmc, 0.0, opts, init);
    if (unconstrained.cost <= gamma + 1e-12) {
        out.at_gamma = unconstrained;
        out.lambda = 0.0;
        out.saturated = true;
        return out;
    }
    double lo = 0.0, hi = 1.0;
    BaResult rhi = ba_inner(dmc, hi, opts, warm(unconstrained.p));
    int guard = 0;
    while (rhi.cost > gamma && guard++ < 80) {
        hi *= 2.0;
        rhi = ba_inner(dmc, hi, opts, warm(rhi.p));
    }
    if (rhi.cost > gamma) throw NumericError("cost multiplier bracket expansion failed");
    BaResult best = rhi;
    double best_lambda = hi;
    BaResult prev = rhi;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        BaResult r = ba_inner(dmc, mid, opts, warm(prev.p));
        prev = r;
        if (std::fabs(r.cost - gamma) < std::fabs(best.cost - gamma)) {
            best = r;
            best_lambda = mid;
        }
        if (r.cost > gamma) lo = mid; else hi = mid;
        if (std::fabs(r.cost - gamma) <= opts.cost_tol || hi - lo < 1e-15 * (1.0 + hi)) break;
    }
    out.at_gamma = best;
    out.lambda = best_lambda;
    out.saturated = false;
    return out;
}

}  // namespace

CapacityCostSolution solve_capacity_cost(const Dmc& dmc, double gamma, const SolveOptions& opts) {
    if (gamma <= dmc.gamma0) throw InputError("gamma must exceed the minimum symbol cost");

    LagrangeSolve ls = solve_multiplier(dmc, gamma, opts, uniform_init(dmc.J));

    CapacityCostSolution sol;
    sol.gamma = gamma;
    sol.capacity = ls.at_gamma.mi;
    sol.p_star = ls.at_gamma.p;
    sol.q_star = output_distribution(sol.p_star, dmc);
    sol.c_prime = ls.saturated ? 0.0 : ls.lambda;
    sol.saturated = ls.saturated;

    if (opts.probe_uniqueness) {
        RngStream rng(opts.probe_seed, 0xCA9AC17Aull, uint64_t(gamma * 1e9));
        bool all_agree = true;
        for (int trial = 0; trial < 16 && all_agree; ++trial) {
            std::vector<double> init(size_t(dmc.J), 0.0);
            double z = 0.0;
            for (int a = 0; a < dmc.J; ++a) {
                init[size_t(a)] = 0.05 + rng.next_double();
                z += init[size_t(a)];
            }
            for (auto& v : init) v /= z;
            LagrangeSolve probe = solve_multiplier(dmc, gamma, opts, init);
            if (l1_distance(probe.at_gamma.p, sol.p_star) > 1e-6) all_agree = false;
        }
        sol.uniqueness_flag = all_agree;
    }

    sol.kkt_residual = verify_kkt(sol, dmc).residual;
    return sol;
}

KktReport verify_kkt(const CapacityCostSolution& sol, const Dmc& dmc) {
    KktReport rep;
    for (int a = 0; a < dmc.J; ++a) {
        double d = 0.0;
        for (int b = 0; b < dmc.B; ++b) {
            double w = dmc.w(a, b);
            if (w > 0.0) d += w * std::log(w / sol.q_star[size_t(b)]);
        }
        double rhs = sol.capacity - sol.c_prime * (sol.gamma - dmc.cost[size_t(a)]);
        if (sol.p_star[size_t(a)] > 1e-9) {
            rep.max_equality_residual = std::max(rep.max_equality_residual, std::fabs(d - rhs));
        } else {
            rep.max_inequality_violation = std::max(rep.max_inequality_violation, std::max(0.0, d - rhs));
        }
    }
    rep.residual = std::max(rep.max_equality_residual, rep.max_inequality_violation);
    return rep;
}

double capacity_derivative(const Dmc& dmc, double gamma, const SolveOptions& opts) {
    double gs = gamma_star(dmc, opts);
    if (!(gamma > dmc.gamma0 && gamma < gs)) throw InputError("gamma outside (gamma0, gamma*)");
    CapacityCostSolution sol = solve_capacity_cost(dmc, gamma, opts);
    double h = 1e-4 * (gs - dmc.gamma0);
    SolveOptions fast = opts;
    fast.probe_uniqueness = false;
    double cp = solve_capacity_cost(dmc, std::min(gamma + h, gs), fast).capacity;
    double cm = solve_capacity_cost(dmc, std::max(gamma - h, dmc.gamma0 + 1e-12), fast).capacity;
    double fd = (cp - cm) / (2.0 * h);
    double tol = std::max(1e-3, 10.0 * opts.tol);
    if (std::fabs(fd - sol.c_prime) > tol)
        throw NumericError("capacity derivative inconsistency: multiplier " + std::to_string(sol.c_prime) +
                           " vs finite difference " + std::to_string(fd));
    return sol.c_prime;
}

double gamma_star(const Dmc& dmc, const SolveOptions& opts) {
    SolveOptions fast = opts;
    fast.probe_uniqueness = false;
    auto cprime_at = [&](double g) {
        return solve_multiplier(dmc, g, fast, std::vector<double>(size_t(dmc.J), 1.0 / dmc.J)).lambda;
    };
    double lo = dmc.gamma0, hi = dmc.cmax;
    if (cprime_at(hi) >= 1e-8) return hi;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if (cprime_at(mid) < 1e-8) hi = mid; else lo = mid;
    }
    return hi;
}

DispersionInfo dispersion(const CapacityCostSolution& sol, const Dmc& dmc) {
    DispersionInfo d;
    d.nu.resize(size_t(dmc.J));
    d.nu_min = std::numeric_limits<double>::infinity();
    d.nu_max = 0.0;
    d.i_max = 0.0;
    for (int a = 0; a < dmc.J; ++a) {
        double m1 = 0.0, m2 = 0.0;
        for (int b = 0; b < dmc.B; ++b) {
            double w = dmc.w(a, b);
            if (w == 0.0) continue;
            double i = info_density(dmc, sol.q_star, a, b);
            m1 += w * i;
            m2 += w * i * i;
            d.i_max = std::max(d.i_max, std::fabs(i));
        }
        double nu = std::max(0.0, m2 - m1 * m1);
        d.nu[size_t(a)] = nu;
        d.nu_min = std::min(d.nu_min, nu);
        d.nu_max = std::max(d.nu_max, nu);
    }
    d.v_gamma = 0.0;
    for (int a = 0; a < dmc.J; ++a) d.v_gamma += sol.p_star[size_t(a)] * d.nu[size_t(a)];
    return d;
}

QuantizedQuantities quantized_quantities(const CapacityCostSolution& sol, const DispersionInfo& disp, const Dmc& dmc,
                                         int64_t n) {
    if (n < dmc.J) throw InputError("n must be at least the input alphabet size");
    QuantizedQuantities q;
    q.n = n;
    q.type_n = quantize_to_type(sol.p_star, n, sol.gamma, dmc);
    std::vector<double> t = q.type_n.distribution();

    q.c_n = 0.0;
    q.v_n = 0.0;
    for (int a = 0; a < dmc.J; ++a) {
        double mean_i = 0.0;
        for (int b = 0; b < dmc.B; ++b) {
            double w = dmc.w(a, b);
            if (w > 0.0) mean_i += w * info_density(dmc, sol.q_star, a, b);
        }
        q.c_n += t[size_t(a)] * mean_i;
        q.v_n += t[size_t(a)] * disp.nu[size_t(a)];
    }

    q.support_match = true;
    for (int a = 0; a < dmc.J; ++a) {
        bool sp = sol.p_star[size_t(a)] > 1e-9;
        bool st = q.type_n.counts[size_t(a)] > 0;
        if (sp != st) q.support_match = false;
    }
    if (q.support_match) {
        double lower = sol.capacity - 2.0 * sol.c_prime * dmc.J * dmc.cmax / double(n);
        q.lemma6_part1_ok = q.c_n >= lower - 1e-12 && q.c_n <= sol.capacity + 1e-12;
        q.lemma6_part2_ok = std::fabs(q.v_n - disp.v_gamma) <= 2.0 * dmc.J * disp.nu_max / double(n) + 1e-12;
    }
    return q;
}

double cc_output_prob(const NType& t, const Dmc& dmc, std::span<const int> y, int64_t state_cap) {
    const int J = dmc.J;
    const int64_t n = t.n;
    if (int64_t(y.size()) != n) throw InputError("output length does not match the type blocklength");
    int64_t states = 1;
    for (int a = 0; a < J; ++a) {
        states *= t.counts[size_t(a)] + 1;
        if (states > state_cap) throw InputError("cc_output_prob instance too large");
    }
    // forward probabilities over remaining-count states, positions processed one by one
    std::vector<int64_t> stride(size_t(J), 1);
    for (int a = J - 2; a >= 0; --a) stride[size_t(a)] = stride[size_t(a) + 1] * (t.counts[size_t(a) + 1] + 1);
    std::vector<double> cur(size_t(states), 0.0), nxt;
    int64_t start = 0;
    for (int a = 0; a < J; ++a) start += stride[size_t(a)] * t.counts[size_t(a)];
    cur[size_t(start)] = 1.0;

    std::vector<int64_t> rem(size_t(J), 0);
    for (int64_t pos = 0; pos < n; ++pos) {
        nxt.assign(size_t(states), 0.0);
        int64_t remaining = n - pos;
        for (int64_t s = 0; s < states; ++s) {
            double pr = cur[size_t(s)];
            if (pr == 0.0) continue;
            int64_t code = s;
            for (int a = 0; a < J; ++a) {
                rem[size_t(a)] = code / stride[size_t(a)];
                code %= stride[size_t(a)];
            }
            for (int a = 0; a < J; ++a) {
                if (rem[size_t(a)] == 0) continue;
                double pick = double(rem[size_t(a)]) / double(remaining);
                double w = dmc.w(a, y[size_t(pos)]);
                if (pick * w == 0.0) continue;
                nxt[size_t(s - stride[size_t(a)])] += pr * pick * w;
            }
        }
        cur.swap(nxt);
    }
    return cur[0];
}

double cc_log_output_prob_binary(const NType& t, const Dmc& dmc, int64_t ones) {
    const int64_t n = t.n;
    const int64_t n1 = t.counts[1];
    const int64_t n0 = t.counts[0];
    const int64_t k = ones;
    double lw00 = std::log(dmc.w(0, 0)), lw01 = std::log(dmc.w(0, 1));
    double lw10 = std::log(dmc.w(1, 0)), lw11 = std::log(dmc.w(1, 1));
    // overlap a = #positions with x=1 and y=1; uniform type class makes the
    // position pattern hypergeometric given k.
    double acc = -std::numeric_limits<double>::infinity();
    int64_t lo = std::max<int64_t>(0, k - n0), hi = std::min(k, n1);
    double lbase = -log_binom(n, n1);
    for (int64_t a = lo; a <= hi; ++a) {
        // a: x=1,y=1; n1-a: x=1,y=0; k-a: x=0,y=1; rest: x=0,y=0
        double term = lbase + log_binom(k, a) + log_binom(n - k, n1 - a);
        term += double(a) * lw11 + double(n1 - a) * lw10 + double(k - a) * lw01 + double(n0 - (k - a)) * lw00;
        acc = log_add_exp(acc, term);
    }
    return acc;
}

QRatioReport check_q_ratio_bound(const NType& t, const CapacityCostSolution& sol, const Dmc& dmc, int64_t n,
                                 double kappa_cap) {
    if (t.n != n) throw InputError("type blocklength mismatch");
    QRatioReport rep;
    rep.n = n;
    int support = 0;
    for (double p : sol.p_star)
        if (p > 1e-9) ++support;
    rep.threshold_term = 0.5 * double(support - 1) * std::log(double(n));

    // Q* and Qcc are both constant on output type classes, so the exhaustive
    // minimum over B^n reduces to a walk over output compositions.
    const int B = dmc.B;
    std::vector<int64_t> comp(size_t(B), 0);
    double min_ratio = std::numeric_limits<double>::infinity();
    std::vector<int> y(size_t(n), 0);
    std::function<void(int, int64_t)> rec = [&](int b, int64_t left) {
        if (b == B - 1) {
            comp[size_t(b)] = left;
            int64_t pos = 0;
            double log_qstar = 0.0;
            for (int bb = 0; bb < B; ++bb) {
                for (int64_t i = 0; i < comp[size_t(bb)]; ++i) y[size_t(pos++)] = bb;
                if (comp[size_t(bb)] > 0) {
                    if (sol.q_star[size_t(bb)] <= 0.0) return;  // Q* support covers all b by assumption
                    log_qstar += double(comp[size_t(bb)]) * std::log(sol.q_star[size_t(bb)]);
                }
            }
            double qcc = cc_output_prob(t, dmc, y);
            if (qcc <= 0.0) return;  // ratio is +inf there, never the minimum
            min_ratio = std::min(min_ratio, log_qstar - std::log(qcc));
            return;
        }
        for (int64_t c = 0; c <= left; ++c) {
            comp[size_t(b)] = c;
            rec(b + 1, left - c);
        }
    };
    rec(0, n);

    rep.min_log_ratio = min_ratio;
    rep.kappa_fit = std::max(0.0, -(min_ratio + rep.threshold_term));
    rep.shape_holds = min_ratio >= -rep.threshold_term - kappa_cap;
    return rep;
}

}  // namespace ccv
