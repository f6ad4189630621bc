#include "ccv/channel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "ccv/math.hpp"

namespace ccv {

double l1_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return s;
}

Dmc validate_channel(const RawChannelSpec& raw) {
    Dmc dmc;
    dmc.input_symbols = raw.input_symbols;
    dmc.output_symbols = raw.output_symbols;
    dmc.J = int(raw.input_symbols.size());
    dmc.B = int(raw.output_symbols.size());
    if (dmc.J < 2) throw InputError("channel needs at least two input symbols");
    if (dmc.B < 1) throw InputError("channel needs at least one output symbol");
    if (int(raw.transition.size()) != dmc.J) throw InputError("transition row count does not match input alphabet");
    if (int(raw.cost.size()) != dmc.J) throw InputError("cost vector length does not match input alphabet");

    dmc.transition.resize(size_t(dmc.J) * dmc.B);
    for (int a = 0; a < dmc.J; ++a) {
        if (int(raw.transition[a].size()) != dmc.B)
            throw InputError("transition row " + std::to_string(a) + " does not match output alphabet");
        double row_sum = 0.0;
        for (int b = 0; b < dmc.B; ++b) {
            double w = raw.transition[a][b];
            if (w < 0.0 || w > 1.0) throw InputError("transition probability outside [0,1]");
            dmc.transition[size_t(a) * dmc.B + b] = w;
            row_sum += w;
        }
        if (std::fabs(row_sum - 1.0) > 1e-9)
            throw InputError("non-stochastic row " + std::to_string(a) + " (sum " + std::to_string(row_sum) + ")");
    }

    dmc.cost = raw.cost;
    for (double c : dmc.cost)
        if (c < 0.0) throw InputError("negative cost");
    dmc.gamma0 = *std::min_element(dmc.cost.begin(), dmc.cost.end());
    dmc.cmax = *std::max_element(dmc.cost.begin(), dmc.cost.end());
    if (dmc.cmax <= dmc.gamma0)
        throw InputError("all costs equal: cost constraint is vacuous (gamma0 == gamma*)");
    return dmc;
}

std::vector<double> output_distribution(std::span<const double> p, const Dmc& dmc) {
    std::vector<double> q(size_t(dmc.B), 0.0);
    for (int a = 0; a < dmc.J; ++a) {
        if (p[a] == 0.0) continue;
        for (int b = 0; b < dmc.B; ++b) q[b] += p[a] * dmc.w(a, b);
    }
    return q;
}

double mutual_information(std::span<const double> p, const Dmc& dmc) {
    std::vector<double> q = output_distribution(p, dmc);
    double mi = 0.0;
    for (int a = 0; a < dmc.J; ++a) {
        if (p[a] == 0.0) continue;
        for (int b = 0; b < dmc.B; ++b) {
            double w = dmc.w(a, b);
            if (w == 0.0) continue;
            mi += p[a] * w * std::log(w / q[b]);
        }
    }
    return mi;
}

double info_density(const Dmc& dmc, std::span<const double> q, int a, int b) {
    double w = dmc.w(a, b);
    if (w > 0.0 && q[b] <= 0.0) throw NumericError("info density undefined: W(b|a) > 0 with Q(b) = 0");
    if (w == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(w / q[b]);
}

namespace {

// Exhaustive search over all n-types, J small. Walks compositions in
// lexicographically increasing count order so the first optimum found is the
// tie-break winner.
NType quantize_exact(std::span<const double> p, int64_t n, double gamma, const Dmc& dmc) {
    const int J = dmc.J;
    std::vector<int64_t> counts(size_t(J), 0);
    std::vector<int64_t> best;
    double best_dist = std::numeric_limits<double>::infinity();
    std::function<void(int, int64_t)> rec = [&](int a, int64_t left) {
        if (a == J - 1) {
            counts[size_t(a)] = left;
            double c = 0.0, d = 0.0;
            for (int i = 0; i < J; ++i) {
                c += double(counts[size_t(i)]) * dmc.cost[size_t(i)];
                d += std::fabs(double(counts[size_t(i)]) / double(n) - p[size_t(i)]);
            }
            if (c / double(n) <= gamma + 1e-12 && d < best_dist - 1e-15) {
                best_dist = d;
                best = counts;
            }
            return;
        }
        for (int64_t k = 0; k <= left; ++k) {
            counts[size_t(a)] = k;
            rec(a + 1, left - k);
        }
    };
    rec(0, n);
    if (best.empty()) throw InputError("no feasible n-type at this cost cap");
    return NType{n, best};
}

NType quantize_rounding(std::span<const double> p, int64_t n, double gamma, const Dmc& dmc) {
    const int J = dmc.J;
    // largest-remainder rounding
    std::vector<int64_t> counts(size_t(J), 0);
    std::vector<std::pair<double, int>> rem(size_t(J), {0.0, 0});
    int64_t used = 0;
    for (int a = 0; a < J; ++a) {
        double exact = p[a] * double(n);
        counts[size_t(a)] = int64_t(std::floor(exact));
        used += counts[size_t(a)];
        rem[size_t(a)] = {exact - std::floor(exact), a};
    }
    std::sort(rem.begin(), rem.end(), [](auto& x, auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });
    for (int64_t i = 0; i < n - used; ++i) counts[size_t(rem[size_t(i)].second)] += 1;

    auto total_cost = [&]() {
        double c = 0.0;
        for (int a = 0; a < J; ++a) c += double(counts[size_t(a)]) * dmc.cost[size_t(a)];
        return c;
    };
    // cost repair: move mass from the costliest over-allocated symbol to the cheapest
    int cheapest = 0;
    for (int a = 1; a < J; ++a)
        if (dmc.cost[size_t(a)] < dmc.cost[size_t(cheapest)]) cheapest = a;
    int guard = 0;
    while (total_cost() > gamma * double(n) + 1e-9 && guard++ < 4 * n) {
        int worst = -1;
        for (int a = 0; a < J; ++a) {
            if (a == cheapest || counts[size_t(a)] == 0) continue;
            if (worst < 0 || dmc.cost[size_t(a)] > dmc.cost[size_t(worst)]) worst = a;
        }
        if (worst < 0) throw InputError("no feasible n-type at this cost cap");
        counts[size_t(worst)] -= 1;
        counts[size_t(cheapest)] += 1;
    }
    if (total_cost() > gamma * double(n) + 1e-9) throw InputError("no feasible n-type at this cost cap");

    // local l1 improvement: single-unit transfers that stay feasible
    auto dist = [&](const std::vector<int64_t>& c) {
        double d = 0.0;
        for (int a = 0; a < J; ++a) d += std::fabs(double(c[size_t(a)]) / double(n) - p[size_t(a)]);
        return d;
    };
    bool improved = true;
    while (improved) {
        improved = false;
        double d0 = dist(counts);
        for (int from = 0; from < J; ++from) {
            if (counts[size_t(from)] == 0) continue;
            for (int to = 0; to < J; ++to) {
                if (to == from) continue;
                counts[size_t(from)] -= 1;
                counts[size_t(to)] += 1;
                if (total_cost() <= gamma * double(n) + 1e-9 && dist(counts) < d0 - 1e-15) {
                    d0 = dist(counts);
                    improved = true;
                } else {
                    counts[size_t(from)] += 1;
                    counts[size_t(to)] -= 1;
                }
            }
        }
    }
    // deterministic tie-break pass: among single transfers with equal distance keep lexicographically smaller
    bool tie_moved = true;
    while (tie_moved) {
        tie_moved = false;
        double d0 = dist(counts);
        for (int from = 0; from < J && !tie_moved; ++from) {
            if (counts[size_t(from)] == 0) continue;
            for (int to = 0; to < J && !tie_moved; ++to) {
                if (to == from) continue;
                std::vector<int64_t> cand = counts;
                cand[size_t(from)] -= 1;
                cand[size_t(to)] += 1;
                double c = 0.0;
                for (int a = 0; a < J; ++a) c += double(cand[size_t(a)]) * dmc.cost[size_t(a)];
                if (c <= gamma * double(n) + 1e-9 && std::fabs(dist(cand) - d0) <= 1e-15 && cand < counts) {
                    counts = cand;
                    tie_moved = true;
                }
            }
        }
    }
    return NType{n, counts};
}

}  // namespace

NType quantize_to_type(std::span<const double> p, int64_t n, double gamma, const Dmc& dmc) {
    if (gamma < dmc.gamma0 - 1e-15) throw InputError("no feasible n-type: gamma below the minimum cost");
    if (dmc.J <= 3 && n <= 64) return quantize_exact(p, n, gamma, dmc);
    return quantize_rounding(p, n, gamma, dmc);
}

std::vector<int> sample_constant_composition(const NType& t, RngStream& rng) {
    std::vector<int> x;
    x.reserve(size_t(t.n));
    for (size_t a = 0; a < t.counts.size(); ++a)
        for (int64_t i = 0; i < t.counts[a]; ++i) x.push_back(int(a));
    for (size_t i = x.size(); i > 1; --i) {
        size_t j = size_t(rng.next_below(uint64_t(i)));
        std::swap(x[i - 1], x[j]);
    }
    return x;
}

}  // namespace ccv
