#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccv/rng.hpp"

namespace ccv {

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Discrete memoryless channel with a per-input-symbol cost. Row-major
// transition matrix, W(b|a) = transition[a*B + b]. Immutable after
// validate_channel.
struct Dmc {
    std::vector<std::string> input_symbols;
    std::vector<std::string> output_symbols;
    std::vector<double> transition;
    std::vector<double> cost;
    int J = 0;
    int B = 0;
    double gamma0 = 0.0;
    double cmax = 0.0;

    double w(int a, int b) const { return transition[size_t(a) * B + b]; }
    double cost_of(std::span<const double> p) const {
        double s = 0.0;
        for (int a = 0; a < J; ++a) s += p[a] * cost[a];
        return s;
    }
};

struct NType {
    int64_t n = 0;
    std::vector<int64_t> counts;

    std::vector<double> distribution() const {
        std::vector<double> t(counts.size());
        for (size_t a = 0; a < counts.size(); ++a) t[a] = double(counts[a]) / double(n);
        return t;
    }
    double cost_of(const Dmc& dmc) const {
        double s = 0.0;
        for (size_t a = 0; a < counts.size(); ++a) s += double(counts[a]) * dmc.cost[a];
        return s / double(n);
    }
    bool operator==(const NType& o) const { return n == o.n && counts == o.counts; }
};

struct RawChannelSpec {
    std::vector<std::string> input_symbols;
    std::vector<std::string> output_symbols;
    std::vector<std::vector<double>> transition;
    std::vector<double> cost;
};

Dmc validate_channel(const RawChannelSpec& raw);

double mutual_information(std::span<const double> p, const Dmc& dmc);

std::vector<double> output_distribution(std::span<const double> p, const Dmc& dmc);

double info_density(const Dmc& dmc, std::span<const double> q, int a, int b);

NType quantize_to_type(std::span<const double> p, int64_t n, double gamma, const Dmc& dmc);

std::vector<int> sample_constant_composition(const NType& t, RngStream& rng);

double l1_distance(std::span<const double> a, std::span<const double> b);

}  // namespace ccv
