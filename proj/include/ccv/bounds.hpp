#pragma once

#include <vector>

#include "ccv/kfunction.hpp"

namespace ccv {

struct CurvePoint {
    double r = 0.0;
    double floor_gv = 0.0;     // K(r/sqrt(V), C'^2 v / V)
    double baseline_as = 0.0;  // Phi(r/sqrt(V))
    double feedback_l2 = 0.0;  // min over the beta grid of L2(r, beta)
};

std::vector<CurvePoint> emit_curve(const CapacityCostSolution& sol, const DispersionInfo& disp, double v, double r_min,
                                   double r_max, double step, const QuadSpec& quad = {}, const KOptions& opts = {});

}  // namespace ccv
