#include "ccv/bounds.hpp"

#include <cmath>

#include "ccv/math.hpp"
#include "ccv/parallel.hpp"

namespace ccv {

std::vector<CurvePoint> emit_curve(const CapacityCostSolution& sol, const DispersionInfo& disp, double v, double r_min,
                                   double r_max, double step, const QuadSpec& quad, const KOptions& opts) {
    if (!(disp.v_gamma > 0.0)) throw InputError("emit_curve needs V(Gamma) > 0");
    if (!(step > 0.0) || !(r_max >= r_min)) throw InputError("bad r range");
    const int64_t count = int64_t(std::floor((r_max - r_min) / step + 1e-9)) + 1;
    std::vector<CurvePoint> pts(size_t(count), CurvePoint{});
    const double sv = std::sqrt(disp.v_gamma);
    const double mults[] = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};

    struct Nothing {
        void merge(const Nothing&) {}
    };
    block_reduce<Nothing>(count, opts.threads, 1, [&](int64_t i, Nothing&) {
        double r = r_min + double(i) * step;
        CurvePoint p;
        p.r = r;
        p.baseline_as = norm_cdf(r / sv);
        p.floor_gv = error_floor(r, sol, disp, v, opts);
        if (v == 0.0) {
            p.feedback_l2 = p.floor_gv;
        } else {
            double best = p.floor_gv;  // beta -> infinity recovers K from below or equal
            for (double m : mults) {
                L2Result l2 = l2_bound(r, m * sv, disp, v, sol, quad, opts);
                best = std::min(best, l2.value);
            }
            p.feedback_l2 = best;
        }
        pts[size_t(i)] = p;
    });
    return pts;
}

}  // namespace ccv
