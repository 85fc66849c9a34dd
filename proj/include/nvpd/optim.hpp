#pragma once

#include <functional>
#include <vector>

namespace nvpd {

struct NelderMeadOptions {
    int max_evaluations = 20000;
    double xtol = 1e-10;
    double ftol = 1e-14;
    double initial_step_rel = 0.15;  // fraction of the bound range
    int restarts = 3;
};

struct NelderMeadResult {
    std::vector<double> x;
    double fmin = 0;
    int evaluations = 0;
    bool converged = false;
};

// Bound-constrained Nelder-Mead: trial points are clipped to [lo, hi]
// componentwise. Deterministic for fixed inputs.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0,
                             const std::vector<double>& lo,
                             const std::vector<double>& hi,
                             const NelderMeadOptions& opts);

struct LevenbergMarquardtOptions {
    int max_iterations = 60;
    double ftol = 1e-15;
    double step_rel = 1e-6;  // forward-difference step, relative to bound range
};

// Projected Levenberg-Marquardt on a residual vector with a forward-difference
// Jacobian. Steps are clipped to the bounds; used to polish a simplex optimum.
NelderMeadResult levenberg_marquardt(
    const std::function<std::vector<double>(const std::vector<double>&)>& residuals,
    std::vector<double> x0, const std::vector<double>& lo,
    const std::vector<double>& hi, const LevenbergMarquardtOptions& opts);

}  // namespace nvpd
