#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "nvpd/trace.hpp"

namespace nvpd {

struct Bounds {
    double lo = 0;
    double hi = 0;
};

// Configuration of the simultaneous multi-power fit.
struct FitConfig {
    std::vector<double> power_list;      // uW, typically 8 entries
    int smoothing_block = 100;
    double t0_threshold = 0.5;           // fraction of the tail level
    double tail_fraction = 0.2;          // window used for tail mean / normalization

    // Free-parameter bounds; gamma_es carries the 75 MHz cap and the quadratic
    // power coefficients their sign constraints.
    std::map<std::string, Bounds> bounds = default_bounds();

    std::vector<double> multistart_beta_ion = default_multistart();

    int max_evaluations = 40000;         // per simplex start
    double xtol = 1e-10;
    double ftol = 1e-14;
    int restarts = 4;                    // simplex re-initializations per start
    bool polish = true;                  // finite-difference Levenberg-Marquardt
    int threads = 1;

    // Extra full starting points (e.g. a no-charge solution) appended to the
    // beta_ion multistart grid.
    std::vector<std::array<double, 11>> extra_starts;

    static std::map<std::string, Bounds> default_bounds();
    static std::vector<double> default_multistart();
    void validate() const;
};

// The 11 free parameters of the full model, in fixed order.
struct FreeParams {
    double beta_532 = 0;
    double beta_ion = 0;
    double beta_ion2 = 0;
    double beta_rec = 0;
    double beta_rec2 = 0;
    double gamma_es = 0;
    double gamma_es_nv0 = 0;
    double gamma_es1_to_a1 = 0;
    double gamma_es0_to_a1 = 0;
    double gamma_a1 = 0;
    double p_a1_to_gs1 = 0;

    static const std::array<std::string, 11>& names();
    std::array<double, 11> to_array() const;
    static FreeParams from_array(const std::array<double, 11>& a);
    PowerScaling scaling() const;
    Intrinsics intrinsics() const;
};

struct PerPowerDerived {
    double power_uw = 0;
    double gamma_532 = 0;
    double gamma_ion = 0;
    double gamma_rec = 0;
    double p_nv0 = 0;
    double c_esr = 0;  // window-optimized on the default grid
};

struct FitResult {
    FreeParams params;
    double cost = 0;                          // sum of norm-squared residuals
    std::vector<double> per_curve_residuals;  // one per trace, same order as input
    std::vector<std::string> active_constraints;
    std::vector<double> start_costs;          // best cost per multistart entry
    std::vector<PerPowerDerived> derived;
    bool converged = false;
    bool no_charge_model = false;
};

// Simultaneous fit of 16 preprocessed traces (8 powers x 2 spin inits) to the
// seven-level model with power-scaled photo-induced rates. Multistart over
// beta_ion guesses; the minimum-cost local optimum is returned (ties broken by
// the lowest beta_ion guess).
FitResult fit_global(std::span<const PLTrace> traces, const FitConfig& cfg);

// Same machinery with gamma_ion = gamma_rec = 0 frozen and the NV0 manifold
// inert (6 free parameters).
FitResult fit_no_charge(std::span<const PLTrace> traces, const FitConfig& cfg);

// Total cost of a parameter point on a trace set (exposed for diagnostics and
// tests). Infinite when the parameters are invalid at one of the powers.
double fit_cost(const FreeParams& p, std::span<const PLTrace> traces,
                const FitConfig& cfg, bool no_charge,
                std::vector<double>* per_curve = nullptr);

}  // namespace nvpd
