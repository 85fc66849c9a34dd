#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "nvpd/errors.hpp"

namespace nvpd {

// Two-level charge model, rates in s^-1, times in s.
struct ChargeState {
    double rho_minus = 1.0;
    double rho_zero = 0.0;

    void validate() const;
};

struct ChargeRates {
    double r_ion = 0;  // s^-1
    double r_rec = 0;  // s^-1

    void validate() const;
};

// Reduced 4-level model (1 = GS_NV-, 2 = ES_NV-, 3 = GS_NV0, 4 = ES_NV0),
// rates in MHz.
struct FourLevelParams {
    double g12 = 0, g21 = 0, g23 = 0, g34 = 0, g43 = 0, g41 = 0;

    void validate() const;
};

// Analytic relaxation toward rho_-^inf = r_rec / r_tot at rate r_tot.
ChargeState evolve_charge(const ChargeRates& rates, const ChargeState& init,
                          double t_s);

inline double total_rate(const ChargeRates& r) { return r.r_ion + r.r_rec; }

// Invert the equilibrium: r_rec = r_tot * rho_-^inf, r_ion the remainder.
ChargeRates split_rates(double r_tot, double rho_minus_equilibrium);

struct ExponentialFit {
    double amplitude = 0;
    double rate = 0;  // s^-1, >= 0
    double offset = 0;
    double residual = 0;  // 2-norm of the residual vector
};

// Least-squares fit of A exp(-r t) + C via variable projection: the amplitude
// and offset are solved linearly for each candidate rate, the rate by a log
// scan plus golden-section refinement.
ExponentialFit fit_exponential_decay(
    std::span<const std::pair<double, double>> samples);

struct PowerLawFit {
    double a = 0;  // quadratic coefficient, >= 0
    double b = 0;  // linear coefficient, >= 0
    double residual = 0;
};

// Nonnegative linear least squares of r = a p^2 + b p (zero intercept).
PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points);

struct ReducedRates {
    ChargeRates rates;    // s^-1
    bool valid = false;   // timescale separation holds
};

// Effective charge conversion rates of the 4-level model:
//   r_ion = g23 g12 / (g12 + g21),  r_rec = g41 g34 / (g43 + g34),
// converted from MHz to s^-1. The validity flag requires
// max(g23, g41) < 0.01 * min(g12 + g21, g34 + g43).
ReducedRates reduce_four_level(const FourLevelParams& p);

// Full 4-level generator (MHz), used to cross-check the reduction against the
// slow eigenvalue.
Eigen::Matrix4d four_level_matrix(const FourLevelParams& p);

}  // namespace nvpd
