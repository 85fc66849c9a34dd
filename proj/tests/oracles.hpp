#pragma once

// Test-only reference implementations, kept independent of the library's
// propagation and assembly paths.

#include <random>

#include "nvpd/params.hpp"
#include "nvpd/rate_model.hpp"

namespace nvpd::testing {

// Hand-coded assembly of the seven scalar rate equations, evaluated as the
// derivative of a state. Independent of build_rate_matrix.
inline StateVector scalar_ode_rhs(const NVParams& p, const StateVector& r) {
    StateVector d;
    d[kEs1] = -(p.gamma_es + p.gamma_es1_to_a1 + p.gamma_ion) * r[kEs1] +
              p.gamma_532 * r[kGs1];
    d[kEs0] = -(p.gamma_es + p.gamma_es0_to_a1 + p.gamma_ion) * r[kEs0] +
              p.gamma_532 * r[kGs0];
    d[kA1] = p.gamma_es1_to_a1 * r[kEs1] + p.gamma_es0_to_a1 * r[kEs0] -
             p.gamma_a1 * r[kA1];
    d[kGs1] = p.gamma_es * r[kEs1] + p.p_a1_to_gs1 * p.gamma_a1 * r[kA1] -
              p.gamma_532 * r[kGs1] + (2.0 * p.gamma_rec / 3.0) * r[kEsNv0];
    d[kGs0] = p.gamma_es * r[kEs0] +
              (1.0 - p.p_a1_to_gs1) * p.gamma_a1 * r[kA1] -
              p.gamma_532 * r[kGs0] + (p.gamma_rec / 3.0) * r[kEsNv0];
    d[kEsNv0] = -(p.gamma_rec + p.gamma_es_nv0) * r[kEsNv0] +
                p.gamma_532_nv0 * r[kGsNv0];
    d[kGsNv0] = p.gamma_ion * r[kEs1] + p.gamma_ion * r[kEs0] +
                p.gamma_es_nv0 * r[kEsNv0] - p.gamma_532_nv0 * r[kGsNv0];
    return d;
}

// Explicit fixed-step RK4 on the scalar equations. Step is chosen from the
// stiffest rate; times in ns, rates in MHz (factor 1e-3).
inline StateVector rk4_evolve(const NVParams& p, StateVector r, double t_ns,
                              double step_factor = 0.001) {
    double max_rate = 0;
    for (double g : {p.gamma_532, p.gamma_es + p.gamma_es1_to_a1 + p.gamma_ion,
                     p.gamma_es + p.gamma_es0_to_a1 + p.gamma_ion, p.gamma_a1,
                     p.gamma_rec + p.gamma_es_nv0, p.gamma_532_nv0})
        max_rate = std::max(max_rate, g);
    double h = max_rate > 0 ? step_factor / (max_rate * 1e-3) : t_ns;
    auto n = static_cast<long>(t_ns / h) + 1;
    h = t_ns / static_cast<double>(n);
    double hc = h * 1e-3;  // ns * MHz
    auto rhs = [&](const StateVector& x) { return scalar_ode_rhs(p, x); };
    for (long i = 0; i < n; ++i) {
        StateVector k1 = rhs(r);
        StateVector k2 = rhs(r + 0.5 * hc * k1);
        StateVector k3 = rhs(r + 0.5 * hc * k2);
        StateVector k4 = rhs(r + hc * k3);
        r = r + (hc / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return r;
}

// Random valid parameter draw in Table-S2-like magnitudes.
inline NVParams random_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    NVParams p;
    p.gamma_532 = 5.0 + 30.0 * u(rng);
    p.gamma_es = 30.0 + 50.0 * u(rng);
    p.gamma_es1_to_a1 = 80.0 * u(rng);
    p.gamma_es0_to_a1 = 30.0 * u(rng);
    p.gamma_a1 = 5.0 + 20.0 * u(rng);
    p.p_a1_to_gs1 = u(rng);
    p.gamma_ion = 30.0 * u(rng);
    p.gamma_rec = 50.0 * u(rng);
    p.gamma_es_nv0 = 10.0 + 30.0 * u(rng);
    p.gamma_532_nv0 = p.gamma_532 / 3.0;
    return p;
}

inline StateVector random_state(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    StateVector v;
    for (int i = 0; i < 7; ++i) v[i] = u(rng);
    return v / v.sum();
}

// Table S2 rows used throughout the tests.
inline NVParams nv17_params() {
    return params_from_lifetimes(75.0, 12.0, 8.0, 104.0, 24.2, 0.25, 4.2, 45.2,
                                 16.0, kTiedNv0Pump);
}

inline NVParams nv91_params() {
    return params_from_lifetimes(70.0, 11.0, 8.0, 124.0, 22.4, 0.25, 20.7, 16.9,
                                 32.0, kTiedNv0Pump);
}

}  // namespace nvpd::testing
