#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "nvpd/params.hpp"

namespace nvpd {

// State ordering of the seven-level model.
enum Level : int {
    kEs1 = 0,    // NV- excited, m_s = +-1
    kEs0 = 1,    // NV- excited, m_s = 0
    kA1 = 2,     // singlet
    kGs1 = 3,    // NV- ground, m_s = +-1
    kGs0 = 4,    // NV- ground, m_s = 0
    kEsNv0 = 5,  // NV0 excited
    kGsNv0 = 6,  // NV0 ground
};

using StateVector = Eigen::Matrix<double, 7, 1>;
using Matrix7 = Eigen::Matrix<double, 7, 7>;

enum class SpinInit { ms0, ms1 };

// Generator of d rho/dt = m * rho, entries in MHz. Columns sum to zero.
struct RateMatrix {
    Matrix7 m = Matrix7::Zero();

    // Checks the generator structure (column sums ~0, signs, finiteness).
    void validate() const;
};

// Assemble the seven-level generator. Recombination splits 2/3 into GS1
// (which aggregates m_s = +-1) and 1/3 into GS0.
RateMatrix build_rate_matrix(const NVParams& params);

// Null vector of the generator, sign-fixed and normalized to sum 1.
// Throws AmbiguousSteadyState when the null space has dimension > 1
// (decoupled manifolds with no conversion rates between them).
StateVector steady_state(const RateMatrix& rm);

// Steady state restricted to the five NV- levels (NV0 entries zero).
// Used by the charge-disabled model where the NV0 manifold is inert.
StateVector steady_state_nv_minus(const NVParams& params);

// Steady state resolved against an initial charge split: for a connected
// generator this is steady_state(); when gamma_ion = gamma_rec = 0 the two
// manifolds equilibrate separately and keep their initial weights.
StateVector steady_state_for(const NVParams& params, double p_nv_minus,
                             double p_nv0);

// rho(t) = exp(R t) rho(0) for each requested time (ns, ascending, >= 0).
std::vector<StateVector> evolve(const RateMatrix& rm, const StateVector& init,
                                std::span<const double> times_ns);

// Ground-state initial vector: NV- weight in GS0 (ms0) or GS1 (ms1), NV0
// weight in GS_NV0. Weights must sum to 1.
StateVector build_initial_state(SpinInit spin_init, double p_nv_minus,
                                double p_nv0);

// PL weight vector: PL = gamma_es (rho_ES1 + rho_ES0) + gamma_es_nv0 rho_ES_NV0.
Eigen::Matrix<double, 7, 1> pl_weights(const NVParams& params);

// Instantaneous raw PL of a state.
double pl_value(const NVParams& params, const StateVector& state);

// Steady-state raw PL given an initial charge split (normalization anchor).
// Throws NormalizationError when it is zero or the steady state is ambiguous.
double steady_pl(const NVParams& params, double p_nv_minus, double p_nv0);

struct ModelTrace {
    std::vector<double> times_ns;
    std::vector<double> values;  // normalized so steady-state PL = 1
    std::vector<double> raw;     // unnormalized PL
};

// Time-resolved PL from an initial state, normalized to the steady-state PL
// of the charge split implied by `init`.
ModelTrace pl_trace(const NVParams& params, const StateVector& init,
                    std::span<const double> times_ns);

// Windowed PL integrals int_0^T PL(t) dt for a list of ascending window ends,
// computed exactly via an augmented propagator. Raw (unnormalized) units.
std::vector<double> pl_integrals(const RateMatrix& rm,
                                 const Eigen::Matrix<double, 7, 1>& weights,
                                 const StateVector& init,
                                 std::span<const double> window_ends_ns);

}  // namespace nvpd
