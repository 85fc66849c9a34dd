#pragma once

#include <span>
#include <vector>

#include "nvpd/params.hpp"
#include "nvpd/rate_model.hpp"

namespace nvpd {

// Photon integration window of the readout pulse; the start is pinned to the
// pulse onset (t = 0).
struct ReadoutWindow {
    double start_ns = 0;
    double end_ns = 0;
};

struct ContrastReport {
    double alpha_0 = 0;  // windowed PL integral, ms0 initialization
    double alpha_1 = 0;  // windowed PL integral, ms1 initialization
    double c_esr = 0;    // (alpha_0 - alpha_1) / alpha_0
    double snr = 0;      // shot-noise SNR scaled by the collection factor
    double p_nv0 = 0;    // steady-state NV0 population
    ReadoutWindow window;
};

// OD-ESR contrast at a fixed readout window. The initial states are the
// ground-state vectors with the steady-state charge split of the pulse.
// `collection_factor` converts PL integrals to detected photons for the SNR.
ContrastReport compute_contrast(const NVParams& params, ReadoutWindow window,
                                double collection_factor = 1.0);

// Contrast maximized over a grid of window end times (ties -> shortest).
ContrastReport optimize_window(const NVParams& params,
                               std::span<const double> end_grid_ns,
                               double collection_factor = 1.0);

// 50 log-spaced window ends, 50 ns .. 5 us.
std::vector<double> default_window_grid();

// Log-spaced grid helper for sweeps.
std::vector<double> log_grid(double lo, double hi, int n);

struct SweepCell {
    double gamma_ion = 0;
    double gamma_rec = 0;
    double c_esr = 0;
    double snr = 0;
    double p_nv0 = 0;
    double window_end_ns = 0;
};

// Row-major over (ion_grid x rec_grid): cells[i * rec_grid.size() + j].
struct SweepResult {
    std::vector<double> ion_grid;
    std::vector<double> rec_grid;
    std::vector<SweepCell> cells;

    const SweepCell& at(std::size_t i, std::size_t j) const {
        return cells[i * rec_grid.size() + j];
    }
};

// Window-optimized contrast, SNR and steady-state NV0 population on a
// (gamma_ion, gamma_rec) grid around a base parameter set.
SweepResult sweep_grid(const NVParams& base, std::span<const double> ion_grid,
                       std::span<const double> rec_grid,
                       std::span<const double> window_grid, int threads = 1);

struct Decomposition {
    double c_esr_actual = 0;
    double c_esr_no_charge = 0;           // gamma_ion = gamma_rec = 0
    double c_esr_best_at_same_pnv0 = 0;   // grid max within the P_NV0 band
    double delta_static = 0;              // no_charge - best_at_same_pnv0
    double delta_dynamic = 0;             // best_at_same_pnv0 - actual
};

// Split the contrast loss into the part explained by the finite NV0
// population and the part due to the conversion rates themselves.
Decomposition decompose(const NVParams& base, const SweepResult& grid,
                        std::span<const double> window_grid,
                        double pnv0_band = 0.01);

struct ScatterPoint {
    double p_nv0 = 0;
    double c_esr = 0;
};

struct ContrastScatter {
    std::vector<ScatterPoint> points;    // every grid cell
    std::vector<ScatterPoint> envelope;  // per-bin maximum, ascending P_NV0
};

// Scatter of (P_NV0, C_ESR) over a sweep plus the binned upper envelope.
ContrastScatter contrast_vs_pnv0(const SweepResult& grid,
                                 double bin_width = 0.01);

}  // namespace nvpd
