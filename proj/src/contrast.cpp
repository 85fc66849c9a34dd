#include "nvpd/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include "nvpd/errors.hpp"

namespace nvpd {

namespace {

// Charge split used for the initial state: the pulse's own steady state, or
// all NV- when charge conversion is switched off entirely.
double readout_p_nv0(const NVParams& p) {
    if (p.gamma_ion > 0 || p.gamma_rec > 0) {
        StateVector ss = steady_state(build_rate_matrix(p));
        return ss[kEsNv0] + ss[kGsNv0];
    }
    return 0.0;
}

// Contrast reports for a list of ascending window ends, sharing one pair of
// propagated integrals.
std::vector<ContrastReport> contrast_over_windows(
    const NVParams& p, std::span<const double> ends,
    double collection_factor, double p_nv0) {
    RateMatrix rm = build_rate_matrix(p);
    auto w = pl_weights(p);
    StateVector init0 = build_initial_state(SpinInit::ms0, 1.0 - p_nv0, p_nv0);
    StateVector init1 = build_initial_state(SpinInit::ms1, 1.0 - p_nv0, p_nv0);
    auto a0 = pl_integrals(rm, w, init0, ends);
    auto a1 = pl_integrals(rm, w, init1, ends);
    std::vector<ContrastReport> out(ends.size());
    for (std::size_t i = 0; i < ends.size(); ++i) {
        ContrastReport& r = out[i];
        r.alpha_0 = a0[i];
        r.alpha_1 = a1[i];
        r.window = {0.0, ends[i]};
        r.p_nv0 = p_nv0;
        if (!(r.alpha_0 > 0))
            throw NormalizationError("alpha_0 is zero: no photons in the readout window");
        r.c_esr = (r.alpha_0 - r.alpha_1) / r.alpha_0;
        double n0 = collection_factor * r.alpha_0;
        double n1 = collection_factor * r.alpha_1;
        r.snr = (n0 - n1) / std::sqrt(n0 + n1);
    }
    return out;
}

}  // namespace

ContrastReport compute_contrast(const NVParams& p, ReadoutWindow window,
                                double collection_factor) {
    p.validate();
    if (!(window.end_ns > window.start_ns) || window.start_ns != 0)
        throw InvalidParams("readout window must start at 0 and have positive length");
    double end = window.end_ns;
    return contrast_over_windows(p, std::span<const double>(&end, 1),
                                 collection_factor, readout_p_nv0(p))[0];
}

ContrastReport optimize_window(const NVParams& p,
                               std::span<const double> end_grid_ns,
                               double collection_factor) {
    p.validate();
    if (end_grid_ns.empty())
        throw InvalidParams("window grid is empty");
    auto reports = contrast_over_windows(p, end_grid_ns, collection_factor,
                                         readout_p_nv0(p));
    std::size_t best = 0;
    for (std::size_t i = 1; i < reports.size(); ++i)
        if (reports[i].c_esr > reports[best].c_esr) best = i;  // ties keep shortest
    return reports[best];
}

std::vector<double> default_window_grid() { return log_grid(50.0, 5000.0, 50); }

std::vector<double> log_grid(double lo, double hi, int n) {
    if (!(lo > 0) || !(hi > lo) || n < 1)
        throw InvalidParams("log grid needs 0 < lo < hi and n >= 1");
    std::vector<double> g(n);
    if (n == 1) {
        g[0] = lo;
        return g;
    }
    double llo = std::log10(lo), lhi = std::log10(hi);
    for (int i = 0; i < n; ++i)
        g[i] = std::pow(10.0, llo + (lhi - llo) * i / (n - 1));
    return g;
}

SweepResult sweep_grid(const NVParams& base, std::span<const double> ion_grid,
                       std::span<const double> rec_grid,
                       std::span<const double> window_grid, int threads) {
    base.validate();
    for (auto grid : {ion_grid, rec_grid})
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (!(grid[i] > 0) || (i > 0 && grid[i] <= grid[i - 1]))
                throw InvalidParams("sweep grids must be positive and ascending");

    SweepResult out;
    out.ion_grid.assign(ion_grid.begin(), ion_grid.end());
    out.rec_grid.assign(rec_grid.begin(), rec_grid.end());
    out.cells.resize(ion_grid.size() * rec_grid.size());

    auto run_row = [&](std::size_t i) {
        NVParams p = base;
        p.gamma_ion = ion_grid[i];
        for (std::size_t j = 0; j < rec_grid.size(); ++j) {
            p.gamma_rec = rec_grid[j];
            ContrastReport r = optimize_window(p, window_grid);
            out.cells[i * rec_grid.size() + j] = {p.gamma_ion, p.gamma_rec,
                                                  r.c_esr,     r.snr,
                                                  r.p_nv0,     r.window.end_ns};
        }
    };

    int n_threads = std::max(1, threads);
    if (n_threads == 1) {
        for (std::size_t i = 0; i < ion_grid.size(); ++i) run_row(i);
    } else {
        std::vector<std::thread> pool;
        std::size_t stride = static_cast<std::size_t>(n_threads);
        for (std::size_t t = 0; t < stride; ++t)
            pool.emplace_back([&, t]() {
                for (std::size_t i = t; i < ion_grid.size(); i += stride) run_row(i);
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

Decomposition decompose(const NVParams& base, const SweepResult& grid,
                        std::span<const double> window_grid, double pnv0_band) {
    Decomposition d;
    d.c_esr_actual = optimize_window(base, window_grid).c_esr;
    double base_pnv0 = readout_p_nv0(base);

    NVParams nc = base;
    nc.gamma_ion = 0;
    nc.gamma_rec = 0;
    d.c_esr_no_charge = optimize_window(nc, window_grid).c_esr;

    bool found = false;
    double best = -1;
    for (const auto& c : grid.cells) {
        if (std::abs(c.p_nv0 - base_pnv0) <= pnv0_band) {
            found = true;
            best = std::max(best, c.c_esr);
        }
    }
    if (base.gamma_ion == 0 && base.gamma_rec == 0) {
        // Degenerate base: the no-charge point is its own best reference.
        best = std::max(best, d.c_esr_no_charge);
        found = true;
    }
    if (!found)
        throw InvalidParams("sweep grid has no cells within the P_NV0 band of the base point");
    // The base point itself belongs to the band.
    best = std::max(best, d.c_esr_actual);
    d.c_esr_best_at_same_pnv0 = best;
    d.delta_static = d.c_esr_no_charge - best;
    d.delta_dynamic = best - d.c_esr_actual;
    return d;
}

ContrastScatter contrast_vs_pnv0(const SweepResult& grid, double bin_width) {
    if (grid.cells.empty())
        throw InvalidParams("empty sweep grid");
    if (!(bin_width > 0))
        throw InvalidParams("bin width must be positive");
    ContrastScatter out;
    out.points.reserve(grid.cells.size());
    std::map<long, ScatterPoint> bins;
    for (const auto& c : grid.cells) {
        out.points.push_back({c.p_nv0, c.c_esr});
        long b = static_cast<long>(std::floor(c.p_nv0 / bin_width));
        auto it = bins.find(b);
        if (it == bins.end() || c.c_esr > it->second.c_esr)
            bins[b] = {(b + 0.5) * bin_width, c.c_esr};
    }
    for (const auto& [b, pt] : bins) out.envelope.push_back(pt);
    return out;
}

}  // namespace nvpd
