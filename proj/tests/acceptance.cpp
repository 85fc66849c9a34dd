// Acceptance gate: one pass/fail line per criterion, asserted via doctest so
// the suite goes red when a criterion fails.

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <thread>
#include <vector>

#include "nvpd/charge_kinetics.hpp"
#include "nvpd/contrast.hpp"
#include "nvpd/global_fit.hpp"
#include "nvpd/trace.hpp"
#include "oracles.hpp"

using namespace nvpd;

namespace {

int hw_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 2 : static_cast<int>(n);
}

bool report(int criterion, const char* what, bool ok) {
    std::printf("[criterion %d] %s  %s\n", criterion, ok ? "PASS" : "FAIL", what);
    std::fflush(stdout);
    return ok;
}

bool within(double value, double target, double tol) {
    return std::abs(value - target) <= tol;
}

FreeParams bundle_truth() {
    FreeParams t;
    t.beta_532 = 0.08;
    t.beta_ion = 0.02;
    t.beta_ion2 = -1e-5;
    t.beta_rec = 0.06;
    t.beta_rec2 = 5e-5;
    t.gamma_es = 70.0;
    t.gamma_es_nv0 = 30.0;
    t.gamma_es1_to_a1 = 55.0;
    t.gamma_es0_to_a1 = 10.0;
    t.gamma_a1 = 9.0;
    t.p_a1_to_gs1 = 0.3;
    return t;
}

FitConfig bundle_config() {
    FitConfig cfg;
    cfg.power_list = {50, 100, 150, 200, 250, 300, 350, 400};
    cfg.threads = hw_threads();
    return cfg;
}

// 8 powers x 2 spin inits = 16 curves.
std::vector<PLTrace> make_bundle(const FreeParams& truth, const FitConfig& cfg,
                                 bool noiseless, std::uint64_t seed,
                                 double photon_scale) {
    std::vector<PLTrace> out;
    std::uint64_t stream = 0;
    for (double p : cfg.power_list) {
        for (SpinInit init : {SpinInit::ms0, SpinInit::ms1}) {
            SynthesisSpec spec;
            spec.power_uw = p;
            spec.spin_init = init;
            spec.duration_ns = 2000;
            spec.noiseless = noiseless;
            spec.photon_scale = photon_scale;
            spec.seed = seed * 1000003ull + stream++;
            out.push_back(
                preprocess(synthesize(truth.scaling(), truth.intrinsics(), spec), cfg));
        }
    }
    return out;
}

bool params_close(const FreeParams& a, const FreeParams& b, double rel) {
    auto xa = a.to_array(), xb = b.to_array();
    for (std::size_t i = 0; i < xa.size(); ++i) {
        double scale = std::abs(xb[i]);
        if (std::abs(xa[i] - xb[i]) > rel * scale) {
            std::printf("    parameter %s: fitted %.8g vs truth %.8g\n",
                        FreeParams::names()[i].c_str(), xa[i], xb[i]);
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("criterion 1: steady-state charge fraction of the sample-F center") {
    NVParams p = testing::nv91_params();
    StateVector ss = steady_state(build_rate_matrix(p));
    double p_nv0 = ss[kEsNv0] + ss[kGsNv0];
    std::printf("    P_NV0 = %.4f (target 0.49 +- 0.05)\n", p_nv0);
    CHECK(report(1, "steady-state P_NV0 = 0.49 +- 0.05", within(p_nv0, 0.49, 0.05)));
}

TEST_CASE("criterion 2: window-optimized contrast of both reference centers") {
    auto grid = default_window_grid();
    double c17 = optimize_window(testing::nv17_params(), grid).c_esr;
    double c91 = optimize_window(testing::nv91_params(), grid).c_esr;
    std::printf("    C_ESR(17) = %.4f (target 0.38 +- 0.04), C_ESR(91) = %.4f "
                "(target 0.16 +- 0.03)\n",
                c17, c91);
    CHECK(report(2, "optimized C_ESR matches both table rows",
                 within(c17, 0.38, 0.04) && within(c91, 0.16, 0.03)));
}

TEST_CASE("criterion 3: static/dynamic contrast decomposition") {
    auto ion = log_grid(1e-3, 1e2, 40);
    auto rec = log_grid(1e-3, 1e2, 40);
    auto windows = default_window_grid();

    bool ok = true;
    {
        NVParams base = testing::nv91_params();
        SweepResult grid = sweep_grid(base, ion, rec, windows, hw_threads());
        Decomposition d = decompose(base, grid, windows);
        std::printf("    sample F: no-charge %.4f (0.317 +- 0.03), static %.4f "
                    "(0.100 +- 0.02), dynamic %.4f (0.042 +- 0.02)\n",
                    d.c_esr_no_charge, d.delta_static, d.delta_dynamic);
        ok &= within(d.c_esr_no_charge, 0.317, 0.03);
        ok &= within(d.delta_static, 0.100, 0.02);
        ok &= within(d.delta_dynamic, 0.042, 0.02);
    }
    {
        NVParams base = testing::nv17_params();
        SweepResult grid = sweep_grid(base, ion, rec, windows, hw_threads());
        Decomposition d = decompose(base, grid, windows);
        std::printf("    sample A: no-charge %.4f (0.453 +- 0.02), static %.4f "
                    "(0.018 +- 0.01), dynamic %.4f (0.015 +- 0.01)\n",
                    d.c_esr_no_charge, d.delta_static, d.delta_dynamic);
        ok &= within(d.c_esr_no_charge, 0.453, 0.02);
        ok &= within(d.delta_static, 0.018, 0.01);
        ok &= within(d.delta_dynamic, 0.015, 0.01);
    }
    CHECK(report(3, "decomposition matches both reference points", ok));
}

TEST_CASE("criterion 4: quadratic and linear power-law regimes") {
    auto slope = [](double pump_scale, double emission) {
        auto r_tot_at = [&](double p) {
            FourLevelParams fl;
            fl.g12 = pump_scale * p;
            fl.g34 = pump_scale * p;
            fl.g21 = emission;
            fl.g43 = emission;
            fl.g23 = 0.01 * p;
            fl.g41 = 0.01 * p;
            return total_rate(reduce_four_level(fl).rates);
        };
        return std::log(r_tot_at(10.0) / r_tot_at(1.0)) / std::log(10.0);
    };
    double sub = slope(0.05, 70.0);     // far below saturation
    double sat = slope(5000.0, 1.0);    // far above saturation
    std::printf("    sub-saturation slope %.3f (1.9..2.1), saturated slope %.3f "
                "(0.9..1.1)\n",
                sub, sat);
    CHECK(report(4, "log-log slopes in the quadratic and linear bands",
                 sub >= 1.9 && sub <= 2.1 && sat >= 0.9 && sat <= 1.1));
}

TEST_CASE("criterion 5: global fit closure") {
    FreeParams truth = bundle_truth();
    FitConfig cfg = bundle_config();

    bool ok = true;

    // Noiseless bundle: exact recovery.
    auto clean = make_bundle(truth, cfg, true, 0, 1000.0);
    FitResult clean_nc = fit_no_charge(clean, cfg);
    FitConfig cfg_seeded = cfg;
    cfg_seeded.extra_starts = {clean_nc.params.to_array()};
    FitResult clean_fit = fit_global(clean, cfg_seeded);
    std::printf("    noiseless: cost %.3e (< 1e-8), no-charge cost %.3e\n",
                clean_fit.cost, clean_nc.cost);
    bool clean_params_ok = params_close(clean_fit.params, truth, 0.01);
    ok &= clean_fit.cost < 1e-8;
    ok &= clean_params_ok;
    ok &= clean_fit.cost <= clean_nc.cost;

    // Poisson-noisy bundle: charge-rate recovery within 20%.
    auto noisy = make_bundle(truth, cfg, false, 7, 2e6);
    FitResult noisy_nc = fit_no_charge(noisy, cfg);
    cfg_seeded.extra_starts = {noisy_nc.params.to_array()};
    FitResult noisy_fit = fit_global(noisy, cfg_seeded);
    double p_ref = 250.0;
    auto truth_at = at_power(truth.scaling(), truth.intrinsics(), p_ref);
    auto fit_at = at_power(noisy_fit.params.scaling(), noisy_fit.params.intrinsics(),
                           p_ref);
    std::printf("    noisy: cost %.3e, gamma_ion %.3f vs %.3f, gamma_rec %.3f vs "
                "%.3f (20%%), no-charge cost %.3e\n",
                noisy_fit.cost, fit_at.gamma_ion, truth_at.gamma_ion,
                fit_at.gamma_rec, truth_at.gamma_rec, noisy_nc.cost);
    ok &= std::abs(fit_at.gamma_ion - truth_at.gamma_ion) <= 0.2 * truth_at.gamma_ion;
    ok &= std::abs(fit_at.gamma_rec - truth_at.gamma_rec) <= 0.2 * truth_at.gamma_rec;
    ok &= noisy_fit.cost <= noisy_nc.cost;

    CHECK(report(5, "16-curve closure, charge-rate recovery, nested-model order", ok));
}

TEST_CASE("criterion 6: independent-integrator and conservation oracles") {
    std::mt19937_64 rng(2024);
    bool ok = true;

    // Matrix exponential vs explicit RK4 on the scalar equations.
    double worst_rk4 = 0;
    for (int trial = 0; trial < 50; ++trial) {
        NVParams p = testing::random_params(rng);
        StateVector x0 = testing::random_state(rng);
        std::vector<double> ts = {137.0};
        StateVector a = evolve(build_rate_matrix(p), x0, ts).back();
        StateVector b = testing::rk4_evolve(p, x0, 137.0);
        worst_rk4 = std::max(worst_rk4, (a - b).cwiseAbs().maxCoeff());
    }
    ok &= worst_rk4 < 1e-6;

    // Steady state vs long-time evolution.
    double worst_ss = 0;
    for (int trial = 0; trial < 100; ++trial) {
        NVParams p = testing::random_params(rng);
        if (p.gamma_ion == 0 && p.gamma_rec == 0) continue;
        RateMatrix rm = build_rate_matrix(p);
        StateVector ss = steady_state(rm);
        std::vector<double> ts = {200000.0};
        StateVector late = evolve(rm, testing::random_state(rng), ts).back();
        worst_ss = std::max(worst_ss, (ss - late).cwiseAbs().maxCoeff());
    }
    ok &= worst_ss < 1e-6;

    // Population conservation on 1000 draws.
    double worst_sum = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        NVParams p = testing::random_params(rng);
        std::vector<double> ts = {10.0, 100.0, 1000.0};
        for (const StateVector& v :
             evolve(build_rate_matrix(p), testing::random_state(rng), ts))
            worst_sum = std::max(worst_sum, std::abs(v.sum() - 1.0));
    }
    ok &= worst_sum < 1e-9;

    std::printf("    max |exp - rk4| = %.2e (<1e-6), max |ss - late| = %.2e "
                "(<1e-6), max |sum - 1| = %.2e (<1e-9)\n",
                worst_rk4, worst_ss, worst_sum);
    CHECK(report(6, "evolution, steady-state and conservation oracles", ok));
}

TEST_CASE("criterion 7: dark-decay rate recovery across the reported band") {
    bool ok = true;
    double worst = 0;
    for (double r_tot : log_grid(3.3, 91.0, 10)) {
        ChargeRates r = split_rates(r_tot, 0.45);
        std::vector<std::pair<double, double>> samples;
        for (int i = 0; i < 80; ++i) {
            double t = i * (4.0 / r_tot) / 80.0;  // four time constants
            samples.push_back({t, evolve_charge(r, {1.0, 0.0}, t).rho_minus});
        }
        ExponentialFit f = fit_exponential_decay(samples);
        worst = std::max(worst, std::abs(f.rate - r_tot) / r_tot);
    }
    ok = worst < 0.005;
    std::printf("    worst relative rate error %.2e (< 5e-3) over 3.3..91 s^-1\n",
                worst);
    CHECK(report(7, "noiseless decay rates recovered within 0.5%", ok));
}
