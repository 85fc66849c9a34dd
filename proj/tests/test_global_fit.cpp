#include <doctest.h>

#include <cmath>
#include <vector>

#include "nvpd/global_fit.hpp"
#include "nvpd/trace.hpp"

using namespace nvpd;

namespace {

FreeParams truth_params() {
    FreeParams t;
    t.beta_532 = 0.08;
    t.beta_ion = 0.002;
    t.beta_ion2 = 0.0;
    t.beta_rec = 0.005;
    t.beta_rec2 = 0.0;
    t.gamma_es = 70.0;
    t.gamma_es_nv0 = 30.0;
    t.gamma_es1_to_a1 = 55.0;
    t.gamma_es0_to_a1 = 10.0;
    t.gamma_a1 = 9.0;
    t.p_a1_to_gs1 = 0.3;
    return t;
}

// Noiseless traces for every (power, spin init) pair of the config.
std::vector<PLTrace> noiseless_traces(const FreeParams& truth,
                                      const FitConfig& cfg,
                                      double duration_ns = 1500.0) {
    std::vector<PLTrace> out;
    for (double p : cfg.power_list) {
        for (SpinInit init : {SpinInit::ms0, SpinInit::ms1}) {
            SynthesisSpec spec;
            spec.power_uw = p;
            spec.spin_init = init;
            spec.duration_ns = duration_ns;
            spec.noiseless = true;
            out.push_back(
                preprocess(synthesize(truth.scaling(), truth.intrinsics(), spec), cfg));
        }
    }
    return out;
}

}  // namespace

TEST_CASE("fit config validation") {
    FitConfig cfg;
    CHECK_THROWS_AS(cfg.validate(), InvalidParams);  // empty power list
    cfg.power_list = {100.0, 300.0};
    CHECK_NOTHROW(cfg.validate());
    cfg.t0_threshold = 1.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidParams);
    cfg.t0_threshold = 0.5;
    cfg.bounds["gamma_es"] = {80.0, 40.0};
    CHECK_THROWS_AS(cfg.validate(), InvalidParams);
}

TEST_CASE("free parameter layout") {
    FreeParams t = truth_params();
    auto arr = t.to_array();
    FreeParams back = FreeParams::from_array(arr);
    CHECK(back.to_array() == arr);
    CHECK(FreeParams::names()[0] == "beta_532");
    CHECK(FreeParams::names()[5] == "gamma_es");
    CHECK(FreeParams::names()[10] == "p_a1_to_gs1");
    CHECK(t.scaling().beta_rec == 0.005);
    CHECK(t.intrinsics().gamma_a1 == 9.0);
}

TEST_CASE("cost function") {
    FitConfig cfg;
    cfg.power_list = {100.0, 300.0};
    FreeParams truth = truth_params();
    auto traces = noiseless_traces(truth, cfg);
    REQUIRE(traces.size() == 4);

    SUBCASE("vanishes at the generating parameters") {
        std::vector<double> per_curve;
        double c = fit_cost(truth, traces, cfg, false, &per_curve);
        CHECK(c < 1e-12);
        REQUIRE(per_curve.size() == 4);
        for (double r : per_curve) CHECK(r < 1e-12);
    }
    SUBCASE("grows away from the truth") {
        FreeParams off = truth;
        off.gamma_es = 60.0;
        CHECK(fit_cost(off, traces, cfg, false, nullptr) > 1e-4);
        off = truth;
        off.beta_532 = 0.06;
        CHECK(fit_cost(off, traces, cfg, false, nullptr) > 1e-4);
    }
    SUBCASE("invalid scaled rates give infinite cost") {
        FreeParams bad = truth;
        bad.beta_ion2 = -0.1;  // gamma_ion(3 uW) < 0
        CHECK(std::isinf(fit_cost(bad, traces, cfg, false, nullptr)));
    }
    SUBCASE("unknown trace power is rejected") {
        FitConfig other = cfg;
        other.power_list = {200.0};
        CHECK(std::isinf(fit_cost(truth, traces, other, false, nullptr)));
    }
    SUBCASE("charge-disabled evaluation ignores the charge parameters") {
        FreeParams a = truth;
        FreeParams b = truth;
        b.beta_ion = 0.9;
        b.beta_rec = 1.5;
        double ca = fit_cost(a, traces, cfg, true, nullptr);
        double cb = fit_cost(b, traces, cfg, true, nullptr);
        CHECK(ca == doctest::Approx(cb).epsilon(1e-12));
    }
}

TEST_CASE("global fit input validation") {
    FitConfig cfg;
    cfg.power_list = {1.0};
    std::vector<PLTrace> none;
    CHECK_THROWS_AS(fit_global(none, cfg), InvalidParams);

    PLTrace stray;
    stray.power_uw = 7.0;
    std::vector<PLTrace> traces = {stray};
    CHECK_THROWS_AS(fit_global(traces, cfg), InvalidParams);
}

TEST_CASE("local refinement from a near-truth start") {
    FitConfig cfg;
    cfg.power_list = {100.0, 300.0};
    cfg.max_evaluations = 4000;
    cfg.restarts = 1;
    cfg.threads = 2;
    FreeParams truth = truth_params();
    auto traces = noiseless_traces(truth, cfg);

    // Single perturbed start close to the generating point.
    auto start = truth.to_array();
    start[0] *= 1.05;  // beta_532
    start[5] *= 0.97;  // gamma_es
    start[9] *= 1.08;  // gamma_a1
    cfg.multistart_beta_ion.clear();
    cfg.extra_starts = {start};

    FitResult res = fit_global(traces, cfg);
    CHECK(res.cost < 1e-6);
    CHECK(res.converged);
    CHECK(res.start_costs.size() == 1);
    CHECK(res.params.beta_532 == doctest::Approx(truth.beta_532).epsilon(0.02));
    CHECK(res.params.gamma_es == doctest::Approx(truth.gamma_es).epsilon(0.02));
    REQUIRE(res.derived.size() == 2);
    CHECK(res.derived[0].gamma_532 ==
          doctest::Approx(truth.beta_532 * 100.0).epsilon(0.02));
    CHECK(res.derived[1].gamma_ion ==
          doctest::Approx(truth.beta_ion * 300.0).epsilon(0.25));
    CHECK(res.derived[0].p_nv0 > 0.0);
    CHECK(res.derived[0].c_esr > 0.0);
}

TEST_CASE("charge-disabled fit refines on charge-free data") {
    FitConfig cfg;
    cfg.power_list = {100.0, 300.0};
    cfg.max_evaluations = 4000;
    cfg.restarts = 1;
    FreeParams truth = truth_params();
    truth.beta_ion = 0.0;
    truth.beta_rec = 0.0;
    auto traces = noiseless_traces(truth, cfg);

    auto start = truth.to_array();
    start[5] *= 0.96;
    start[7] *= 1.05;
    cfg.multistart_beta_ion.clear();
    cfg.extra_starts = {start};

    FitResult res = fit_no_charge(traces, cfg);
    CHECK(res.no_charge_model);
    CHECK(res.cost < 1e-6);
    CHECK(res.params.gamma_es == doctest::Approx(truth.gamma_es).epsilon(0.02));
    for (const auto& d : res.derived) {
        CHECK(d.gamma_ion == 0.0);
        CHECK(d.p_nv0 == 0.0);
    }
}
