#include <doctest.h>

#include <cmath>
#include <vector>

#include "nvpd/contrast.hpp"
#include "oracles.hpp"

using namespace nvpd;

TEST_CASE("log grid") {
    auto g = log_grid(1.0, 100.0, 3);
    REQUIRE(g.size() == 3);
    CHECK(g[0] == doctest::Approx(1.0));
    CHECK(g[1] == doctest::Approx(10.0));
    CHECK(g[2] == doctest::Approx(100.0));
    CHECK(log_grid(5.0, 7.0, 1) == std::vector<double>{5.0});
    CHECK_THROWS_AS(log_grid(0.0, 10.0, 4), InvalidParams);
    CHECK_THROWS_AS(log_grid(10.0, 1.0, 4), InvalidParams);

    auto def = default_window_grid();
    REQUIRE(def.size() == 50);
    CHECK(def.front() == doctest::Approx(50.0));
    CHECK(def.back() == doctest::Approx(5000.0));
}

TEST_CASE("fixed-window contrast") {
    SUBCASE("window validation") {
        NVParams p = testing::nv17_params();
        CHECK_THROWS_AS(compute_contrast(p, {0.0, 0.0}), InvalidParams);
        CHECK_THROWS_AS(compute_contrast(p, {100.0, 500.0}), InvalidParams);
    }
    SUBCASE("identical spin response gives zero contrast") {
        // With no shelving pathway the two initializations are equivalent.
        NVParams p = testing::nv17_params();
        p.gamma_es1_to_a1 = p.gamma_es0_to_a1 = 0.0;
        p.gamma_a1 = 10.0;
        ContrastReport r = compute_contrast(p, {0.0, 500.0});
        CHECK(std::abs(r.c_esr) < 1e-12);
        CHECK(std::abs(r.snr) < 1e-9);
    }
    SUBCASE("collection factor scales the SNR, not the contrast") {
        NVParams p = testing::nv91_params();
        ContrastReport a = compute_contrast(p, {0.0, 300.0}, 1.0);
        ContrastReport b = compute_contrast(p, {0.0, 300.0}, 4.0);
        CHECK(a.c_esr == doctest::Approx(b.c_esr).epsilon(1e-12));
        CHECK(b.snr == doctest::Approx(2.0 * a.snr).epsilon(1e-12));
    }
    SUBCASE("contrast is positive and below one") {
        for (const NVParams& p : {testing::nv17_params(), testing::nv91_params()}) {
            ContrastReport r = compute_contrast(p, {0.0, 300.0});
            CHECK(r.c_esr > 0.0);
            CHECK(r.c_esr < 1.0);
            CHECK(r.alpha_0 > r.alpha_1);
        }
    }
}

TEST_CASE("window optimization") {
    auto grid = default_window_grid();

    SUBCASE("matches an exhaustive scan") {
        NVParams p = testing::nv91_params();
        ContrastReport best = optimize_window(p, grid);
        double brute = -1, brute_end = 0;
        for (double end : grid) {
            double c = compute_contrast(p, {0.0, end}).c_esr;
            if (c > brute) {
                brute = c;
                brute_end = end;
            }
        }
        CHECK(best.c_esr == doctest::Approx(brute).epsilon(1e-12));
        CHECK(best.window.end_ns == doctest::Approx(brute_end));
    }
    SUBCASE("interior optimum on the grid") {
        NVParams p = testing::nv17_params();
        ContrastReport best = optimize_window(p, grid);
        CHECK(best.window.end_ns > grid.front());
        CHECK(best.window.end_ns < grid.back());
    }
    SUBCASE("reported values for the two reference centers") {
        CHECK(optimize_window(testing::nv17_params(), grid).c_esr ==
              doctest::Approx(0.38).epsilon(0.11));
        ContrastReport r = optimize_window(testing::nv91_params(), grid);
        CHECK(r.c_esr == doctest::Approx(0.16).epsilon(0.19));
        CHECK(r.p_nv0 == doctest::Approx(0.49).epsilon(0.11));
    }
}

TEST_CASE("steady charge fraction") {
    NVParams p = testing::nv17_params();
    SUBCASE("no ionization means no NV0") {
        p.gamma_ion = 0.0;
        ContrastReport r = compute_contrast(p, {0.0, 300.0});
        CHECK(r.p_nv0 == 0.0);
    }
    SUBCASE("NV0 manifold stays empty when charge is off") {
        p.gamma_ion = 0.0;
        p.gamma_rec = 0.0;
        ContrastReport r = compute_contrast(p, {0.0, 400.0});
        CHECK(r.p_nv0 == 0.0);
        CHECK(r.c_esr > 0.0);
        // Long-time evolution lands on the reduced 5-level steady state.
        StateVector init = build_initial_state(SpinInit::ms0, 1.0, 0.0);
        std::vector<double> ts = {20000.0};
        StateVector late = evolve(build_rate_matrix(p), init, ts).back();
        StateVector ss5 = steady_state_nv_minus(p);
        CHECK(late[kEsNv0] == 0.0);
        CHECK(late[kGsNv0] == 0.0);
        for (int i = 0; i < 7; ++i)
            CHECK(late[i] == doctest::Approx(ss5[i]).epsilon(1e-6));
    }
}

TEST_CASE("rate sweep") {
    NVParams base = testing::nv91_params();
    auto ion = log_grid(0.5, 50.0, 4);
    auto rec = log_grid(0.5, 50.0, 5);
    auto windows = log_grid(50.0, 5000.0, 12);

    SweepResult grid = sweep_grid(base, ion, rec, windows, 2);
    REQUIRE(grid.cells.size() == 20);

    SUBCASE("cells agree with direct evaluation") {
        for (std::size_t i : {std::size_t{0}, std::size_t{3}}) {
            for (std::size_t j : {std::size_t{1}, std::size_t{4}}) {
                NVParams p = base;
                p.gamma_ion = ion[i];
                p.gamma_rec = rec[j];
                ContrastReport r = optimize_window(p, windows);
                const SweepCell& c = grid.at(i, j);
                CHECK(c.c_esr == doctest::Approx(r.c_esr).epsilon(1e-9));
                CHECK(c.snr == doctest::Approx(r.snr).epsilon(1e-9));
                CHECK(c.p_nv0 == doctest::Approx(r.p_nv0).epsilon(1e-9));
            }
        }
    }
    SUBCASE("thread count does not change the result") {
        SweepResult serial = sweep_grid(base, ion, rec, windows, 1);
        for (std::size_t k = 0; k < grid.cells.size(); ++k)
            CHECK(grid.cells[k].c_esr == serial.cells[k].c_esr);
    }
    SUBCASE("descending grid is rejected") {
        std::vector<double> bad = {2.0, 1.0};
        CHECK_THROWS_AS(sweep_grid(base, bad, rec, windows), InvalidParams);
    }

    SUBCASE("decomposition identity and signs") {
        Decomposition d = decompose(base, grid, windows, 0.05);
        CHECK(d.c_esr_no_charge - d.delta_static - d.delta_dynamic ==
              doctest::Approx(d.c_esr_actual).epsilon(1e-12));
        CHECK(d.delta_dynamic >= 0.0);
        CHECK(d.c_esr_best_at_same_pnv0 >= d.c_esr_actual);
    }
    SUBCASE("charge-free base decomposes trivially") {
        NVParams nc = base;
        nc.gamma_ion = 0.0;
        nc.gamma_rec = 0.0;
        Decomposition d = decompose(nc, grid, windows);
        CHECK(d.c_esr_actual == doctest::Approx(d.c_esr_no_charge).epsilon(1e-12));
        CHECK(d.delta_static == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(d.delta_dynamic == doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("scatter and envelope") {
        ContrastScatter sc = contrast_vs_pnv0(grid, 0.05);
        CHECK(sc.points.size() == grid.cells.size());
        REQUIRE_FALSE(sc.envelope.empty());
        // Envelope bins ascend and dominate their members.
        for (std::size_t i = 1; i < sc.envelope.size(); ++i)
            CHECK(sc.envelope[i].p_nv0 > sc.envelope[i - 1].p_nv0);
        for (const auto& pt : sc.points) {
            bool dominated = false;
            for (const auto& e : sc.envelope)
                if (std::abs(e.p_nv0 - pt.p_nv0) <= 0.025 + 1e-12 &&
                    e.c_esr >= pt.c_esr - 1e-12)
                    dominated = true;
            CHECK(dominated);
        }
    }
}
