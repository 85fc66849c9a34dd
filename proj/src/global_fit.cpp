#include "nvpd/global_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

#include "nvpd/contrast.hpp"
#include "nvpd/errors.hpp"
#include "nvpd/optim.hpp"

namespace nvpd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Free-parameter indices active in the charge-disabled model.
const std::vector<std::size_t> kNoChargeFree = {0, 5, 7, 8, 9, 10};

std::vector<std::size_t> free_indices(bool no_charge) {
    if (no_charge) return kNoChargeFree;
    std::vector<std::size_t> all(11);
    for (std::size_t i = 0; i < 11; ++i) all[i] = i;
    return all;
}

}  // namespace

std::map<std::string, Bounds> FitConfig::default_bounds() {
    return {
        {"beta_532", {1e-4, 0.5}},
        {"beta_ion", {0.0, 1.0}},
        {"beta_ion2", {-1e-4, 0.0}},
        {"beta_rec", {0.0, 2.0}},
        {"beta_rec2", {0.0, 1e-3}},
        {"gamma_es", {20.0, 75.0}},
        {"gamma_es_nv0", {1.0, 75.0}},
        {"gamma_es1_to_a1", {0.0, 150.0}},
        {"gamma_es0_to_a1", {0.0, 100.0}},
        {"gamma_a1", {2.0, 40.0}},
        {"p_a1_to_gs1", {0.0, 1.0}},
    };
}

std::vector<double> FitConfig::default_multistart() {
    // 8 log-spaced beta_ion guesses spanning 1e-3 .. 1 MHz/uW.
    std::vector<double> g;
    for (int i = 0; i < 8; ++i)
        g.push_back(std::pow(10.0, -3.0 + 3.0 * i / 7.0));
    return g;
}

void FitConfig::validate() const {
    if (power_list.empty())
        throw InvalidParams("power list is empty");
    for (double p : power_list)
        if (!(p > 0))
            throw InvalidParams("powers must be positive");
    if (multistart_beta_ion.empty() && extra_starts.empty())
        throw InvalidParams("multistart grid is empty");
    if (smoothing_block <= 0)
        throw InvalidParams("smoothing block must be positive");
    if (!(t0_threshold > 0 && t0_threshold < 1))
        throw InvalidParams("t0 threshold must lie in (0,1)");
    for (const auto& [name, b] : bounds)
        if (!(b.lo <= b.hi))
            throw InvalidParams("inconsistent bounds for " + name);
}

const std::array<std::string, 11>& FreeParams::names() {
    static const std::array<std::string, 11> n = {
        "beta_532",  "beta_ion",        "beta_ion2",
        "beta_rec",  "beta_rec2",       "gamma_es",
        "gamma_es_nv0", "gamma_es1_to_a1", "gamma_es0_to_a1",
        "gamma_a1",  "p_a1_to_gs1"};
    return n;
}

std::array<double, 11> FreeParams::to_array() const {
    return {beta_532, beta_ion,  beta_ion2,       beta_rec,        beta_rec2,
            gamma_es, gamma_es_nv0, gamma_es1_to_a1, gamma_es0_to_a1, gamma_a1,
            p_a1_to_gs1};
}

FreeParams FreeParams::from_array(const std::array<double, 11>& a) {
    FreeParams p;
    p.beta_532 = a[0];
    p.beta_ion = a[1];
    p.beta_ion2 = a[2];
    p.beta_rec = a[3];
    p.beta_rec2 = a[4];
    p.gamma_es = a[5];
    p.gamma_es_nv0 = a[6];
    p.gamma_es1_to_a1 = a[7];
    p.gamma_es0_to_a1 = a[8];
    p.gamma_a1 = a[9];
    p.p_a1_to_gs1 = a[10];
    return p;
}

PowerScaling FreeParams::scaling() const {
    return {beta_532, beta_ion, beta_ion2, beta_rec, beta_rec2};
}

Intrinsics FreeParams::intrinsics() const {
    return {gamma_es, gamma_es1_to_a1, gamma_es0_to_a1, gamma_a1, p_a1_to_gs1,
            gamma_es_nv0};
}

double fit_cost(const FreeParams& fp, std::span<const PLTrace> traces,
                const FitConfig& cfg, bool no_charge,
                std::vector<double>* per_curve) {
    if (per_curve) per_curve->assign(traces.size(), kInf);
    double total = 0;
    // Cache the per-power model parameters and charge split.
    struct PowerCtx {
        NVParams params;
        double p_nv0;
    };
    std::map<double, PowerCtx> ctx;
    try {
        PowerScaling sc = fp.scaling();
        Intrinsics in = fp.intrinsics();
        if (no_charge) sc.beta_ion = sc.beta_ion2 = sc.beta_rec = sc.beta_rec2 = 0;
        for (double p : cfg.power_list) {
            PowerCtx c;
            c.params = at_power(sc, in, p);
            if (c.params.gamma_ion > 0 || c.params.gamma_rec > 0) {
                StateVector ss = steady_state(build_rate_matrix(c.params));
                c.p_nv0 = ss[kEsNv0] + ss[kGsNv0];
            } else {
                c.p_nv0 = 0.0;
            }
            ctx.emplace(p, c);
        }
        for (std::size_t k = 0; k < traces.size(); ++k) {
            const PLTrace& tr = traces[k];
            auto it = ctx.find(tr.power_uw);
            if (it == ctx.end())
                throw InvalidParams("trace power not in the configured power list");
            if (tr.times_ns.size() < 2)
                throw InvalidParams("trace too short");
            double dt = tr.times_ns[1] - tr.times_ns[0];
            auto model = model_curve(it->second.params, tr.spin_init,
                                     1.0 - it->second.p_nv0, it->second.p_nv0, dt,
                                     tr.values.size(), cfg);
            double ss = 0;
            for (std::size_t i = 0; i < model.size(); ++i) {
                double r = model[i] - tr.values[i];
                ss += r * r;
            }
            if (per_curve) (*per_curve)[k] = ss;
            total += ss;
        }
    } catch (const InvalidParams&) {
        return kInf;
    } catch (const PreprocessError&) {
        return kInf;
    } catch (const NormalizationError&) {
        return kInf;
    } catch (const AmbiguousSteadyState&) {
        return kInf;
    }
    return total;
}

namespace {

struct StartOutcome {
    std::array<double, 11> x;
    double cost = kInf;
    bool converged = false;
};

FitResult run_fit(std::span<const PLTrace> traces, const FitConfig& cfg,
                  bool no_charge) {
    cfg.validate();
    if (traces.empty())
        throw InvalidParams("no traces supplied");
    for (const auto& tr : traces) {
        bool known = false;
        for (double p : cfg.power_list) known |= (p == tr.power_uw);
        if (!known)
            throw InvalidParams("trace power does not match the configured power list");
    }

    const auto free_idx = free_indices(no_charge);
    const auto& names = FreeParams::names();
    std::array<double, 11> lo_full{}, hi_full{};
    for (std::size_t i = 0; i < 11; ++i) {
        auto it = cfg.bounds.find(names[i]);
        if (it == cfg.bounds.end())
            throw InvalidParams("missing bounds for " + names[i]);
        lo_full[i] = it->second.lo;
        hi_full[i] = it->second.hi;
    }

    // Generic starting point; the multistart grid varies beta_ion.
    double mean_power = 0;
    for (double p : cfg.power_list) mean_power += p;
    mean_power /= static_cast<double>(cfg.power_list.size());
    std::array<double, 11> base{};
    base[0] = std::clamp(20.0 / mean_power, lo_full[0], hi_full[0]);  // beta_532
    base[2] = 0.0;                                                    // beta_ion2
    base[4] = 0.0;                                                    // beta_rec2
    base[5] = std::clamp(70.0, lo_full[5], hi_full[5]);               // gamma_es
    base[6] = std::clamp(25.0, lo_full[6], hi_full[6]);               // gamma_es_nv0
    base[7] = std::clamp(55.0, lo_full[7], hi_full[7]);               // es1 -> a1
    base[8] = std::clamp(15.0, lo_full[8], hi_full[8]);               // es0 -> a1
    base[9] = std::clamp(10.0, lo_full[9], hi_full[9]);               // gamma_a1
    base[10] = std::clamp(0.3, lo_full[10], hi_full[10]);             // branching

    std::vector<std::array<double, 11>> starts;
    for (double bi : cfg.multistart_beta_ion) {
        auto s = base;
        s[1] = std::clamp(bi, lo_full[1], hi_full[1]);
        s[3] = std::clamp(2.0 * bi, lo_full[3], hi_full[3]);
        starts.push_back(s);
    }
    for (const auto& e : cfg.extra_starts) starts.push_back(e);
    if (no_charge) {
        // Charge parameters are frozen; a single start per distinct reduced
        // point suffices, but keep the grid for symmetry with fit_global.
        for (auto& s : starts) s[1] = s[2] = s[3] = s[4] = 0;
    }

    auto to_sub = [&](const std::array<double, 11>& full) {
        std::vector<double> v(free_idx.size());
        for (std::size_t i = 0; i < free_idx.size(); ++i) v[i] = full[free_idx[i]];
        return v;
    };
    auto to_full = [&](const std::vector<double>& sub,
                       const std::array<double, 11>& tmpl) {
        std::array<double, 11> full = tmpl;
        for (std::size_t i = 0; i < free_idx.size(); ++i) full[free_idx[i]] = sub[i];
        return full;
    };

    std::vector<double> lo = to_sub(lo_full), hi = to_sub(hi_full);

    std::vector<StartOutcome> outcomes(starts.size());
    auto run_start = [&](std::size_t si) {
        const auto& s0 = starts[si];
        auto cost_fn = [&](const std::vector<double>& sub) {
            return fit_cost(FreeParams::from_array(to_full(sub, s0)), traces, cfg,
                            no_charge, nullptr);
        };
        NelderMeadOptions nm;
        nm.max_evaluations = cfg.max_evaluations;
        nm.xtol = cfg.xtol;
        nm.ftol = cfg.ftol;
        nm.restarts = cfg.restarts;
        auto res = nelder_mead(cost_fn, to_sub(s0), lo, hi, nm);
        if (cfg.polish && std::isfinite(res.fmin)) {
            std::size_t n_resid = 0;
            for (const auto& tr : traces) n_resid += tr.values.size();
            auto resid_fn = [&, n_resid](const std::vector<double>& sub) {
                // Concatenated per-point residuals across all traces; a large
                // constant vector stands in for invalid parameter points.
                std::vector<double> out;
                out.reserve(n_resid);
                FreeParams fp = FreeParams::from_array(to_full(sub, s0));
                try {
                    PowerScaling sc = fp.scaling();
                    Intrinsics in = fp.intrinsics();
                    if (no_charge)
                        sc.beta_ion = sc.beta_ion2 = sc.beta_rec = sc.beta_rec2 = 0;
                    struct Ctx {
                        NVParams params;
                        double p_nv0;
                    };
                    std::map<double, Ctx> ctx;
                    for (double p : cfg.power_list) {
                        Ctx cc;
                        cc.params = at_power(sc, in, p);
                        if (cc.params.gamma_ion > 0 || cc.params.gamma_rec > 0) {
                            StateVector ssv = steady_state(build_rate_matrix(cc.params));
                            cc.p_nv0 = ssv[kEsNv0] + ssv[kGsNv0];
                        } else {
                            cc.p_nv0 = 0.0;
                        }
                        ctx.emplace(p, cc);
                    }
                    for (const auto& tr : traces) {
                        const auto& cc = ctx.at(tr.power_uw);
                        double dt = tr.times_ns[1] - tr.times_ns[0];
                        auto model = model_curve(cc.params, tr.spin_init, 1.0 - cc.p_nv0,
                                                 cc.p_nv0, dt, tr.values.size(), cfg);
                        for (std::size_t i = 0; i < model.size(); ++i)
                            out.push_back(model[i] - tr.values[i]);
                    }
                } catch (const std::exception&) {
                    out.assign(n_resid, 1e3);
                }
                return out;
            };
            LevenbergMarquardtOptions lm;
            auto polished = levenberg_marquardt(resid_fn, res.x, lo, hi, lm);
            if (polished.fmin < res.fmin) res = polished;
        }
        outcomes[si] = {to_full(res.x, s0), res.fmin, res.converged || cfg.polish};
    };

    int n_threads = std::max(1, cfg.threads);
    if (n_threads == 1 || starts.size() == 1) {
        for (std::size_t i = 0; i < starts.size(); ++i) run_start(i);
    } else {
        std::vector<std::thread> pool;
        std::size_t stride = static_cast<std::size_t>(n_threads);
        for (std::size_t t = 0; t < stride; ++t)
            pool.emplace_back([&, t]() {
                for (std::size_t i = t; i < starts.size(); i += stride) run_start(i);
            });
        for (auto& th : pool) th.join();
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < outcomes.size(); ++i)
        if (outcomes[i].cost < outcomes[best].cost) best = i;
    if (!std::isfinite(outcomes[best].cost))
        throw FitError("optimizer failed to converge on every start");

    FitResult out;
    out.no_charge_model = no_charge;
    out.params = FreeParams::from_array(outcomes[best].x);
    out.start_costs.reserve(outcomes.size());
    for (const auto& o : outcomes) out.start_costs.push_back(o.cost);
    out.converged = outcomes[best].converged;
    out.cost = fit_cost(out.params, traces, cfg, no_charge, &out.per_curve_residuals);

    const auto arr = outcomes[best].x;
    for (auto i : free_idx) {
        double range = std::max(hi_full[i] - lo_full[i], 1e-300);
        if (arr[i] - lo_full[i] <= 1e-6 * range)
            out.active_constraints.push_back(names[i] + " at lower bound");
        else if (hi_full[i] - arr[i] <= 1e-6 * range)
            out.active_constraints.push_back(names[i] + " at upper bound");
    }

    PowerScaling sc = out.params.scaling();
    Intrinsics in = out.params.intrinsics();
    if (no_charge) sc.beta_ion = sc.beta_ion2 = sc.beta_rec = sc.beta_rec2 = 0;
    auto window_grid = default_window_grid();
    for (double p : cfg.power_list) {
        PerPowerDerived d;
        d.power_uw = p;
        NVParams np = at_power(sc, in, p);
        d.gamma_532 = np.gamma_532;
        d.gamma_ion = np.gamma_ion;
        d.gamma_rec = np.gamma_rec;
        if (np.gamma_ion > 0 || np.gamma_rec > 0) {
            StateVector ss = steady_state(build_rate_matrix(np));
            d.p_nv0 = ss[kEsNv0] + ss[kGsNv0];
        }
        d.c_esr = optimize_window(np, window_grid).c_esr;
        out.derived.push_back(d);
    }
    return out;
}

}  // namespace

FitResult fit_global(std::span<const PLTrace> traces, const FitConfig& cfg) {
    return run_fit(traces, cfg, false);
}

FitResult fit_no_charge(std::span<const PLTrace> traces, const FitConfig& cfg) {
    FitConfig reduced = cfg;
    // The frozen charge parameters make the multistart grid redundant.
    reduced.multistart_beta_ion = {cfg.multistart_beta_ion.empty()
                                       ? 0.0
                                       : cfg.multistart_beta_ion.front()};
    return run_fit(traces, reduced, true);
}

}  // namespace nvpd
