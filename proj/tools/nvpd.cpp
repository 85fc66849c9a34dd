// Command-line front end: config-driven simulation, synthesis, fitting and
// sweep runs. One JSON config per run; flags only override scalar entries.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "nvpd/charge_kinetics.hpp"
#include "nvpd/contrast.hpp"
#include "nvpd/global_fit.hpp"
#include "nvpd/io.hpp"
#include "nvpd/rate_model.hpp"
#include "nvpd/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nvpd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSchema = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct RunContext {
    fs::path out_dir;
    json config;
    std::string config_hash;
    std::optional<std::uint64_t> seed_override;
    int threads = 1;
    std::vector<std::string> outputs;
};

// Rejects unknown keys; every command validates its document against an
// explicit allow-list before touching the values.
void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& context) {
    if (!j.is_object())
        throw SchemaError(context + ": expected a JSON object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw SchemaError(context + ": unknown key '" + key + "'");
}

const json& require(const json& j, const std::string& key,
                    const std::string& context) {
    auto it = j.find(key);
    if (it == j.end())
        throw SchemaError(context + ": missing field '" + key + "'");
    return *it;
}

double require_number(const json& j, const std::string& key,
                      const std::string& context) {
    const json& v = require(j, key, context);
    if (!v.is_number())
        throw SchemaError(context + ": field '" + key + "' must be a number");
    return v.get<double>();
}

double number_or(const json& j, const std::string& key, double fallback,
                 const std::string& context) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number())
        throw SchemaError(context + ": field '" + key + "' must be a number");
    return it->get<double>();
}

SpinInit parse_spin_init(const json& v, const std::string& context) {
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s == "ms0") return SpinInit::ms0;
        if (s == "ms1") return SpinInit::ms1;
    }
    throw SchemaError(context + ": spin init must be \"ms0\" or \"ms1\"");
}

const char* spin_name(SpinInit s) { return s == SpinInit::ms0 ? "ms0" : "ms1"; }

std::vector<SpinInit> parse_spin_inits(const json& j, const std::string& context) {
    const json& arr = require(j, "spin_inits", context);
    if (!arr.is_array() || arr.empty())
        throw SchemaError(context + ": 'spin_inits' must be a nonempty array");
    std::vector<SpinInit> out;
    for (const auto& v : arr) out.push_back(parse_spin_init(v, context));
    return out;
}

std::vector<double> parse_number_list(const json& v, const std::string& context,
                                      const std::string& key) {
    if (!v.is_array() || v.empty())
        throw SchemaError(context + ": '" + key + "' must be a nonempty array");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number())
            throw SchemaError(context + ": '" + key + "' entries must be numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

// A grid is either an explicit array or {"lo", "hi", "n"} log-spaced.
std::vector<double> parse_grid(const json& j, const std::string& key,
                               const std::string& context) {
    const json& v = require(j, key, context);
    if (v.is_array()) return parse_number_list(v, context, key);
    if (v.is_object()) {
        check_keys(v, {"lo", "hi", "n"}, context + "." + key);
        double lo = require_number(v, "lo", context + "." + key);
        double hi = require_number(v, "hi", context + "." + key);
        const json& n = require(v, "n", context + "." + key);
        if (!n.is_number_integer() || n.get<int>() < 1)
            throw SchemaError(context + "." + key + ": 'n' must be a positive integer");
        return log_grid(lo, hi, n.get<int>());
    }
    throw SchemaError(context + ": '" + key + "' must be an array or {lo,hi,n}");
}

NVParams parse_params(const json& j, const std::string& context) {
    check_keys(j, {"units", "gamma_532", "gamma_es", "gamma_es1_to_a1",
                   "gamma_es0_to_a1", "gamma_a1", "p_a1_to_gs1", "gamma_ion",
                   "gamma_rec", "gamma_es_nv0", "gamma_532_nv0"},
               context);
    try {
        return j.get<NVParams>();
    } catch (const json::exception& e) {
        throw SchemaError(context + ": " + e.what());
    }
}

PowerScaling parse_scaling(const json& j, const std::string& context) {
    check_keys(j, {"units", "beta_532", "beta_ion", "beta_ion2", "beta_rec",
                   "beta_rec2"},
               context);
    try {
        return j.get<PowerScaling>();
    } catch (const json::exception& e) {
        throw SchemaError(context + ": " + e.what());
    }
}

Intrinsics parse_intrinsics(const json& j, const std::string& context) {
    check_keys(j, {"units", "gamma_es", "gamma_es1_to_a1", "gamma_es0_to_a1",
                   "gamma_a1", "p_a1_to_gs1", "gamma_es_nv0"},
               context);
    try {
        return j.get<Intrinsics>();
    } catch (const json::exception& e) {
        throw SchemaError(context + ": " + e.what());
    }
}

json load_json_file(const fs::path& path, const std::string& context) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError(context + " " + path.string() + ": " + e.what());
    }
}

void write_text(RunContext& ctx, const std::string& name, const std::string& data) {
    fs::path p = ctx.out_dir / name;
    std::ofstream out(p);
    if (!out)
        throw IoError("cannot write " + p.string());
    out << data;
    if (!out)
        throw IoError("write failed: " + p.string());
    ctx.outputs.push_back(name);
}

void write_json_file(RunContext& ctx, const std::string& name, const json& j) {
    write_text(ctx, name, j.dump(2) + "\n");
}

void write_manifest(RunContext& ctx, const std::string& command,
                    json extra = json::object()) {
    json m = {{"command", command},
              {"config_hash", ctx.config_hash},
              {"threads", ctx.threads},
              {"outputs", ctx.outputs}};
    if (ctx.seed_override) m["seed"] = *ctx.seed_override;
    for (auto& [k, v] : extra.items()) m[k] = v;
    fs::path p = ctx.out_dir / "manifest.json";
    std::ofstream out(p);
    if (!out)
        throw IoError("cannot write " + p.string());
    out << m.dump(2) << "\n";
}

std::string format_power(double p) {
    std::ostringstream ss;
    ss << p;
    std::string s = ss.str();
    for (char& c : s)
        if (c == '.') c = 'p';
    return s;
}

// ---------------------------------------------------------------------------

void cmd_simulate(RunContext& ctx) {
    const std::string c = "simulate config";
    check_keys(ctx.config, {"traces", "spin_inits", "duration_ns", "dt_ns"}, c);
    const json& entries = require(ctx.config, "traces", c);
    if (!entries.is_array() || entries.empty())
        throw SchemaError(c + ": 'traces' must be a nonempty array");
    auto inits = parse_spin_inits(ctx.config, c);
    double duration = number_or(ctx.config, "duration_ns", 3000.0, c);
    double dt = number_or(ctx.config, "dt_ns", 2.0, c);
    if (!(dt > 0) || !(duration >= 0))
        throw SchemaError(c + ": need dt_ns > 0 and duration_ns >= 0");

    std::vector<double> times;
    for (double t = 0.0; t <= duration; t += dt) times.push_back(t);
    if (duration == 0.0) times.clear();

    for (const auto& entry : entries) {
        check_keys(entry, {"label", "params"}, c + ".traces[]");
        std::string label = require(entry, "label", c + ".traces[]").get<std::string>();
        NVParams params = parse_params(require(entry, "params", c), c + "." + label);
        for (SpinInit init : inits) {
            double p_nv0 = 0.0;
            if (params.gamma_ion > 0 || params.gamma_rec > 0) {
                StateVector ss = steady_state(build_rate_matrix(params));
                p_nv0 = ss[kEsNv0] + ss[kGsNv0];
            }
            StateVector s0 = build_initial_state(init, 1.0 - p_nv0, p_nv0);
            std::vector<std::vector<double>> rows;
            if (!times.empty()) {
                ModelTrace tr = pl_trace(params, s0, times);
                for (std::size_t i = 0; i < times.size(); ++i)
                    rows.push_back({tr.times_ns[i], tr.values[i], tr.raw[i]});
            }
            std::string name = "simulate_" + label + "_" + spin_name(init) + ".csv";
            write_csv(ctx.out_dir / name, {"time_ns", "pl_normalized", "pl_raw"}, rows);
            ctx.outputs.push_back(name);
        }
    }
    write_manifest(ctx, "simulate",
                   {{"duration_ns", duration}, {"dt_ns", dt}});
}

void cmd_synth(RunContext& ctx) {
    const std::string c = "synth config";
    check_keys(ctx.config,
               {"scaling", "intrinsics", "powers", "spin_inits", "duration_ns",
                "photon_scale", "bin_width_ps", "pre_trigger_ns", "noiseless",
                "seed"},
               c);
    PowerScaling scaling = parse_scaling(require(ctx.config, "scaling", c), c + ".scaling");
    Intrinsics intrinsics =
        parse_intrinsics(require(ctx.config, "intrinsics", c), c + ".intrinsics");
    auto powers = parse_number_list(require(ctx.config, "powers", c), c, "powers");
    auto inits = parse_spin_inits(ctx.config, c);

    SynthesisSpec spec;
    spec.duration_ns = number_or(ctx.config, "duration_ns", 2000.0, c);
    spec.photon_scale = number_or(ctx.config, "photon_scale", 1000.0, c);
    spec.bin_width_ps = number_or(ctx.config, "bin_width_ps", 128.0, c);
    spec.pre_trigger_ns = number_or(ctx.config, "pre_trigger_ns", 0.0, c);
    if (ctx.config.contains("noiseless")) {
        if (!ctx.config["noiseless"].is_boolean())
            throw SchemaError(c + ": field 'noiseless' must be a boolean");
        spec.noiseless = ctx.config["noiseless"].get<bool>();
    }
    std::uint64_t base_seed =
        static_cast<std::uint64_t>(number_or(ctx.config, "seed", 0.0, c));
    if (ctx.seed_override) base_seed = *ctx.seed_override;

    std::uint64_t stream = 0;
    for (double p : powers) {
        for (SpinInit init : inits) {
            spec.power_uw = p;
            spec.spin_init = init;
            // Distinct deterministic stream per curve.
            spec.seed = base_seed * 1000003ull + stream++;
            RawTrace raw = synthesize(scaling, intrinsics, spec);
            std::string stem = "trace_p" + format_power(p) + "_" + spin_name(init);
            std::vector<std::vector<double>> rows;
            rows.reserve(raw.counts.size());
            for (std::size_t i = 0; i < raw.counts.size(); ++i)
                rows.push_back({static_cast<double>(i), raw.counts[i]});
            write_csv(ctx.out_dir / (stem + ".csv"), {"bin_index", "count"}, rows);
            ctx.outputs.push_back(stem + ".csv");
            json sidecar = {{"bin_width_ps", raw.bin_width_ps},
                            {"power_uW", raw.power_uw},
                            {"spin_init", spin_name(init)}};
            write_json_file(ctx, stem + ".json", sidecar);
        }
    }
    write_manifest(ctx, "synth", {{"seed", base_seed}});
}

RawTrace load_raw_trace(const fs::path& csv_path, const fs::path& sidecar_path) {
    json sc = load_json_file(sidecar_path, "sidecar");
    const std::string c = "sidecar " + sidecar_path.string();
    check_keys(sc, {"bin_width_ps", "power_uW", "spin_init"}, c);
    RawTrace raw;
    raw.bin_width_ps = require_number(sc, "bin_width_ps", c);
    raw.power_uw = require_number(sc, "power_uW", c);
    raw.spin_init = parse_spin_init(require(sc, "spin_init", c), c);

    CsvTable t = read_csv(csv_path);
    if (t.header != std::vector<std::string>{"bin_index", "count"})
        throw SchemaError("trace " + csv_path.string() +
                          ": expected header 'bin_index,count'");
    raw.counts.reserve(t.rows.size());
    for (const auto& row : t.rows) raw.counts.push_back(row[1]);
    return raw;
}

FitConfig parse_fit_config(const json& j, const std::string& context) {
    FitConfig cfg;
    check_keys(j,
               {"power_list", "smoothing_block", "t0_threshold", "tail_fraction",
                "max_evaluations", "restarts", "polish", "multistart_beta_ion",
                "bounds", "xtol", "ftol"},
               context);
    cfg.power_list = parse_number_list(require(j, "power_list", context), context,
                                       "power_list");
    cfg.smoothing_block =
        static_cast<int>(number_or(j, "smoothing_block", cfg.smoothing_block, context));
    cfg.t0_threshold = number_or(j, "t0_threshold", cfg.t0_threshold, context);
    cfg.tail_fraction = number_or(j, "tail_fraction", cfg.tail_fraction, context);
    cfg.max_evaluations =
        static_cast<int>(number_or(j, "max_evaluations", cfg.max_evaluations, context));
    cfg.restarts = static_cast<int>(number_or(j, "restarts", cfg.restarts, context));
    cfg.xtol = number_or(j, "xtol", cfg.xtol, context);
    cfg.ftol = number_or(j, "ftol", cfg.ftol, context);
    if (j.contains("polish")) {
        if (!j["polish"].is_boolean())
            throw SchemaError(context + ": field 'polish' must be a boolean");
        cfg.polish = j["polish"].get<bool>();
    }
    if (j.contains("multistart_beta_ion"))
        cfg.multistart_beta_ion =
            parse_number_list(j["multistart_beta_ion"], context, "multistart_beta_ion");
    if (j.contains("bounds")) {
        const json& b = j["bounds"];
        if (!b.is_object())
            throw SchemaError(context + ": 'bounds' must be an object");
        for (const auto& [name, range] : b.items()) {
            if (!cfg.bounds.count(name))
                throw SchemaError(context + ".bounds: unknown parameter '" + name + "'");
            if (!range.is_array() || range.size() != 2 || !range[0].is_number() ||
                !range[1].is_number())
                throw SchemaError(context + ".bounds." + name + ": expected [lo, hi]");
            cfg.bounds[name] = {range[0].get<double>(), range[1].get<double>()};
        }
    }
    return cfg;
}

json fit_result_to_json(const FitResult& res) {
    json params = json::object();
    auto arr = res.params.to_array();
    for (std::size_t i = 0; i < arr.size(); ++i)
        params[FreeParams::names()[i]] = arr[i];
    json derived = json::array();
    for (const auto& d : res.derived)
        derived.push_back({{"power_uw", d.power_uw},
                           {"gamma_532", d.gamma_532},
                           {"gamma_ion", d.gamma_ion},
                           {"gamma_rec", d.gamma_rec},
                           {"p_nv0", d.p_nv0},
                           {"c_esr", d.c_esr}});
    return {{"params", params},
            {"cost", res.cost},
            {"per_curve_residuals", res.per_curve_residuals},
            {"active_constraints", res.active_constraints},
            {"start_costs", res.start_costs},
            {"derived", derived},
            {"converged", res.converged},
            {"no_charge_model", res.no_charge_model}};
}

void cmd_fit(RunContext& ctx, bool no_charge_flag) {
    const std::string c = "fit config";
    check_keys(ctx.config, {"traces", "fit", "no_charge"}, c);
    const json& entries = require(ctx.config, "traces", c);
    if (!entries.is_array() || entries.empty())
        throw SchemaError(c + ": 'traces' must be a nonempty array");

    bool no_charge = no_charge_flag;
    if (ctx.config.contains("no_charge")) {
        if (!ctx.config["no_charge"].is_boolean())
            throw SchemaError(c + ": field 'no_charge' must be a boolean");
        no_charge = no_charge || ctx.config["no_charge"].get<bool>();
    }
    FitConfig cfg = parse_fit_config(require(ctx.config, "fit", c), c + ".fit");
    cfg.threads = ctx.threads;

    // Enumerate every missing file before failing.
    std::vector<std::string> missing;
    for (const auto& e : entries) {
        check_keys(e, {"csv", "sidecar"}, c + ".traces[]");
        for (const char* key : {"csv", "sidecar"}) {
            fs::path p = require(e, key, c + ".traces[]").get<std::string>();
            if (!fs::exists(p)) missing.push_back(p.string());
        }
    }
    if (!missing.empty()) {
        std::string msg = "missing trace files:";
        for (const auto& m : missing) msg += " " + m;
        throw IoError(msg);
    }

    std::vector<PLTrace> traces;
    for (const auto& e : entries) {
        RawTrace raw = load_raw_trace(e["csv"].get<std::string>(),
                                      e["sidecar"].get<std::string>());
        traces.push_back(preprocess(raw, cfg));
    }

    FitResult res = no_charge ? fit_no_charge(traces, cfg) : fit_global(traces, cfg);
    write_json_file(ctx, "fit_result.json", fit_result_to_json(res));

    std::vector<std::vector<double>> cost_rows;
    for (std::size_t i = 0; i < res.start_costs.size(); ++i)
        cost_rows.push_back({static_cast<double>(i), res.start_costs[i]});
    write_csv(ctx.out_dir / "start_costs.csv", {"start_index", "cost"}, cost_rows);
    ctx.outputs.push_back("start_costs.csv");

    // Summary row per power, one line per power like the parameter tables.
    std::vector<std::vector<double>> summary;
    for (const auto& d : res.derived)
        summary.push_back({d.power_uw, d.gamma_532, d.gamma_ion, d.gamma_rec,
                           d.p_nv0, d.c_esr});
    write_csv(ctx.out_dir / "summary.csv",
              {"power_uw", "gamma_532_mhz", "gamma_ion_mhz", "gamma_rec_mhz",
               "p_nv0", "c_esr"},
              summary);
    ctx.outputs.push_back("summary.csv");

    write_manifest(ctx, "fit", {{"no_charge", no_charge}});
}

void write_matrix(RunContext& ctx, const std::string& name,
                  const SweepResult& grid, double SweepCell::* field) {
    std::vector<std::string> header = {"gamma_ion_mhz"};
    for (double r : grid.rec_grid) {
        std::ostringstream ss;
        ss.precision(12);
        ss << r;
        header.push_back(ss.str());
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < grid.ion_grid.size(); ++i) {
        std::vector<double> row = {grid.ion_grid[i]};
        for (std::size_t j = 0; j < grid.rec_grid.size(); ++j)
            row.push_back(grid.at(i, j).*field);
        rows.push_back(std::move(row));
    }
    write_csv(ctx.out_dir / name, header, rows);
    ctx.outputs.push_back(name);
}

SweepResult run_sweep(RunContext& ctx, const std::string& c, NVParams* base_out,
                      std::vector<double>* window_out) {
    NVParams base = parse_params(require(ctx.config, "params", c), c + ".params");
    auto ion = parse_grid(ctx.config, "ion_grid", c);
    auto rec = parse_grid(ctx.config, "rec_grid", c);
    std::vector<double> windows = ctx.config.contains("window_grid")
                                      ? parse_grid(ctx.config, "window_grid", c)
                                      : default_window_grid();
    if (base_out) *base_out = base;
    if (window_out) *window_out = windows;
    return sweep_grid(base, ion, rec, windows, ctx.threads);
}

json grids_manifest(const SweepResult& grid, const NVParams& base,
                    const std::vector<double>& windows) {
    json jb;
    to_json(jb, base);
    return {{"ion_grid_mhz", grid.ion_grid},
            {"rec_grid_mhz", grid.rec_grid},
            {"window_grid_ns", windows},
            {"base_params", jb}};
}

void cmd_sweep(RunContext& ctx) {
    const std::string c = "sweep config";
    check_keys(ctx.config, {"params", "ion_grid", "rec_grid", "window_grid"}, c);
    NVParams base;
    std::vector<double> windows;
    SweepResult grid = run_sweep(ctx, c, &base, &windows);

    write_matrix(ctx, "c_esr.csv", grid, &SweepCell::c_esr);
    write_matrix(ctx, "snr.csv", grid, &SweepCell::snr);
    write_matrix(ctx, "p_nv0.csv", grid, &SweepCell::p_nv0);
    write_matrix(ctx, "window_end_ns.csv", grid, &SweepCell::window_end_ns);
    write_manifest(ctx, "sweep", grids_manifest(grid, base, windows));
}

void cmd_decompose(RunContext& ctx) {
    const std::string c = "decompose config";
    check_keys(ctx.config,
               {"params", "ion_grid", "rec_grid", "window_grid", "pnv0_band",
                "scatter_bin_width"},
               c);
    NVParams base;
    std::vector<double> windows;
    SweepResult grid = run_sweep(ctx, c, &base, &windows);
    double band = number_or(ctx.config, "pnv0_band", 0.01, c);
    double bin_width = number_or(ctx.config, "scatter_bin_width", 0.01, c);

    Decomposition d = decompose(base, grid, windows, band);
    json out = {{"c_esr_actual", d.c_esr_actual},
                {"c_esr_no_charge", d.c_esr_no_charge},
                {"c_esr_best_at_same_pnv0", d.c_esr_best_at_same_pnv0},
                {"delta_static", d.delta_static},
                {"delta_dynamic", d.delta_dynamic},
                {"pnv0_band", band}};
    write_json_file(ctx, "decomposition.json", out);

    ContrastScatter sc = contrast_vs_pnv0(grid, bin_width);
    std::vector<std::vector<double>> pts, env;
    for (const auto& p : sc.points) pts.push_back({p.p_nv0, p.c_esr});
    for (const auto& p : sc.envelope) env.push_back({p.p_nv0, p.c_esr});
    write_csv(ctx.out_dir / "scatter.csv", {"p_nv0", "c_esr"}, pts);
    ctx.outputs.push_back("scatter.csv");
    write_csv(ctx.out_dir / "envelope.csv", {"p_nv0", "c_esr"}, env);
    ctx.outputs.push_back("envelope.csv");
    write_manifest(ctx, "decompose", grids_manifest(grid, base, windows));
}

void cmd_kinetics(RunContext& ctx) {
    const std::string c = "kinetics config";
    check_keys(ctx.config, {"decays"}, c);
    const json& entries = require(ctx.config, "decays", c);
    if (!entries.is_array() || entries.empty())
        throw SchemaError(c + ": 'decays' must be a nonempty array");

    json per_decay = json::array();
    std::vector<std::pair<double, double>> rate_vs_power;
    for (const auto& e : entries) {
        check_keys(e, {"csv", "power_uw", "label"}, c + ".decays[]");
        fs::path path = require(e, "csv", c + ".decays[]").get<std::string>();
        CsvTable t = read_csv(path);
        if (t.header != std::vector<std::string>{"time_s", "normalized_pl"})
            throw SchemaError("decay " + path.string() +
                              ": expected header 'time_s,normalized_pl'");
        std::vector<std::pair<double, double>> samples;
        for (const auto& row : t.rows) samples.push_back({row[0], row[1]});
        ExponentialFit f = fit_exponential_decay(samples);

        json entry = {{"csv", path.string()},
                      {"rate_per_s", f.rate},
                      {"amplitude", f.amplitude},
                      {"offset", f.offset},
                      {"residual", f.residual}};
        if (e.contains("label")) entry["label"] = e["label"];
        // The offset of a relaxation toward equilibrium is the equilibrium
        // NV- fraction; split r_tot accordingly when it is a probability.
        if (f.offset >= 0.0 && f.offset <= 1.0) {
            ChargeRates r = split_rates(f.rate, f.offset);
            entry["r_ion_per_s"] = r.r_ion;
            entry["r_rec_per_s"] = r.r_rec;
        }
        if (e.contains("power_uw")) {
            double p = require_number(e, "power_uw", c + ".decays[]");
            entry["power_uw"] = p;
            rate_vs_power.push_back({p, f.rate});
        }
        per_decay.push_back(entry);
    }

    json out = {{"decays", per_decay}};
    if (rate_vs_power.size() >= 3) {
        PowerLawFit pl = fit_power_law(rate_vs_power);
        out["power_law"] = {{"a_per_s_uw2", pl.a},
                            {"b_per_s_uw", pl.b},
                            {"residual", pl.residual}};
    }
    write_json_file(ctx, "kinetics.json", out);
    write_manifest(ctx, "kinetics");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Seven-level NV spin/charge photodynamics toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads_flag;

    app.add_option("--config", config_path, "JSON run configuration")
        ->required()
        ->group("Global");
    app.add_option("--out", out_dir, "Output directory")->group("Global");
    app.add_option("--seed", seed, "Override the config RNG seed")->group("Global");
    app.add_option("--threads", threads_flag, "Worker thread count")->group("Global");

    auto* sub_simulate = app.add_subcommand("simulate", "Time-resolved model PL traces");
    auto* sub_synth = app.add_subcommand("synth", "Synthetic photon-count histograms");
    auto* sub_fit = app.add_subcommand("fit", "Global multi-power trace fit");
    bool no_charge_flag = false;
    sub_fit->add_flag("--no-charge", no_charge_flag,
                      "Freeze ionization and recombination at zero");
    auto* sub_sweep = app.add_subcommand("sweep", "Contrast over a rate grid");
    auto* sub_decompose =
        app.add_subcommand("decompose", "Static/dynamic contrast decomposition");
    auto* sub_kinetics = app.add_subcommand("kinetics", "Dark-decay rate extraction");
    for (auto* sub : {sub_simulate, sub_synth, sub_fit, sub_sweep, sub_decompose,
                      sub_kinetics})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? kExitSchema : kExitOk;
    }

    RunContext ctx;
    try {
        ctx.out_dir = out_dir;
        ctx.seed_override = seed;
        if (threads_flag) {
            ctx.threads = *threads_flag;
        } else if (const char* env = std::getenv("NVPD_THREADS")) {
            ctx.threads = std::atoi(env);
        }
        if (ctx.threads < 1) ctx.threads = 1;

        std::ifstream in(config_path);
        if (!in)
            throw IoError("cannot open config " + config_path);
        std::stringstream buf;
        buf << in.rdbuf();
        ctx.config_hash = fnv1a_hex(buf.str());
        try {
            ctx.config = json::parse(buf.str());
        } catch (const json::exception& e) {
            throw SchemaError(std::string("config: ") + e.what());
        }

        std::error_code ec;
        fs::create_directories(ctx.out_dir, ec);
        if (ec)
            throw IoError("cannot create output directory " + ctx.out_dir.string());

        if (sub_simulate->parsed()) cmd_simulate(ctx);
        else if (sub_synth->parsed()) cmd_synth(ctx);
        else if (sub_fit->parsed()) cmd_fit(ctx, no_charge_flag);
        else if (sub_sweep->parsed()) cmd_sweep(ctx);
        else if (sub_decompose->parsed()) cmd_decompose(ctx);
        else if (sub_kinetics->parsed()) cmd_kinetics(ctx);
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}
