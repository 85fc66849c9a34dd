#include "nvpd/params.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

namespace nvpd {

namespace {

void require_nonnegative(double v, const char* name) {
    if (!(v >= 0) || !std::isfinite(v))
        throw InvalidParams(std::string(name) + " must be a finite nonnegative rate");
}

const nlohmann::json kUnits = {{"rate", "MHz"}, {"time", "ns"}, {"power", "uW"}};

void check_units(const nlohmann::json& j) {
    if (j.contains("units") && j.at("units") != kUnits)
        throw InvalidParams("unexpected units stanza; expected MHz/ns/uW");
}

}  // namespace

void NVParams::validate() const {
    require_nonnegative(gamma_532, "gamma_532");
    require_nonnegative(gamma_es, "gamma_es");
    require_nonnegative(gamma_es1_to_a1, "gamma_es1_to_a1");
    require_nonnegative(gamma_es0_to_a1, "gamma_es0_to_a1");
    require_nonnegative(gamma_a1, "gamma_a1");
    require_nonnegative(gamma_ion, "gamma_ion");
    require_nonnegative(gamma_rec, "gamma_rec");
    require_nonnegative(gamma_es_nv0, "gamma_es_nv0");
    require_nonnegative(gamma_532_nv0, "gamma_532_nv0");
    if (!(p_a1_to_gs1 >= 0 && p_a1_to_gs1 <= 1))
        throw InvalidParams("p_a1_to_gs1 must lie in [0,1]");
}

void PowerScaling::validate() const {
    require_nonnegative(beta_532, "beta_532");
    require_nonnegative(beta_ion, "beta_ion");
    require_nonnegative(beta_rec, "beta_rec");
    if (!(beta_ion2 <= 0) || !std::isfinite(beta_ion2))
        throw InvalidParams("beta_ion2 must be <= 0");
    if (!(beta_rec2 >= 0) || !std::isfinite(beta_rec2))
        throw InvalidParams("beta_rec2 must be >= 0");
}

NVParams at_power(const PowerScaling& scaling, const Intrinsics& in,
                  double power_uw) {
    scaling.validate();
    if (!(power_uw >= 0))
        throw InvalidParams("power must be nonnegative");
    NVParams p;
    p.gamma_532 = scaling.beta_532 * power_uw;
    p.gamma_ion = scaling.beta_ion * power_uw + scaling.beta_ion2 * power_uw * power_uw;
    p.gamma_rec = scaling.beta_rec * power_uw + scaling.beta_rec2 * power_uw * power_uw;
    if (p.gamma_ion < 0)
        throw InvalidParams("gamma_ion(p) < 0: power outside the scaling's range of validity");
    p.gamma_532_nv0 = p.gamma_532 / 3.0;
    p.gamma_es = in.gamma_es;
    p.gamma_es1_to_a1 = in.gamma_es1_to_a1;
    p.gamma_es0_to_a1 = in.gamma_es0_to_a1;
    p.gamma_a1 = in.gamma_a1;
    p.p_a1_to_gs1 = in.p_a1_to_gs1;
    p.gamma_es_nv0 = in.gamma_es_nv0;
    p.validate();
    return p;
}

NVParams params_from_lifetimes(double gamma_es, double es0_tau_ns,
                               double es1_tau_ns, double a1_tau_ns,
                               double gamma_532, double p_a1_to_gs1,
                               double gamma_ion, double gamma_rec,
                               double gamma_es_nv0, double gamma_532_nv0) {
    if (!(es0_tau_ns > 0) || !(es1_tau_ns > 0) || !(a1_tau_ns > 0))
        throw InvalidLifetime("lifetimes must be positive");
    NVParams p;
    p.gamma_es = gamma_es;
    // 1/tau in 1/ns = GHz; 1000/tau is MHz.
    p.gamma_es0_to_a1 = 1000.0 / es0_tau_ns - gamma_es;
    p.gamma_es1_to_a1 = 1000.0 / es1_tau_ns - gamma_es;
    if (p.gamma_es0_to_a1 < -1e-9 || p.gamma_es1_to_a1 < -1e-9)
        throw InvalidLifetime("lifetime shorter than the radiative rate alone allows");
    p.gamma_es0_to_a1 = std::max(p.gamma_es0_to_a1, 0.0);
    p.gamma_es1_to_a1 = std::max(p.gamma_es1_to_a1, 0.0);
    p.gamma_a1 = 1000.0 / a1_tau_ns;
    p.gamma_532 = gamma_532;
    p.p_a1_to_gs1 = p_a1_to_gs1;
    p.gamma_ion = gamma_ion;
    p.gamma_rec = gamma_rec;
    p.gamma_es_nv0 = gamma_es_nv0;
    p.gamma_532_nv0 = gamma_532_nv0 == kTiedNv0Pump ? gamma_532 / 3.0 : gamma_532_nv0;
    p.validate();
    return p;
}

EffectiveLifetimes lifetimes_from_params(const NVParams& p) {
    return {1000.0 / (p.gamma_es + p.gamma_es0_to_a1),
            1000.0 / (p.gamma_es + p.gamma_es1_to_a1),
            1000.0 / p.gamma_a1};
}

void to_json(nlohmann::json& j, const NVParams& p) {
    j = nlohmann::json{{"units", kUnits},
                       {"gamma_532", p.gamma_532},
                       {"gamma_es", p.gamma_es},
                       {"gamma_es1_to_a1", p.gamma_es1_to_a1},
                       {"gamma_es0_to_a1", p.gamma_es0_to_a1},
                       {"gamma_a1", p.gamma_a1},
                       {"p_a1_to_gs1", p.p_a1_to_gs1},
                       {"gamma_ion", p.gamma_ion},
                       {"gamma_rec", p.gamma_rec},
                       {"gamma_es_nv0", p.gamma_es_nv0},
                       {"gamma_532_nv0", p.gamma_532_nv0}};
}

void from_json(const nlohmann::json& j, NVParams& p) {
    check_units(j);
    j.at("gamma_532").get_to(p.gamma_532);
    j.at("gamma_es").get_to(p.gamma_es);
    j.at("gamma_es1_to_a1").get_to(p.gamma_es1_to_a1);
    j.at("gamma_es0_to_a1").get_to(p.gamma_es0_to_a1);
    j.at("gamma_a1").get_to(p.gamma_a1);
    j.at("p_a1_to_gs1").get_to(p.p_a1_to_gs1);
    j.at("gamma_ion").get_to(p.gamma_ion);
    j.at("gamma_rec").get_to(p.gamma_rec);
    j.at("gamma_es_nv0").get_to(p.gamma_es_nv0);
    j.at("gamma_532_nv0").get_to(p.gamma_532_nv0);
    p.validate();
}

void to_json(nlohmann::json& j, const PowerScaling& s) {
    j = nlohmann::json{{"units", kUnits},
                       {"beta_532", s.beta_532},
                       {"beta_ion", s.beta_ion},
                       {"beta_ion2", s.beta_ion2},
                       {"beta_rec", s.beta_rec},
                       {"beta_rec2", s.beta_rec2}};
}

void from_json(const nlohmann::json& j, PowerScaling& s) {
    check_units(j);
    j.at("beta_532").get_to(s.beta_532);
    j.at("beta_ion").get_to(s.beta_ion);
    j.at("beta_ion2").get_to(s.beta_ion2);
    j.at("beta_rec").get_to(s.beta_rec);
    j.at("beta_rec2").get_to(s.beta_rec2);
    s.validate();
}

void to_json(nlohmann::json& j, const Intrinsics& in) {
    j = nlohmann::json{{"units", kUnits},
                       {"gamma_es", in.gamma_es},
                       {"gamma_es1_to_a1", in.gamma_es1_to_a1},
                       {"gamma_es0_to_a1", in.gamma_es0_to_a1},
                       {"gamma_a1", in.gamma_a1},
                       {"p_a1_to_gs1", in.p_a1_to_gs1},
                       {"gamma_es_nv0", in.gamma_es_nv0}};
}

void from_json(const nlohmann::json& j, Intrinsics& in) {
    check_units(j);
    j.at("gamma_es").get_to(in.gamma_es);
    j.at("gamma_es1_to_a1").get_to(in.gamma_es1_to_a1);
    j.at("gamma_es0_to_a1").get_to(in.gamma_es0_to_a1);
    j.at("gamma_a1").get_to(in.gamma_a1);
    j.at("p_a1_to_gs1").get_to(in.p_a1_to_gs1);
    j.at("gamma_es_nv0").get_to(in.gamma_es_nv0);
}

}  // namespace nvpd
