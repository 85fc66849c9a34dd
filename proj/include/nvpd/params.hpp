#pragma once

#include <nlohmann/json_fwd.hpp>

#include "nvpd/errors.hpp"

namespace nvpd {

// Transition rates of the seven-level model. Rates in MHz, times in ns,
// powers in uW throughout the library.
struct NVParams {
    double gamma_532 = 0;         // NV- ground -> excited pumping, both spin branches
    double gamma_es = 0;          // NV- excited -> ground radiative decay
    double gamma_es1_to_a1 = 0;   // ES1 -> A1 intersystem crossing
    double gamma_es0_to_a1 = 0;   // ES0 -> A1 intersystem crossing
    double gamma_a1 = 0;          // singlet decay (1 / A1 lifetime)
    double p_a1_to_gs1 = 0;       // branching ratio of singlet decay into GS1
    double gamma_ion = 0;         // ionization from each NV- excited state
    double gamma_rec = 0;         // recombination from ES_NV0 into NV- ground states
    double gamma_es_nv0 = 0;      // NV0 excited -> ground decay
    double gamma_532_nv0 = 0;     // NV0 ground -> excited pumping

    // Throws InvalidParams on a negative rate or branching ratio outside [0,1].
    void validate() const;
};

// Intrinsic (power-independent) rates shared across all pump powers.
struct Intrinsics {
    double gamma_es = 0;
    double gamma_es1_to_a1 = 0;
    double gamma_es0_to_a1 = 0;
    double gamma_a1 = 0;
    double p_a1_to_gs1 = 0;
    double gamma_es_nv0 = 0;
};

// Pump-power scaling of the photo-induced rates:
//   gamma_532(p) = beta_532 * p
//   gamma_ion(p) = beta_ion * p + beta_ion2 * p^2   (beta_ion2 <= 0)
//   gamma_rec(p) = beta_rec * p + beta_rec2 * p^2   (beta_rec2 >= 0)
struct PowerScaling {
    double beta_532 = 0;   // MHz/uW
    double beta_ion = 0;   // MHz/uW
    double beta_ion2 = 0;  // MHz/uW^2, <= 0
    double beta_rec = 0;   // MHz/uW
    double beta_rec2 = 0;  // MHz/uW^2, >= 0

    void validate() const;
};

// Build NVParams at a given power. gamma_532_nv0 is tied to gamma_532 / 3.
// Throws InvalidParams if a scaled rate comes out negative (power outside the
// scaling's range of validity).
NVParams at_power(const PowerScaling& scaling, const Intrinsics& intrinsics,
                  double power_uw);

// Convert tabulated effective lifetimes into ISC/singlet rates:
//   gamma_es0_to_a1 = 1/es0_tau - gamma_es, etc. (lifetimes in ns, 1/tau in GHz
//   so the conversion 1000/tau yields MHz).
// Throws InvalidLifetime when a lifetime is shorter than 1/gamma_es.
NVParams params_from_lifetimes(double gamma_es, double es0_tau_ns,
                               double es1_tau_ns, double a1_tau_ns,
                               double gamma_532, double p_a1_to_gs1,
                               double gamma_ion, double gamma_rec,
                               double gamma_es_nv0, double gamma_532_nv0);

// Tie gamma_532_nv0 = gamma_532 / 3 (Table-S2 constraint mode); pass as the
// last argument of params_from_lifetimes.
inline constexpr double kTiedNv0Pump = -1.0;

struct EffectiveLifetimes {
    double es0_tau_ns;
    double es1_tau_ns;
    double a1_tau_ns;
};

EffectiveLifetimes lifetimes_from_params(const NVParams& p);

// JSON serialization with snake_case keys and a "units" stanza.
void to_json(nlohmann::json& j, const NVParams& p);
void from_json(const nlohmann::json& j, NVParams& p);
void to_json(nlohmann::json& j, const PowerScaling& s);
void from_json(const nlohmann::json& j, PowerScaling& s);
void to_json(nlohmann::json& j, const Intrinsics& in);
void from_json(const nlohmann::json& j, Intrinsics& in);

}  // namespace nvpd
