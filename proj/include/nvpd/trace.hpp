#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvpd/params.hpp"
#include "nvpd/rate_model.hpp"

namespace nvpd {

// Photon-count histogram as acquired (or synthesized): fixed-width bins,
// counts per bin. Counts are stored as doubles so the noiseless limit of the
// generator (Poisson mean used directly) is representable.
struct RawTrace {
    double bin_width_ps = 128.0;
    std::vector<double> counts;
    double power_uw = 0;
    SpinInit spin_init = SpinInit::ms0;

    void validate() const;
};

// Preprocessed, normalized PL trace: times ascending from 0 at the detected
// pulse onset, tail mean normalized to 1.
struct PLTrace {
    std::vector<double> times_ns;
    std::vector<double> values;
    double power_uw = 0;
    SpinInit spin_init = SpinInit::ms0;
};

struct FitConfig;

// Block-average `block` consecutive values (trailing partial block dropped).
std::vector<double> block_average(std::span<const double> v, int block);

// Find the t = 0 index on a smoothed trace: first sample above
// threshold_fraction * tail level, then the first discrete-derivative sign
// change from positive to negative. Throws PreprocessError when the trace
// never crosses the threshold or never turns over (AOM rise not found).
std::size_t locate_onset(std::span<const double> smoothed,
                         double threshold_fraction, double tail_fraction);

// Smoothing + onset detection + tail normalization per the fit config.
PLTrace preprocess(const RawTrace& raw, const FitConfig& cfg);

struct SynthesisSpec {
    double power_uw = 0;
    SpinInit spin_init = SpinInit::ms0;
    double duration_ns = 2000;
    double photon_scale = 1000;   // expected counts per ns at PL = 1
    std::uint64_t seed = 0;
    double pre_trigger_ns = 0;    // dark padding before the pulse onset
    bool noiseless = false;       // emit Poisson means instead of draws
    double bin_width_ps = 128.0;
};

// Generate a raw trace whose per-bin Poisson mean is the exact integral of the
// model PL over the bin, starting from the steady-state charge split with the
// requested spin initialization.
RawTrace synthesize(const NVParams& params, const SynthesisSpec& spec);
RawTrace synthesize(const PowerScaling& scaling, const Intrinsics& intrinsics,
                    const SynthesisSpec& spec);

// Model PL sampled as block averages on a uniform grid of width dt_ns,
// starting at the model pulse onset detected with the same rule as
// preprocess() and normalized by its own tail mean. `p_nv_minus`/`p_nv0` give
// the initial charge split. This is the curve the global fit compares to a
// preprocessed trace of the same length.
std::vector<double> model_curve(const NVParams& params, SpinInit spin_init,
                                double p_nv_minus, double p_nv0, double dt_ns,
                                std::size_t n_points, const FitConfig& cfg);

// Raw block-average samples (no alignment or normalization); helper shared by
// synthesize and model_curve.
std::vector<double> model_block_averages(const NVParams& params,
                                         const StateVector& init, double dt_ns,
                                         std::size_t n_points);

}  // namespace nvpd
