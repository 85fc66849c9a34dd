#include "nvpd/trace.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "nvpd/errors.hpp"
#include "nvpd/global_fit.hpp"

namespace nvpd {

namespace {

constexpr double kMhzNs = 1e-3;

double tail_mean(std::span<const double> v, double tail_fraction) {
    std::size_t n = v.size();
    std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(n * tail_fraction));
    double s = 0;
    for (std::size_t i = n - k; i < n; ++i) s += v[i];
    return s / static_cast<double>(k);
}

// Initial charge split at the start of the readout pulse: the steady state of
// the same pulse (same power), or all NV- when charge conversion is absent.
double initial_p_nv0(const NVParams& p) {
    if (p.gamma_ion > 0 || p.gamma_rec > 0) {
        StateVector ss = steady_state(build_rate_matrix(p));
        return ss[kEsNv0] + ss[kGsNv0];
    }
    return 0.0;
}

}  // namespace

void RawTrace::validate() const {
    if (!(bin_width_ps > 0))
        throw InvalidParams("bin width must be positive");
    for (double c : counts)
        if (!(c >= 0) || !std::isfinite(c))
            throw InvalidParams("counts must be finite and nonnegative");
}

std::vector<double> block_average(std::span<const double> v, int block) {
    if (block <= 0)
        throw InvalidParams("smoothing block must be positive");
    std::vector<double> out;
    out.reserve(v.size() / block);
    for (std::size_t i = 0; i + block <= v.size(); i += block) {
        double s = 0;
        for (int k = 0; k < block; ++k) s += v[i + k];
        out.push_back(s / block);
    }
    return out;
}

std::size_t locate_onset(std::span<const double> smoothed,
                         double threshold_fraction, double tail_fraction) {
    if (smoothed.size() < 2)
        throw PreprocessError("trace too short for onset detection");
    const double thr = threshold_fraction * tail_mean(smoothed, tail_fraction);

    bool constant = true;
    for (std::size_t i = 1; i < smoothed.size(); ++i)
        if (smoothed[i] != smoothed[0]) {
            constant = false;
            break;
        }
    if (constant)
        throw PreprocessError("no threshold crossing: trace is constant");

    std::size_t start;
    if (smoothed[0] > thr) {
        start = 0;
    } else {
        std::size_t i = 1;
        while (i < smoothed.size() && !(smoothed[i - 1] <= thr && smoothed[i] > thr)) ++i;
        if (i == smoothed.size())
            throw PreprocessError("no threshold crossing");
        start = i;
    }
    for (std::size_t j = start; j + 1 < smoothed.size(); ++j)
        if (smoothed[j + 1] < smoothed[j]) return j;
    throw PreprocessError("derivative never turns negative after threshold (AOM rise not found)",
                          true);
}

PLTrace preprocess(const RawTrace& raw, const FitConfig& cfg) {
    raw.validate();
    auto smoothed = block_average(raw.counts, cfg.smoothing_block);
    if (smoothed.size() < 4)
        throw PreprocessError("trace shorter than four smoothing blocks");
    std::size_t t0 = locate_onset(smoothed, cfg.t0_threshold, cfg.tail_fraction);
    std::vector<double> trimmed(smoothed.begin() + t0, smoothed.end());
    if (trimmed.size() < 2)
        throw PreprocessError("no samples after the detected onset");
    double tail = tail_mean(trimmed, cfg.tail_fraction);
    if (!(tail > 0))
        throw PreprocessError("tail level is zero, cannot normalize");
    const double dt_ns = raw.bin_width_ps * 1e-3 * cfg.smoothing_block;
    PLTrace out;
    out.power_uw = raw.power_uw;
    out.spin_init = raw.spin_init;
    out.times_ns.reserve(trimmed.size());
    out.values.reserve(trimmed.size());
    for (std::size_t i = 0; i < trimmed.size(); ++i) {
        out.times_ns.push_back(static_cast<double>(i) * dt_ns);
        out.values.push_back(trimmed[i] / tail);
    }
    return out;
}

std::vector<double> model_block_averages(const NVParams& params,
                                         const StateVector& init, double dt_ns,
                                         std::size_t n_points) {
    RateMatrix rm = build_rate_matrix(params);
    Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
    a.topLeftCorner<7, 7>() = rm.m;
    a.bottomLeftCorner<1, 7>() = pl_weights(params).transpose();
    Eigen::Matrix<double, 8, 8> step = (a * (dt_ns * kMhzNs)).exp();
    Eigen::Matrix<double, 8, 1> z = Eigen::Matrix<double, 8, 1>::Zero();
    z.head<7>() = init;
    std::vector<double> out;
    out.reserve(n_points);
    double prev_integral = 0;
    for (std::size_t i = 0; i < n_points; ++i) {
        z = step * z;
        out.push_back((z[7] - prev_integral) / (dt_ns * kMhzNs));
        prev_integral = z[7];
    }
    return out;
}

RawTrace synthesize(const NVParams& params, const SynthesisSpec& spec) {
    params.validate();
    if (!(spec.photon_scale > 0))
        throw InvalidParams("photon_scale must be positive");
    if (!(spec.bin_width_ps > 0) || !(spec.duration_ns >= 0))
        throw InvalidParams("invalid synthesis geometry");

    const double bin_ns = spec.bin_width_ps * 1e-3;
    const std::size_t n_bins = static_cast<std::size_t>(spec.duration_ns / bin_ns);
    const std::size_t n_pre =
        static_cast<std::size_t>(std::llround(spec.pre_trigger_ns / bin_ns));

    RawTrace out;
    out.bin_width_ps = spec.bin_width_ps;
    out.power_uw = spec.power_uw;
    out.spin_init = spec.spin_init;
    out.counts.assign(n_pre, 0.0);
    out.counts.reserve(n_pre + n_bins);
    if (n_bins == 0) return out;

    double p_nv0 = initial_p_nv0(params);
    StateVector init = build_initial_state(spec.spin_init, 1.0 - p_nv0, p_nv0);
    double norm = steady_pl(params, 1.0 - p_nv0, p_nv0);
    auto averages = model_block_averages(params, init, bin_ns, n_bins);

    std::mt19937_64 rng(spec.seed);
    for (double avg : averages) {
        double mean = spec.photon_scale * (avg / norm) * bin_ns;
        if (spec.noiseless) {
            out.counts.push_back(std::max(mean, 0.0));
        } else if (mean <= 0) {
            out.counts.push_back(0.0);
        } else {
            std::poisson_distribution<long long> pois(mean);
            out.counts.push_back(static_cast<double>(pois(rng)));
        }
    }
    return out;
}

RawTrace synthesize(const PowerScaling& scaling, const Intrinsics& intrinsics,
                    const SynthesisSpec& spec) {
    return synthesize(at_power(scaling, intrinsics, spec.power_uw), spec);
}

std::vector<double> model_curve(const NVParams& params, SpinInit spin_init,
                                double p_nv_minus, double p_nv0, double dt_ns,
                                std::size_t n_points, const FitConfig& cfg) {
    StateVector init = build_initial_state(spin_init, p_nv_minus, p_nv0);
    for (std::size_t margin = 16; margin <= 256; margin *= 2) {
        auto samples = model_block_averages(params, init, dt_ns, n_points + margin);
        std::size_t k0 = locate_onset(samples, cfg.t0_threshold, cfg.tail_fraction);
        if (k0 + n_points > samples.size()) continue;  // onset too late, widen margin
        std::vector<double> out(samples.begin() + k0, samples.begin() + k0 + n_points);
        double tail = tail_mean(out, cfg.tail_fraction);
        if (!(tail > 0))
            throw NormalizationError("model curve tail is zero");
        for (double& v : out) v /= tail;
        return out;
    }
    throw PreprocessError("model onset not found within margin", true);
}

}  // namespace nvpd
