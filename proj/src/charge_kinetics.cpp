#include "nvpd/charge_kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nvpd {

void ChargeState::validate() const {
    if (!(rho_minus >= 0 && rho_minus <= 1) || !(rho_zero >= 0 && rho_zero <= 1))
        throw InvalidParams("charge populations must lie in [0,1]");
    if (std::abs(rho_minus + rho_zero - 1.0) > 1e-12)
        throw InvalidParams("charge populations must sum to 1");
}

void ChargeRates::validate() const {
    if (!(r_ion >= 0) || !(r_rec >= 0) || !std::isfinite(r_ion) || !std::isfinite(r_rec))
        throw InvalidParams("charge rates must be finite and nonnegative");
}

void FourLevelParams::validate() const {
    for (double g : {g12, g21, g23, g34, g43, g41})
        if (!(g >= 0) || !std::isfinite(g))
            throw InvalidParams("4-level rates must be finite and nonnegative");
}

ChargeState evolve_charge(const ChargeRates& rates, const ChargeState& init,
                          double t_s) {
    rates.validate();
    init.validate();
    if (!(t_s >= 0))
        throw InvalidParams("time must be nonnegative");
    double r_tot = total_rate(rates);
    if (r_tot == 0) return init;
    double rho_inf = rates.r_rec / r_tot;
    double rho = rho_inf + (init.rho_minus - rho_inf) * std::exp(-r_tot * t_s);
    return {rho, 1.0 - rho};
}

ChargeRates split_rates(double r_tot, double rho_minus_equilibrium) {
    if (r_tot < 0)
        throw InvalidParams("total rate must be nonnegative");
    if (!(rho_minus_equilibrium >= 0 && rho_minus_equilibrium <= 1))
        throw InvalidParams("equilibrium fraction must lie in [0,1]");
    double r_rec = r_tot * rho_minus_equilibrium;
    return {r_tot - r_rec, r_rec};
}

namespace {

// For a fixed rate, solve the 2x2 linear least squares in (amplitude, offset)
// and return the squared residual.
double varpro_eval(std::span<const std::pair<double, double>> s, double rate,
                   double* amplitude, double* offset) {
    double see = 0, se1 = 0, s11 = 0, sev = 0, s1v = 0;
    for (const auto& [t, v] : s) {
        double e = std::exp(-rate * t);
        see += e * e;
        se1 += e;
        s11 += 1.0;
        sev += e * v;
        s1v += v;
    }
    double det = see * s11 - se1 * se1;
    double a, c;
    if (std::abs(det) < 1e-14 * std::max(see * s11, 1.0)) {
        // Basis degenerates to a constant (rate ~ 0 or samples collapse).
        a = 0;
        c = s1v / s11;
    } else {
        a = (sev * s11 - s1v * se1) / det;
        c = (see * s1v - se1 * sev) / det;
    }
    double ss = 0;
    for (const auto& [t, v] : s) {
        double r = a * std::exp(-rate * t) + c - v;
        ss += r * r;
    }
    if (amplitude) *amplitude = a;
    if (offset) *offset = c;
    return ss;
}

}  // namespace

ExponentialFit fit_exponential_decay(
    std::span<const std::pair<double, double>> samples) {
    if (samples.size() < 4)
        throw InvalidParams("need at least 4 samples to fit A exp(-rt) + C");
    double min_dt = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!std::isfinite(samples[i].first) || !std::isfinite(samples[i].second))
            throw InvalidParams("non-finite sample");
        if (i > 0) {
            double dt = samples[i].first - samples[i - 1].first;
            if (!(dt > 0))
                throw InvalidParams("sample times must be strictly ascending");
            min_dt = std::min(min_dt, dt);
        }
    }
    double span_t = samples.back().first - samples.front().first;

    // Rate 0 baseline: pure constant model.
    double mean = 0;
    for (const auto& [t, v] : samples) mean += v;
    mean /= static_cast<double>(samples.size());
    double ss0 = 0;
    for (const auto& [t, v] : samples) ss0 += (v - mean) * (v - mean);
    ExponentialFit best{0.0, 0.0, mean, std::sqrt(ss0)};
    double best_ss = ss0;

    // Log-spaced scan over plausible rates, then golden-section refinement.
    const int n_scan = 200;
    double lo = std::log(0.01 / span_t);
    double hi = std::log(20.0 / min_dt);
    double best_x = lo;
    for (int i = 0; i < n_scan; ++i) {
        double x = lo + (hi - lo) * i / (n_scan - 1);
        double ss = varpro_eval(samples, std::exp(x), nullptr, nullptr);
        if (ss < best_ss) {
            best_ss = ss;
            best_x = x;
        }
    }
    if (best_ss < ss0 * (1.0 - 1e-12) || ss0 == 0) {
        double step = (hi - lo) / (n_scan - 1);
        double a = best_x - step, b = best_x + step;
        const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = varpro_eval(samples, std::exp(c), nullptr, nullptr);
        double fd = varpro_eval(samples, std::exp(d), nullptr, nullptr);
        for (int it = 0; it < 120 && (b - a) > 1e-14; ++it) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = varpro_eval(samples, std::exp(c), nullptr, nullptr);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = varpro_eval(samples, std::exp(d), nullptr, nullptr);
            }
        }
        double rate = std::exp((a + b) / 2);
        ExponentialFit f;
        f.rate = rate;
        double ss = varpro_eval(samples, rate, &f.amplitude, &f.offset);
        f.residual = std::sqrt(ss);
        if (ss <= best_ss || ss < ss0) best = f;
    }
    return best;
}

PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points) {
    if (points.size() < 3)
        throw InvalidParams("need at least 3 points for the quadratic power law");
    double s44 = 0, s32 = 0, s22 = 0, s4v = 0, s2v = 0;
    double pmin = std::numeric_limits<double>::infinity(), pmax = 0;
    for (const auto& [p, v] : points) {
        if (!(p > 0))
            throw InvalidParams("powers must be positive");
        if (!std::isfinite(v))
            throw InvalidParams("non-finite rate value");
        pmin = std::min(pmin, p);
        pmax = std::max(pmax, p);
        double p2 = p * p;
        s44 += p2 * p2;
        s32 += p2 * p;
        s22 += p2;
        s4v += p2 * v;
        s2v += p * v;
    }
    double det = s44 * s22 - s32 * s32;
    if (pmax == pmin || std::abs(det) < 1e-12 * s44 * s22)
        throw InvalidParams("rank-deficient design: powers do not separate p^2 from p");

    auto residual = [&](double a, double b) {
        double ss = 0;
        for (const auto& [p, v] : points) {
            double r = a * p * p + b * p - v;
            ss += r * r;
        }
        return ss;
    };

    // Unconstrained solution, then active-set enumeration for a, b >= 0.
    double a = (s4v * s22 - s2v * s32) / det;
    double b = (s44 * s2v - s32 * s4v) / det;
    if (a < 0 || b < 0) {
        double a_only = std::max(s4v / s44, 0.0);
        double b_only = std::max(s2v / s22, 0.0);
        double ra = residual(a_only, 0.0);
        double rb = residual(0.0, b_only);
        if (ra <= rb) {
            a = a_only;
            b = 0.0;
        } else {
            a = 0.0;
            b = b_only;
        }
    }
    return {a, b, std::sqrt(residual(a, b))};
}

ReducedRates reduce_four_level(const FourLevelParams& p) {
    p.validate();
    double d_minus = p.g12 + p.g21;
    double d_zero = p.g34 + p.g43;
    if (!(d_minus > 0) || !(d_zero > 0))
        throw InvalidParams("need g12 + g21 > 0 and g34 + g43 > 0");
    ReducedRates out;
    // MHz -> s^-1.
    out.rates.r_ion = 1e6 * p.g23 * p.g12 / d_minus;
    out.rates.r_rec = 1e6 * p.g41 * p.g34 / d_zero;
    out.valid = std::max(p.g23, p.g41) < 0.01 * std::min(d_minus, d_zero);
    return out;
}

Eigen::Matrix4d four_level_matrix(const FourLevelParams& p) {
    p.validate();
    Eigen::Matrix4d m;
    m << -p.g12, p.g21, 0, p.g41,
         p.g12, -(p.g21 + p.g23), 0, 0,
         0, p.g23, -p.g34, p.g43,
         0, 0, p.g34, -(p.g43 + p.g41);
    return m;
}

}  // namespace nvpd
