#include "nvpd/rate_model.hpp"

#include <cmath>
#include <limits>
#include <unsupported/Eigen/MatrixFunctions>

#include "nvpd/errors.hpp"

namespace nvpd {

namespace {

// MHz * ns -> dimensionless phase.
constexpr double kMhzNs = 1e-3;

void check_finite(const Matrix7& m) {
    if (!m.allFinite())
        throw InvalidParams("rate matrix has non-finite entries");
}

// Normalize a null vector into a probability vector.
StateVector normalize_null_vector(Eigen::Matrix<double, 7, 1> v) {
    double s = v.sum();
    if (s < 0) v = -v;
    s = std::abs(s);
    if (s < 1e-300)
        throw AmbiguousSteadyState("null vector has zero total population");
    v /= s;
    for (int i = 0; i < 7; ++i) {
        if (v[i] < -1e-7)
            throw AmbiguousSteadyState("null vector is not sign-definite");
        v[i] = std::max(v[i], 0.0);
    }
    v /= v.sum();
    return v;
}

}  // namespace

void RateMatrix::validate() const {
    check_finite(m);
    for (int j = 0; j < 7; ++j) {
        double colsum = m.col(j).sum();
        if (std::abs(colsum) > 1e-12 * std::max(1.0, m.col(j).cwiseAbs().maxCoeff()))
            throw InvalidParams("rate matrix column does not sum to zero");
        for (int i = 0; i < 7; ++i) {
            if (i == j && m(i, j) > 0)
                throw InvalidParams("positive diagonal entry in generator");
            if (i != j && m(i, j) < 0)
                throw InvalidParams("negative off-diagonal entry in generator");
        }
    }
}

RateMatrix build_rate_matrix(const NVParams& p) {
    p.validate();
    RateMatrix rm;
    Matrix7& m = rm.m;
    m.setZero();

    m(kEs1, kEs1) = -(p.gamma_es + p.gamma_es1_to_a1 + p.gamma_ion);
    m(kEs1, kGs1) = p.gamma_532;

    m(kEs0, kEs0) = -(p.gamma_es + p.gamma_es0_to_a1 + p.gamma_ion);
    m(kEs0, kGs0) = p.gamma_532;

    m(kA1, kEs1) = p.gamma_es1_to_a1;
    m(kA1, kEs0) = p.gamma_es0_to_a1;
    m(kA1, kA1) = -p.gamma_a1;

    m(kGs1, kEs1) = p.gamma_es;
    m(kGs1, kA1) = p.p_a1_to_gs1 * p.gamma_a1;
    m(kGs1, kGs1) = -p.gamma_532;
    m(kGs1, kEsNv0) = 2.0 * p.gamma_rec / 3.0;

    m(kGs0, kEs0) = p.gamma_es;
    m(kGs0, kA1) = (1.0 - p.p_a1_to_gs1) * p.gamma_a1;
    m(kGs0, kGs0) = -p.gamma_532;
    m(kGs0, kEsNv0) = p.gamma_rec / 3.0;

    m(kEsNv0, kEsNv0) = -(p.gamma_rec + p.gamma_es_nv0);
    m(kEsNv0, kGsNv0) = p.gamma_532_nv0;

    m(kGsNv0, kEs1) = p.gamma_ion;
    m(kGsNv0, kEs0) = p.gamma_ion;
    m(kGsNv0, kEsNv0) = p.gamma_es_nv0;
    m(kGsNv0, kGsNv0) = -p.gamma_532_nv0;

    return rm;
}

StateVector steady_state(const RateMatrix& rm) {
    check_finite(rm.m);
    Eigen::FullPivLU<Matrix7> lu(rm.m);
    // Rank threshold relative to the largest rate in the generator.
    double scale = rm.m.cwiseAbs().maxCoeff();
    if (scale == 0)
        throw AmbiguousSteadyState(
            "zero generator: every state is stationary (all manifolds decoupled)");
    lu.setThreshold(1e-10);
    const long dim = lu.dimensionOfKernel();
    if (dim == 0)
        throw AmbiguousSteadyState("generator has numerically empty null space");
    if (dim > 1) {
        std::string msg = "steady state is ambiguous: null space dimension " +
                          std::to_string(dim);
        // Name the common decoupling for diagnosis.
        bool ion = rm.m(kGsNv0, kEs1) > 0;
        bool rec = rm.m(kGs1, kEsNv0) > 0;
        if (!ion && !rec)
            msg += " (NV- block {ES1,ES0,A1,GS1,GS0} and NV0 block {ES_NV0,GS_NV0}"
                   " are decoupled: gamma_ion = gamma_rec = 0)";
        throw AmbiguousSteadyState(msg);
    }
    return normalize_null_vector(lu.kernel().col(0));
}

StateVector steady_state_nv_minus(const NVParams& p) {
    RateMatrix rm = build_rate_matrix(p);
    Eigen::Matrix<double, 5, 5> block = rm.m.topLeftCorner<5, 5>();
    // Remove ionization loss so the NV- block is a proper generator on its own.
    block(kEs1, kEs1) += p.gamma_ion;
    block(kEs0, kEs0) += p.gamma_ion;
    Eigen::FullPivLU<Eigen::Matrix<double, 5, 5>> lu(block);
    lu.setThreshold(1e-10);
    if (lu.dimensionOfKernel() != 1)
        throw AmbiguousSteadyState(
            "NV- block steady state is ambiguous (null space dimension " +
            std::to_string(lu.dimensionOfKernel()) + ")");
    Eigen::Matrix<double, 7, 1> full = Eigen::Matrix<double, 7, 1>::Zero();
    full.head<5>() = lu.kernel().col(0);
    return normalize_null_vector(full);
}

StateVector steady_state_for(const NVParams& p, double p_nv_minus, double p_nv0) {
    if (std::abs(p_nv_minus + p_nv0 - 1.0) > 1e-9)
        throw InvalidParams("charge split must sum to 1");
    if (p.gamma_ion > 0 || p.gamma_rec > 0)
        return steady_state(build_rate_matrix(p));
    StateVector out = StateVector::Zero();
    if (p_nv_minus > 0) out += p_nv_minus * steady_state_nv_minus(p);
    if (p_nv0 > 0) {
        // Isolated NV0 two-level block.
        double tot = p.gamma_532_nv0 + p.gamma_es_nv0;
        if (tot <= 0)
            throw AmbiguousSteadyState("NV0 block has no internal rates");
        out[kEsNv0] += p_nv0 * p.gamma_532_nv0 / tot;
        out[kGsNv0] += p_nv0 * p.gamma_es_nv0 / tot;
    }
    return out;
}

std::vector<StateVector> evolve(const RateMatrix& rm, const StateVector& init,
                                std::span<const double> times_ns) {
    check_finite(rm.m);
    std::vector<StateVector> out;
    out.reserve(times_ns.size());
    double prev_t = 0.0;
    StateVector rho = init;
    double cached_dt = std::numeric_limits<double>::quiet_NaN();
    Matrix7 cached_exp;
    for (double t : times_ns) {
        if (!(t >= 0) || t < prev_t)
            throw InvalidParams("times must be nonnegative and ascending");
        double dt = t - prev_t;
        if (dt > 0) {
            if (dt != cached_dt) {
                cached_exp = (rm.m * (dt * kMhzNs)).exp();
                cached_dt = dt;
            }
            rho = cached_exp * rho;
        }
        out.push_back(rho);
        prev_t = t;
    }
    return out;
}

StateVector build_initial_state(SpinInit spin_init, double p_nv_minus,
                                double p_nv0) {
    if (!(p_nv_minus >= 0 && p_nv_minus <= 1) || !(p_nv0 >= 0 && p_nv0 <= 1))
        throw InvalidParams("charge probabilities must lie in [0,1]");
    if (std::abs(p_nv_minus + p_nv0 - 1.0) > 1e-9)
        throw InvalidParams("charge probabilities must sum to 1");
    StateVector v = StateVector::Zero();
    v[spin_init == SpinInit::ms0 ? kGs0 : kGs1] = p_nv_minus;
    v[kGsNv0] = p_nv0;
    return v;
}

Eigen::Matrix<double, 7, 1> pl_weights(const NVParams& p) {
    Eigen::Matrix<double, 7, 1> w = Eigen::Matrix<double, 7, 1>::Zero();
    w[kEs1] = p.gamma_es;
    w[kEs0] = p.gamma_es;
    w[kEsNv0] = p.gamma_es_nv0;
    return w;
}

double pl_value(const NVParams& p, const StateVector& state) {
    return pl_weights(p).dot(state);
}

double steady_pl(const NVParams& p, double p_nv_minus, double p_nv0) {
    StateVector ss;
    try {
        ss = steady_state_for(p, p_nv_minus, p_nv0);
    } catch (const AmbiguousSteadyState& e) {
        throw NormalizationError(std::string("steady-state PL undefined: ") + e.what());
    }
    double v = pl_value(p, ss);
    if (v <= 0)
        throw NormalizationError("steady-state PL is zero, cannot normalize");
    return v;
}

ModelTrace pl_trace(const NVParams& p, const StateVector& init,
                    std::span<const double> times_ns) {
    RateMatrix rm = build_rate_matrix(p);
    double p_nv0 = init[kEsNv0] + init[kGsNv0];
    double norm = steady_pl(p, 1.0 - p_nv0, p_nv0);
    auto states = evolve(rm, init, times_ns);
    ModelTrace tr;
    tr.times_ns.assign(times_ns.begin(), times_ns.end());
    tr.raw.reserve(states.size());
    tr.values.reserve(states.size());
    auto w = pl_weights(p);
    for (const auto& s : states) {
        double raw = w.dot(s);
        tr.raw.push_back(raw);
        tr.values.push_back(raw / norm);
    }
    return tr;
}

std::vector<double> pl_integrals(const RateMatrix& rm,
                                 const Eigen::Matrix<double, 7, 1>& weights,
                                 const StateVector& init,
                                 std::span<const double> window_ends_ns) {
    check_finite(rm.m);
    // Augmented system z = (rho, I) with dI/dt = w . rho; the integral is the
    // last component of exp(A t) (rho0, 0).
    Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
    a.topLeftCorner<7, 7>() = rm.m;
    a.bottomLeftCorner<1, 7>() = weights.transpose();
    Eigen::Matrix<double, 8, 1> z = Eigen::Matrix<double, 8, 1>::Zero();
    z.head<7>() = init;
    std::vector<double> out;
    out.reserve(window_ends_ns.size());
    double prev_t = 0.0;
    double cached_dt = std::numeric_limits<double>::quiet_NaN();
    Eigen::Matrix<double, 8, 8> cached_exp;
    for (double t : window_ends_ns) {
        if (!(t >= 0) || t < prev_t)
            throw InvalidParams("window ends must be nonnegative and ascending");
        double dt = t - prev_t;
        if (dt > 0) {
            if (dt != cached_dt) {
                cached_exp = (a * (dt * kMhzNs)).exp();
                cached_dt = dt;
            }
            z = cached_exp * z;
        }
        // Integral accumulates in dimensionless (MHz * ns * 1e-3) units; report
        // in MHz * ns so the value matches trapezoid integration of PL in ns.
        out.push_back(z[7] / kMhzNs);
        prev_t = t;
    }
    return out;
}

}  // namespace nvpd
