#include "nvpd/optim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace nvpd {

namespace {

void clip(std::vector<double>& x, const std::vector<double>& lo,
          const std::vector<double>& hi) {
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], lo[i], hi[i]);
}

struct Simplex {
    std::vector<std::vector<double>> pts;
    std::vector<double> fv;
};

NelderMeadResult run_once(const std::function<double(const std::vector<double>&)>& f,
                          const std::vector<double>& start,
                          const std::vector<double>& lo,
                          const std::vector<double>& hi,
                          const NelderMeadOptions& opts, int* evals_budget) {
    const std::size_t n = start.size();
    Simplex s;
    s.pts.assign(n + 1, start);
    for (std::size_t i = 0; i < n; ++i) {
        double range = hi[i] - lo[i];
        double step = opts.initial_step_rel * range;
        if (step == 0) step = 1e-8;
        s.pts[i + 1][i] += step;
        if (s.pts[i + 1][i] > hi[i]) s.pts[i + 1][i] = start[i] - step;
        clip(s.pts[i + 1], lo, hi);
    }
    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        return f(x);
    };
    s.fv.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) s.fv[i] = eval(s.pts[i]);

    auto order = [&]() {
        std::vector<std::size_t> idx(n + 1);
        for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return s.fv[a] < s.fv[b]; });
        Simplex t;
        t.pts.reserve(n + 1);
        t.fv.reserve(n + 1);
        for (auto i : idx) {
            t.pts.push_back(std::move(s.pts[i]));
            t.fv.push_back(s.fv[i]);
        }
        s = std::move(t);
    };

    NelderMeadResult res;
    while (evals < *evals_budget) {
        order();
        // Convergence: simplex diameter and function spread.
        double fspread = std::abs(s.fv[n] - s.fv[0]);
        double xdiam = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double span = 0;
            for (std::size_t k = 1; k <= n; ++k)
                span = std::max(span, std::abs(s.pts[k][i] - s.pts[0][i]));
            double range = std::max(hi[i] - lo[i], 1e-300);
            xdiam = std::max(xdiam, span / range);
        }
        if (fspread <= opts.ftol * (std::abs(s.fv[0]) + 1e-300) || xdiam <= opts.xtol) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i) centroid[i] += s.pts[k][i] / double(n);

        auto along = [&](double coeff) {
            std::vector<double> x(n);
            for (std::size_t i = 0; i < n; ++i)
                x[i] = centroid[i] + coeff * (centroid[i] - s.pts[n][i]);
            clip(x, lo, hi);
            return x;
        };

        auto xr = along(1.0);
        double fr = eval(xr);
        if (fr < s.fv[0]) {
            auto xe = along(2.0);
            double fe = eval(xe);
            if (fe < fr) {
                s.pts[n] = std::move(xe);
                s.fv[n] = fe;
            } else {
                s.pts[n] = std::move(xr);
                s.fv[n] = fr;
            }
        } else if (fr < s.fv[n - 1]) {
            s.pts[n] = std::move(xr);
            s.fv[n] = fr;
        } else {
            bool outside = fr < s.fv[n];
            auto xc = along(outside ? 0.5 : -0.5);
            double fc = eval(xc);
            if (fc < std::min(fr, s.fv[n])) {
                s.pts[n] = std::move(xc);
                s.fv[n] = fc;
            } else {
                // Shrink toward the best vertex.
                for (std::size_t k = 1; k <= n; ++k) {
                    for (std::size_t i = 0; i < n; ++i)
                        s.pts[k][i] = s.pts[0][i] + 0.5 * (s.pts[k][i] - s.pts[0][i]);
                    clip(s.pts[k], lo, hi);
                    s.fv[k] = eval(s.pts[k]);
                }
            }
        }
    }
    order();
    *evals_budget -= evals;
    res.x = s.pts[0];
    res.fmin = s.fv[0];
    res.evaluations = evals;
    return res;
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, const std::vector<double>& lo,
                             const std::vector<double>& hi,
                             const NelderMeadOptions& opts) {
    clip(x0, lo, hi);
    int budget = opts.max_evaluations;
    NelderMeadOptions local = opts;
    NelderMeadResult best = run_once(f, x0, lo, hi, local, &budget);
    for (int r = 1; r < opts.restarts && budget > 0; ++r) {
        // Restart with a smaller simplex around the current optimum.
        local.initial_step_rel = opts.initial_step_rel / std::pow(4.0, r);
        NelderMeadResult next = run_once(f, best.x, lo, hi, local, &budget);
        next.evaluations += best.evaluations;
        if (next.fmin >= best.fmin * (1.0 - 1e-13) && r > 1) {
            if (next.fmin < best.fmin) best = next;
            break;
        }
        if (next.fmin < best.fmin) best = next;
    }
    return best;
}

NelderMeadResult levenberg_marquardt(
    const std::function<std::vector<double>(const std::vector<double>&)>& residuals,
    std::vector<double> x0, const std::vector<double>& lo,
    const std::vector<double>& hi, const LevenbergMarquardtOptions& opts) {
    clip(x0, lo, hi);
    const std::size_t n = x0.size();
    auto r0 = residuals(x0);
    const std::size_t m = r0.size();
    Eigen::VectorXd r = Eigen::Map<Eigen::VectorXd>(r0.data(), m);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    NelderMeadResult res;
    res.evaluations = 1;

    for (int it = 0; it < opts.max_iterations; ++it) {
        Eigen::MatrixXd jac(m, n);
        for (std::size_t j = 0; j < n; ++j) {
            double range = std::max(hi[j] - lo[j], 1e-12);
            double h = opts.step_rel * range;
            std::vector<double> xp = x0;
            xp[j] += h;
            if (xp[j] > hi[j]) {
                xp[j] = x0[j] - h;
                h = -h;
            }
            auto rp = residuals(xp);
            ++res.evaluations;
            for (std::size_t i = 0; i < m; ++i) jac(i, j) = (rp[i] - r[i]) / h;
        }
        Eigen::MatrixXd jtj = jac.transpose() * jac;
        Eigen::VectorXd g = jac.transpose() * r;
        bool improved = false;
        for (int tries = 0; tries < 12; ++tries) {
            Eigen::MatrixXd a = jtj;
            for (std::size_t j = 0; j < n; ++j)
                a(j, j) += lambda * std::max(jtj(j, j), 1e-12);
            Eigen::VectorXd step = a.ldlt().solve(-g);
            std::vector<double> xt = x0;
            for (std::size_t j = 0; j < n; ++j) xt[j] += step[j];
            clip(xt, lo, hi);
            auto rt = residuals(xt);
            ++res.evaluations;
            double ct = Eigen::Map<Eigen::VectorXd>(rt.data(), m).squaredNorm();
            if (ct < cost) {
                x0 = std::move(xt);
                r = Eigen::Map<Eigen::VectorXd>(rt.data(), m);
                double prev = cost;
                cost = ct;
                lambda = std::max(lambda / 4.0, 1e-12);
                improved = true;
                if (prev - cost <= opts.ftol * (cost + 1e-300)) it = opts.max_iterations;
                break;
            }
            lambda *= 8.0;
        }
        if (!improved) break;
    }
    res.x = std::move(x0);
    res.fmin = cost;
    res.converged = true;
    return res;
}

}  // namespace nvpd
