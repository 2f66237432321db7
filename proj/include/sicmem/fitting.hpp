#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

// Deterministic least-squares fits: stretched exponential decay and the
// exponential decay used by randomized benchmarking.

namespace sicmem {

struct DecayFit {
    double t2 = 0.0;        // s
    double exponent = 1.0;  // stretch exponent n
    double residual = 0.0;  // rms misfit
};

// Least-squares fit of L(t) = exp[-(t/T2)^n]. Points after the curve first
// drops below `floor` are ignored (late-time revivals carry no decay
// information); the exponent is constrained to the [0.5, 4] sanity window.
inline DecayFit fit_stretched(const std::vector<double>& times, const std::vector<double>& values,
                              double floor = 0.01) {
    if (times.size() != values.size() || times.size() < 4)
        throw std::invalid_argument("fit_stretched: need matching grids with >= 4 points");

    std::size_t last = values.size();
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] < floor) {
            last = i + 1;
            break;
        }
    double min_l = 1.0;
    for (std::size_t i = 0; i < last; ++i) min_l = std::min(min_l, values[i]);
    if (min_l > std::exp(-1.0))
        throw std::invalid_argument("insufficient decay: curve stays above 1/e");

    // initial estimate: ln(-ln L) is linear in ln t
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < last; ++i) {
        if (times[i] <= 0.0 || values[i] <= 0.02 || values[i] >= 0.95) continue;
        const double x = std::log(times[i]);
        const double y = std::log(-std::log(values[i]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    double n0 = 1.5, t0 = times[last / 2];
    if (m >= 2 && std::abs(m * sxx - sx * sx) > 1e-300) {
        n0 = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        n0 = std::clamp(n0, 0.5, 4.0);
        t0 = std::exp(-(sy / m - n0 * sx / m) / n0);
        if (!(t0 > 0.0) || !std::isfinite(t0)) t0 = times[last / 2];
    }

    // Gauss-Newton on (ln T2, ln n) with step halving
    double lt = std::log(t0), ln = std::log(n0);
    auto sse = [&](double lt_, double ln_) {
        const double t2 = std::exp(lt_), n = std::exp(ln_);
        double s = 0.0;
        for (std::size_t i = 0; i < last; ++i) {
            const double model = std::exp(-std::pow(times[i] / t2, n));
            s += (model - values[i]) * (model - values[i]);
        }
        return s;
    };
    double best = sse(lt, ln);
    for (int iter = 0; iter < 200; ++iter) {
        const double t2 = std::exp(lt), n = std::exp(ln);
        double g0 = 0, g1 = 0, h00 = 0, h01 = 0, h11 = 0;
        for (std::size_t i = 0; i < last; ++i) {
            if (times[i] <= 0.0) continue;
            const double u = std::pow(times[i] / t2, n);
            const double model = std::exp(-u);
            const double r = model - values[i];
            // d model / d lnT2 = model * u * n ; d model / d ln n = -model * u * ln u * n
            const double d0 = model * u * n;
            const double d1 = -model * u * std::log(std::max(u, 1e-300)) * n;
            g0 += r * d0;
            g1 += r * d1;
            h00 += d0 * d0;
            h01 += d0 * d1;
            h11 += d1 * d1;
        }
        const double det = h00 * h11 - h01 * h01;
        if (std::abs(det) < 1e-300) break;
        double s0 = -(h11 * g0 - h01 * g1) / det;
        double s1 = -(-h01 * g0 + h00 * g1) / det;
        bool improved = false;
        for (int halve = 0; halve < 20; ++halve) {
            const double nlt = lt + s0, nln = std::clamp(ln + s1, std::log(0.5), std::log(4.0));
            const double val = sse(nlt, nln);
            if (val < best - 1e-18) {
                lt = nlt;
                ln = nln;
                best = val;
                improved = true;
                break;
            }
            s0 *= 0.5;
            s1 *= 0.5;
        }
        if (!improved) break;
    }

    DecayFit fit;
    fit.t2 = std::exp(lt);
    fit.exponent = std::exp(ln);
    fit.residual = std::sqrt(best / static_cast<double>(last));
    return fit;
}

}  // namespace sicmem
