#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sicmem/hyperfine.hpp"

// Conditional nuclear dynamics under dynamical decoupling: dip spectra,
// resonance prediction, conditional-rotation gate design and two-qubit gate
// fidelity.
//
// Convention: N pi pulses with half-spacing tau, pulses at t_j = (2j-1) tau,
// total time 2 N tau. The basic 4-tau unit seen by the nucleus is
// V0 = U0(tau) U1(2 tau) U0(tau) (electron starting in branch 0), V1 with the
// roles swapped. The stored rotation angle phi is attributed per 2-tau period
// (half the unit angle), so the accumulated conditional angle is N phi and
// M = 1 - (1 - n0.n1) sin^2(N phi / 2) reproduces the propagator product
// Re Tr[(V1^(N/2))^dag V0^(N/2)] / 2 exactly.

namespace sicmem {

// SU(2) rotation as U = w I - i v.sigma with w^2 + |v|^2 = 1.
struct Su2 {
    double w = 1.0;
    Eigen::Vector3d v{0.0, 0.0, 0.0};

    static Su2 identity() { return {}; }

    // exp(-i t (w_par Iz + w_perp Ix))
    static Su2 from_fields(double w_par, double w_perp, double t) {
        const double omega = std::hypot(w_par, w_perp);
        if (omega == 0.0) return identity();
        const double half = 0.5 * omega * t;
        const double s = std::sin(half) / omega;
        return {std::cos(half), {s * w_perp, 0.0, s * w_par}};
    }

    static Su2 rotation(const Eigen::Vector3d& axis, double angle) {
        const double half = 0.5 * angle;
        return {std::cos(half), std::sin(half) * axis.normalized()};
    }

    Su2 operator*(const Su2& o) const {
        return {w * o.w - v.dot(o.v), w * o.v + o.w * v + v.cross(o.v)};
    }

    Eigen::Matrix2cd matrix() const {
        using namespace std::complex_literals;
        Eigen::Matrix2cd m;
        m << w - 1i * v.z(), -1i * v.x() - v.y(), -1i * v.x() + v.y(), w + 1i * v.z();
        return m;
    }
};

// Scalars that fix a bath spin's conditional dynamics.
struct NuclearSpinParams {
    double a_par = 0.0;   // rad/s
    double a_perp = 0.0;  // rad/s
    double larmor = 0.0;  // rad/s, signed
};

inline NuclearSpinParams nuclear_params(const BathSpin& spin, const ElectronModel& electron) {
    if (!spin.attached) throw std::logic_error("bath spin has no hyperfine tensor attached");
    return {spin.a_par, spin.a_perp, electron.larmor(species_for(spin.element))};
}

// Per-period conditional rotation: unit axes for the two electron branches,
// shared angle (canonical branch phi in [0, pi]), and the axis dot product.
struct ConditionalRotation {
    Eigen::Vector3d axis0{0.0, 0.0, 1.0};
    Eigen::Vector3d axis1{0.0, 0.0, 1.0};
    double angle = 0.0;  // rad per 2-tau period
    double dot = 1.0;
};

inline ConditionalRotation conditional_rotation(const NuclearSpinParams& nucleus,
                                                const ElectronModel& electron, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("conditional_rotation: tau must be positive");
    const EffectiveFields h0 = effective_fields(nucleus.a_par, nucleus.a_perp, nucleus.larmor, 0);
    const EffectiveFields h1 =
        effective_fields(nucleus.a_par, nucleus.a_perp, nucleus.larmor, electron.branch);

    const Su2 u0t = Su2::from_fields(h0.w_par, h0.w_perp, tau);
    const Su2 u1t = Su2::from_fields(h1.w_par, h1.w_perp, tau);
    const Su2 u0tt = Su2::from_fields(h0.w_par, h0.w_perp, 2.0 * tau);
    const Su2 u1tt = Su2::from_fields(h1.w_par, h1.w_perp, 2.0 * tau);

    Su2 v0 = u0t * u1tt * u0t;
    Su2 v1 = u1t * u0tt * u1t;
    // Tr V0 = Tr V1 by cyclicity, so the canonical branch flips together.
    if (v0.w < 0.0) {
        v0.w = -v0.w;
        v0.v = -v0.v;
        v1.w = -v1.w;
        v1.v = -v1.v;
    }

    ConditionalRotation cr;
    const double n0 = v0.v.norm();
    const double n1 = v1.v.norm();
    cr.angle = std::atan2(n0, v0.w);
    const double angle1 = std::atan2(n1, v1.w);
    if (std::abs(cr.angle - angle1) > 1e-9)
        throw std::logic_error("conditional_rotation: branch angles disagree");
    if (n0 > 1e-14 && n1 > 1e-14) {
        cr.axis0 = v0.v / n0;
        cr.axis1 = v1.v / n1;
        cr.dot = std::clamp(cr.axis0.dot(cr.axis1), -1.0, 1.0);
    }
    return cr;
}

// Electron x-magnetization after N pulses at half-spacing tau against an
// unpolarized nucleus. Closed form from the per-period conditional rotation.
inline double magnetization(const NuclearSpinParams& nucleus, const ElectronModel& electron,
                            int n_pulses, double tau) {
    if (n_pulses < 0 || n_pulses % 2 != 0)
        throw std::invalid_argument("magnetization: incomplete DD period (N must be even)");
    if (n_pulses == 0) return 1.0;
    const ConditionalRotation cr = conditional_rotation(nucleus, electron, tau);
    const double s = std::sin(0.5 * n_pulses * cr.angle);
    return 1.0 - (1.0 - cr.dot) * s * s;
}

// tau_k ~ (2k+1) pi / (2 w_L + A_par) with magnitudes of the precession
// frequencies; exact dip positions come from scanning the magnetization.
inline double resonance_tau(int k, double larmor, double a_par) {
    if (k < 0) throw std::invalid_argument("resonance_tau: negative order");
    const double denom = 2.0 * std::abs(larmor) + a_par;
    if (std::abs(denom) < 1e-30 || denom < 0.0)
        throw std::invalid_argument("resonance_tau: degenerate denominator");
    return (2 * k + 1) * pi / denom;
}

struct NMRSpectrum {
    std::vector<double> taus;    // s
    std::vector<double> values;  // M in [-1, 1]
    int n_pulses = 0;
    int branch = -1;
};

// Product of single-spin magnetizations over the bath (nuclei-nuclei
// interactions neglected on the timescale of one sequence).
inline NMRSpectrum bath_spectrum(const BathConfiguration& bath, const std::vector<double>& taus,
                                 int n_pulses, const ElectronModel& electron) {
    for (std::size_t i = 1; i < taus.size(); ++i)
        if (taus[i] <= taus[i - 1])
            throw std::invalid_argument("bath_spectrum: tau grid must be strictly increasing");
    std::vector<NuclearSpinParams> params;
    params.reserve(bath.spins.size());
    for (const auto& s : bath.spins) params.push_back(nuclear_params(s, electron));

    NMRSpectrum spec;
    spec.taus = taus;
    spec.n_pulses = n_pulses;
    spec.branch = electron.branch;
    spec.values.resize(taus.size(), 1.0);
    for (std::size_t i = 0; i < taus.size(); ++i) {
        double m = 1.0;
        for (const auto& p : params) m *= magnetization(p, electron, n_pulses, taus[i]);
        spec.values[i] = m;
    }
    return spec;
}

struct GateDesign {
    int k = 0;               // resonance order
    int n_pulses = 0;        // even
    double tau = 0.0;        // s
    double theta_total = 0.0;  // rad, accumulated conditional angle N phi
    double axis_dot = 1.0;
    double gate_time = 0.0;  // 2 N tau
    double fidelity = 0.0;   // intrinsic unitary fidelity
    ConditionalRotation rotation;
};

// Average gate fidelity of the achieved conditional evolution
//   U = |0><0| x R(n0, N phi) + |1><1| x R(n1, N phi)
// against the ideal conditional rotation |0><0| x R(x, theta) +
// |1><1| x R(-x, theta), maximized over the single-qubit z-phase freedoms
// (nuclear pre/post z rotations and the relative electron phase).
//
// With Za, Zb the nuclear z gauges, each block trace reduces to
// A cos s + B sin s + C cos u + D sin u in s = (a+b)/2, u = (a-b)/2, and the
// electron phase aligns the two block traces, so
// F = (S^2 + dim) / (dim^2 + dim), S = max_{s,u} |T0| + |T1|, dim = 4.
inline double conditional_gate_fidelity(const Su2& w0, const Su2& w1, double theta_target) {
    const double ct = std::cos(0.5 * theta_target);
    const double st = std::sin(0.5 * theta_target);
    // T_alpha/2 = A cos s + B sin s + C cos u + D sin u
    const double coef[2][4] = {
        {ct * w0.w, -ct * w0.v.z(), st * w0.v.x(), st * w0.v.y()},
        {ct * w1.w, -ct * w1.v.z(), -st * w1.v.x(), -st * w1.v.y()},
    };
    auto block_sum = [&](double s, double u) {
        const double cs = std::cos(s), ss = std::sin(s), cu = std::cos(u), su = std::sin(u);
        double total = 0.0;
        for (const auto& c : coef)
            total += std::abs(c[0] * cs + c[1] * ss + c[2] * cu + c[3] * su);
        return 2.0 * total;
    };

    const int grid = 96;
    double best = 0.0, bs = 0.0, bu = 0.0;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            const double s = two_pi * i / grid;
            const double u = two_pi * j / grid;
            const double f = block_sum(s, u);
            if (f > best) {
                best = f;
                bs = s;
                bu = u;
            }
        }
    double step = two_pi / grid;
    for (int round = 0; round < 6; ++round) {
        step *= 0.25;
        for (int di = -2; di <= 2; ++di)
            for (int dj = -2; dj <= 2; ++dj) {
                const double f = block_sum(bs + di * step, bu + dj * step);
                if (f > best) {
                    best = f;
                    bs += di * step;
                    bu += dj * step;
                }
            }
    }
    return (best * best + 4.0) / 20.0;
}

inline double gate_fidelity(const GateDesign& design, const NuclearSpinParams& nucleus,
                            const ElectronModel& electron) {
    if (design.n_pulses <= 0 || design.tau <= 0.0)
        throw std::invalid_argument("gate_fidelity: invalid design");
    const ConditionalRotation cr = conditional_rotation(nucleus, electron, design.tau);
    const double total = design.n_pulses * cr.angle;
    const Su2 w0 = Su2::rotation(cr.axis0, total);
    const Su2 w1 = Su2::rotation(cr.axis1, total);
    return conditional_gate_fidelity(w0, w1, design.theta_total > 0.0 ? design.theta_total : total);
}

// Pulse count suggested by the weak-coupling estimate theta ~ A_perp N / w_L.
inline double linear_pulse_estimate(double theta_target, double larmor, double a_perp) {
    if (a_perp == 0.0) return std::numeric_limits<double>::infinity();
    return theta_target * std::abs(larmor) / std::abs(a_perp);
}

// Candidate conditional rotation at exactly resonance order k: fine-scan tau
// around the order for the most anti-parallel axes, then pick the even pulse
// count whose accumulated angle sits closest to theta_target within T_max.
inline std::optional<GateDesign> design_gate_at_order(const NuclearSpinParams& nucleus,
                                                      const ElectronModel& electron,
                                                      double theta_target, int k, double t_max,
                                                      int scan_points = 201) {
    if (theta_target <= 0.0 || theta_target > pi)
        throw std::invalid_argument("design_gate: theta_target must be in (0, pi]");
    if (t_max <= 0.0) throw std::invalid_argument("design_gate: t_max must be positive");
    const EffectiveFields h1 =
        effective_fields(nucleus.a_par, nucleus.a_perp, nucleus.larmor, electron.branch);
    if (h1.w_perp == 0.0) return std::nullopt;  // no conditional axis
    const double denom = std::abs(nucleus.larmor) + std::hypot(h1.w_par, h1.w_perp);
    if (denom <= 0.0) return std::nullopt;

    const double half_window = pi / denom;
    const double center = (2 * k + 1) * pi / denom;
    const double lo = std::max(center - half_window, 0.02 * half_window);
    const double hi = center + half_window;

    auto scan = [&](double a, double b, int pts, double& tau_best, double& dot_best) {
        for (int i = 0; i < pts; ++i) {
            const double tau = a + (b - a) * i / (pts - 1);
            const ConditionalRotation cr = conditional_rotation(nucleus, electron, tau);
            if (cr.dot < dot_best) {
                dot_best = cr.dot;
                tau_best = tau;
            }
        }
    };
    double tau_star = center, dot_star = 2.0;
    scan(lo, hi, scan_points, tau_star, dot_star);
    const double step = (hi - lo) / (scan_points - 1);
    scan(std::max(tau_star - step, 0.2 * step), tau_star + step, 41, tau_star, dot_star);

    const ConditionalRotation cr = conditional_rotation(nucleus, electron, tau_star);
    if (cr.angle < 1e-12) return std::nullopt;
    const long n_fit = static_cast<long>(std::floor(t_max / (2.0 * tau_star)));
    const long n_cap = n_fit - (n_fit % 2);
    if (n_cap < 2) return std::nullopt;
    long n = std::clamp(std::lround(theta_target / cr.angle / 2.0) * 2, 2l, n_cap);
    // a neighboring even count can sit closer to the target angle
    for (long cand : {n - 2, n + 2}) {
        if (cand >= 2 && cand <= n_cap &&
            std::abs(cand * cr.angle - theta_target) < std::abs(n * cr.angle - theta_target))
            n = cand;
    }

    GateDesign d;
    d.k = k;
    d.n_pulses = static_cast<int>(n);
    d.tau = tau_star;
    d.theta_total = n * cr.angle;
    d.axis_dot = cr.dot;
    d.gate_time = 2.0 * n * tau_star;
    d.rotation = cr;
    const Su2 rot0 = Su2::rotation(cr.axis0, d.theta_total);
    const Su2 rot1 = Su2::rotation(cr.axis1, d.theta_total);
    d.fidelity = conditional_gate_fidelity(rot0, rot1, theta_target);
    return d;
}

// Best design over resonance orders k <= k_max, ranked by intrinsic fidelity.
inline std::optional<GateDesign> design_gate(const NuclearSpinParams& nucleus,
                                             const ElectronModel& electron, double theta_target,
                                             int k_max, double t_max, int scan_points = 201) {
    std::optional<GateDesign> best;
    for (int k = 0; k <= k_max; ++k) {
        const auto d = design_gate_at_order(nucleus, electron, theta_target, k, t_max, scan_points);
        if (d && (!best || d->fidelity > best->fidelity)) best = d;
    }
    return best;
}

// Pulse sequence description for coherence experiments. XY8 phases only add
// robustness to pulse errors, which are not modelled; the schedule is still
// exportable for hardware use.
enum class SequenceKind { Ramsey, Hahn, Cpmg };

struct PulseSequence {
    SequenceKind kind = SequenceKind::Ramsey;
    int n_pulses = 0;  // 0 for Ramsey, 1 for Hahn, even for CPMG/XY8
    std::string phase_label = "";

    void validate() const {
        switch (kind) {
            case SequenceKind::Ramsey:
                if (n_pulses != 0) throw std::invalid_argument("Ramsey takes no pulses");
                break;
            case SequenceKind::Hahn:
                if (n_pulses != 1) throw std::invalid_argument("Hahn echo has exactly one pulse");
                break;
            case SequenceKind::Cpmg:
                if (n_pulses < 2 || n_pulses % 2 != 0)
                    throw std::invalid_argument("CPMG pulse count must be even and >= 2");
                break;
        }
    }

    // pulse times as fractions of the total evolution time
    std::vector<double> pulse_fractions() const {
        validate();
        std::vector<double> f;
        for (int j = 1; j <= n_pulses; ++j) f.push_back((2.0 * j - 1.0) / (2.0 * n_pulses));
        return f;
    }
};

inline PulseSequence make_ramsey() { return {SequenceKind::Ramsey, 0, ""}; }
inline PulseSequence make_hahn() { return {SequenceKind::Hahn, 1, ""}; }
inline PulseSequence make_cpmg(int n_pulses) { return {SequenceKind::Cpmg, n_pulses, "CPMG"}; }
inline PulseSequence make_xy8(int repeats) { return {SequenceKind::Cpmg, 8 * repeats, "XY8"}; }

struct PulseEvent {
    double time = 0.0;  // s
    char phase = 'X';
};

// Explicit schedule at total time t; XY8-labelled sequences get the
// X Y X Y Y X Y X phase pattern, everything else plain X.
inline std::vector<PulseEvent> pulse_schedule(const PulseSequence& seq, double total_time) {
    static const char xy8[8] = {'X', 'Y', 'X', 'Y', 'Y', 'X', 'Y', 'X'};
    std::vector<PulseEvent> events;
    const auto fractions = seq.pulse_fractions();
    for (std::size_t j = 0; j < fractions.size(); ++j) {
        const char phase = seq.phase_label == "XY8" ? xy8[j % 8] : 'X';
        events.push_back({fractions[j] * total_time, phase});
    }
    return events;
}

}  // namespace sicmem
