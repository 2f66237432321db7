#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "sicmem/constants.hpp"
#include "sicmem/rng.hpp"

// Density-matrix simulation of the strongly coupled electron-nuclear register:
// selective gates, algorithmic cooling, the entangling circuit, state
// tomography, the PPT entanglement test, and ODMR rendering.
//
// Basis: qubit 0 is the electron pseudospin {m_s = 0, m_s = -1}, qubits 1..
// are nuclear spins {up, down}; index bits run electron-first.

namespace sicmem {

using complexd = std::complex<double>;

struct NoiseModel {
    double p_gate = 0.0;          // depolarizing probability per touched qubit per gate
    double reinit_fidelity = 1.0; // electron polarization after optical reinit
    double readout_error = 0.0;   // probability of flipping a sampled outcome

    void validate() const {
        for (double p : {p_gate, reinit_fidelity, readout_error})
            if (p < 0.0 || p > 1.0) throw std::invalid_argument("noise probability outside [0, 1]");
    }
};

namespace reg_detail {

inline int qubit_count(const Eigen::MatrixXcd& rho) {
    const int dim = static_cast<int>(rho.rows());
    if (rho.cols() != dim || (dim != 2 && dim != 4 && dim != 8))
        throw std::invalid_argument("register state must be a 2-, 4- or 8-dim density matrix");
    return dim == 2 ? 1 : (dim == 4 ? 2 : 3);
}

}  // namespace reg_detail

inline void validate_state(const Eigen::MatrixXcd& rho) {
    reg_detail::qubit_count(rho);
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("density matrix is not Hermitian");
    if (std::abs(rho.trace().real() - 1.0) > 1e-10 || std::abs(rho.trace().imag()) > 1e-10)
        throw std::invalid_argument("density matrix trace is not 1");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
    if (es.eigenvalues().minCoeff() < -1e-8)
        throw std::invalid_argument("density matrix is not positive semidefinite");
}

// |0...0> with the given qubit count
inline Eigen::MatrixXcd ground_state(int qubits) {
    const int dim = 1 << qubits;
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim, dim);
    rho(0, 0) = 1.0;
    return rho;
}

inline Eigen::MatrixXcd maximally_mixed(int qubits) {
    const int dim = 1 << qubits;
    return Eigen::MatrixXcd::Identity(dim, dim) / static_cast<double>(dim);
}

// single-qubit rotation exp(-i theta/2 (x sx + y sy + z sz))
inline Eigen::Matrix2cd axis_rotation(const Eigen::Vector3d& axis, double theta) {
    using namespace std::complex_literals;
    const Eigen::Vector3d n = axis.normalized();
    const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
    Eigen::Matrix2cd u;
    u << c - 1i * s * n.z(), (-1i * n.x() - n.y()) * s, (-1i * n.x() + n.y()) * s,
        c + 1i * s * n.z();
    return u;
}

// Embed a 2x2 operator on `target`, optionally conditioned on `control` being
// in `control_value`; identity on the unsatisfied branch.
inline Eigen::MatrixXcd embed_gate(int qubits, int target, const Eigen::Matrix2cd& u,
                                   int control = -1, int control_value = 1) {
    const int dim = 1 << qubits;
    Eigen::MatrixXcd full = Eigen::MatrixXcd::Zero(dim, dim);
    const int tbit = qubits - 1 - target;  // qubit 0 is the most significant bit
    const int cbit = control < 0 ? -1 : qubits - 1 - control;
    for (int i = 0; i < dim; ++i) {
        if (cbit >= 0 && ((i >> cbit) & 1) != control_value) {
            full(i, i) = 1.0;
            continue;
        }
        const int it = (i >> tbit) & 1;
        for (int jt = 0; jt < 2; ++jt) {
            const int j = (i & ~(1 << tbit)) | (jt << tbit);
            full(j, i) = u(jt, it);
        }
    }
    return full;
}

// Trace out one qubit; the result orders the remaining qubits unchanged.
inline Eigen::MatrixXcd partial_trace_qubit(const Eigen::MatrixXcd& rho, int qubit) {
    const int qubits = reg_detail::qubit_count(rho);
    const int dim = 1 << qubits;
    const int bit = qubits - 1 - qubit;
    const int rdim = dim / 2;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(rdim, rdim);
    auto expand = [&](int r) {  // reduced index -> full index with qubit bit 0
        const int low = r & ((1 << bit) - 1);
        const int high = r >> bit;
        return (high << (bit + 1)) | low;
    };
    for (int i = 0; i < rdim; ++i)
        for (int j = 0; j < rdim; ++j) {
            const int fi = expand(i), fj = expand(j);
            out(i, j) = rho(fi, fj) + rho(fi | (1 << bit), fj | (1 << bit));
        }
    return out;
}

// rho -> (1 - p) rho + p (I/2 x Tr_q rho)
inline Eigen::MatrixXcd depolarize_qubit(const Eigen::MatrixXcd& rho, int qubit, double p) {
    if (p == 0.0) return rho;
    const int qubits = reg_detail::qubit_count(rho);
    const int dim = 1 << qubits;
    const int bit = qubits - 1 - qubit;
    const Eigen::MatrixXcd reduced = partial_trace_qubit(rho, qubit);
    Eigen::MatrixXcd mixed = Eigen::MatrixXcd::Zero(dim, dim);
    auto expand = [&](int r) {
        const int low = r & ((1 << bit) - 1);
        const int high = r >> bit;
        return (high << (bit + 1)) | low;
    };
    const int rdim = dim / 2;
    for (int i = 0; i < rdim; ++i)
        for (int j = 0; j < rdim; ++j)
            for (int b = 0; b < 2; ++b)
                mixed(expand(i) | (b << bit), expand(j) | (b << bit)) = 0.5 * reduced(i, j);
    return (1.0 - p) * rho + p * mixed;
}

struct GateOp {
    enum class Kind { ElectronRot, NuclearRot, CeRotN, CnRotE, Swap } kind = Kind::ElectronRot;
    double theta = 0.0;
    Eigen::Vector3d axis{1.0, 0.0, 0.0};
    int nucleus = 1;        // target/control nuclear qubit index
    int control_value = 1;  // required control-qubit state
};

inline Eigen::MatrixXcd gate_unitary(const GateOp& gate, int qubits) {
    const Eigen::Matrix2cd r = axis_rotation(gate.axis, gate.theta);
    switch (gate.kind) {
        case GateOp::Kind::ElectronRot: return embed_gate(qubits, 0, r);
        case GateOp::Kind::NuclearRot: return embed_gate(qubits, gate.nucleus, r);
        case GateOp::Kind::CeRotN:
            return embed_gate(qubits, gate.nucleus, r, 0, gate.control_value);
        case GateOp::Kind::CnRotE:
            return embed_gate(qubits, 0, r, gate.nucleus, gate.control_value);
        case GateOp::Kind::Swap: {
            // three alternating controlled-NOTs
            const Eigen::Matrix2cd x = axis_rotation({1.0, 0.0, 0.0}, pi);
            const Eigen::MatrixXcd cen = embed_gate(qubits, gate.nucleus, x, 0, 1);
            const Eigen::MatrixXcd cne = embed_gate(qubits, 0, x, gate.nucleus, 1);
            return cen * cne * cen;
        }
    }
    throw std::logic_error("unreachable");
}

inline std::vector<int> touched_qubits(const GateOp& gate) {
    switch (gate.kind) {
        case GateOp::Kind::ElectronRot: return {0};
        case GateOp::Kind::NuclearRot: return {gate.nucleus};
        default: return {0, gate.nucleus};
    }
}

// U rho U^dag followed by the gate's depolarizing channel on touched qubits.
inline Eigen::MatrixXcd apply_gate(const Eigen::MatrixXcd& rho, const GateOp& gate,
                                   const NoiseModel& noise = {}) {
    const int qubits = reg_detail::qubit_count(rho);
    if (gate.kind != GateOp::Kind::ElectronRot &&
        (gate.nucleus < 1 || gate.nucleus >= qubits))
        throw std::invalid_argument("gate nucleus index outside the register");
    const Eigen::MatrixXcd u = gate_unitary(gate, qubits);
    Eigen::MatrixXcd out = u * rho * u.adjoint();
    for (int q : touched_qubits(gate)) out = depolarize_qubit(out, q, noise.p_gate);
    return out;
}

// Replace the electron marginal with (f |0><0| + (1-f) I/2), preserving the
// nuclear marginal.
inline Eigen::MatrixXcd optical_reinit_electron(const Eigen::MatrixXcd& rho,
                                                double reinit_fidelity = 1.0) {
    const int qubits = reg_detail::qubit_count(rho);
    const Eigen::MatrixXcd nuclear = partial_trace_qubit(rho, 0);
    const int rdim = static_cast<int>(nuclear.rows());
    const int dim = 1 << qubits;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
    const double p0 = reinit_fidelity + (1.0 - reinit_fidelity) * 0.5;
    out.topLeftCorner(rdim, rdim) = p0 * nuclear;
    out.bottomRightCorner(rdim, rdim) = (1.0 - p0) * nuclear;
    return out;
}

inline double nuclear_polarization(const Eigen::MatrixXcd& rho, int nucleus = 1) {
    const int qubits = reg_detail::qubit_count(rho);
    Eigen::MatrixXcd marg = rho;
    for (int q = qubits - 1; q >= 0; --q)
        if (q != nucleus) marg = partial_trace_qubit(marg, q);
    return (marg(0, 0) - marg(1, 1)).real();
}

struct CoolingResult {
    Eigen::MatrixXcd state;
    double polarization = 0.0;  // <sigma_z> of the cooled nucleus
};

// Algorithmic cooling: optically polarize the electron, then swap that
// polarization onto the nucleus; repeat.
inline CoolingResult algorithmic_cool(const Eigen::MatrixXcd& rho, int iterations,
                                      const NoiseModel& noise = {}, int nucleus = 1) {
    if (iterations < 1) throw std::invalid_argument("algorithmic_cool: iterations must be >= 1");
    noise.validate();
    Eigen::MatrixXcd state = rho;
    GateOp swap;
    swap.kind = GateOp::Kind::Swap;
    swap.nucleus = nucleus;
    for (int i = 0; i < iterations; ++i) {
        state = optical_reinit_electron(state, noise.reinit_fidelity);
        state = apply_gate(state, swap, noise);
    }
    return {state, nuclear_polarization(state, nucleus)};
}

// The entangling circuit: electron pi/2 followed by a nuclear pi rotation
// conditioned on the electron branch. Noiseless from |0 up> this yields
// (|0 up> - i |1 down>)/sqrt(2).
inline Eigen::MatrixXcd bell_target(int qubits = 2) {
    using namespace std::complex_literals;
    const int dim = 1 << qubits;
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dim);
    psi(0) = 1.0 / std::sqrt(2.0);
    // electron |1>, nucleus 1 |down>, any spectator in |up>
    psi((dim >> 1) | (dim >> 2)) = -1i / std::sqrt(2.0);
    return psi * psi.adjoint();
}

inline Eigen::MatrixXcd entangle_bell(const Eigen::MatrixXcd& rho, const NoiseModel& noise = {}) {
    noise.validate();
    if (noise.p_gate == 0.0) {
        const double purity = (rho * rho).trace().real();
        if (purity < 0.99)
            throw std::invalid_argument("entangle_bell: uninitialized input (purity below 0.99)");
    }
    GateOp half;
    half.kind = GateOp::Kind::ElectronRot;
    half.theta = 0.5 * pi;
    half.axis = {0.0, 1.0, 0.0};
    GateOp crot;
    crot.kind = GateOp::Kind::CeRotN;
    crot.theta = pi;
    crot.axis = {1.0, 0.0, 0.0};
    crot.nucleus = 1;
    crot.control_value = 1;
    Eigen::MatrixXcd out = apply_gate(rho, half, noise);
    return apply_gate(out, crot, noise);
}

inline double state_fidelity(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& pure_target) {
    return (rho * pure_target).trace().real();
}

// --- tomography ---------------------------------------------------------

inline Eigen::Matrix2cd pauli_matrix(int which) {
    using namespace std::complex_literals;
    Eigen::Matrix2cd m;
    switch (which) {
        case 0: m << 1, 0, 0, 1; break;
        case 1: m << 0, 1, 1, 0; break;
        case 2: m << 0, -1i, 1i, 0; break;
        default: m << 1, 0, 0, -1; break;
    }
    return m;
}

inline Eigen::Matrix4cd two_qubit_pauli(int i, int j) {
    Eigen::Matrix4cd out;
    const Eigen::Matrix2cd a = pauli_matrix(i), b = pauli_matrix(j);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) out.block<2, 2>(2 * r, 2 * c) = a(r, c) * b;
    return out;
}

// Nearest density matrix in Frobenius norm: clip eigenvalues onto the simplex.
inline Eigen::MatrixXcd project_to_physical(const Eigen::MatrixXcd& rho) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
    Eigen::VectorXd lam = es.eigenvalues();  // ascending
    const int d = static_cast<int>(lam.size());
    double shift = (1.0 - lam.sum()) / d;
    for (int i = 0; i < d; ++i) lam[i] += shift;
    // water-filling from the smallest eigenvalue
    double carry = 0.0;
    for (int i = 0; i < d; ++i) {
        const int remaining = d - i;
        if (lam[i] + carry / remaining < 0.0) {
            carry += lam[i];
            lam[i] = 0.0;
        } else {
            for (int j = i; j < d; ++j) lam[j] += carry / remaining;
            break;
        }
    }
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

struct QstOptions {
    long shots = 0;  // 0 = exact expectation values
    std::uint64_t seed = 1;
    bool project = false;  // project the linear inversion onto the PSD cone
    double readout_error = 0.0;
};

// Pauli-basis tomography with linear inversion. 3-qubit inputs have the
// spectator nucleus (qubit 2) traced out first.
inline Eigen::MatrixXcd qst(const Eigen::MatrixXcd& rho_in, const QstOptions& options = {}) {
    if (options.shots < 0) throw std::invalid_argument("qst: shots must be >= 1 (or 0 for exact)");
    Eigen::MatrixXcd rho = rho_in;
    if (rho.rows() == 8) rho = partial_trace_qubit(rho, 2);
    if (rho.rows() != 4) throw std::invalid_argument("qst expects a 2-qubit state");

    Rng rng(options.seed);
    Eigen::MatrixXcd recon = Eigen::MatrixXcd::Zero(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const Eigen::Matrix4cd p = two_qubit_pauli(i, j);
            double expectation = (rho * p).trace().real();
            if (options.shots > 0 && !(i == 0 && j == 0)) {
                const double eps = options.readout_error;
                const double p_plus_obs =
                    (0.5 * (1.0 + expectation)) * (1.0 - eps) + (0.5 * (1.0 - expectation)) * eps;
                long plus = 0;
                for (long s = 0; s < options.shots; ++s) plus += rng.bernoulli(p_plus_obs) ? 1 : 0;
                expectation = 2.0 * static_cast<double>(plus) / options.shots - 1.0;
            }
            recon += 0.25 * expectation * p;
        }
    return options.project ? project_to_physical(recon) : recon;
}

// Minimum eigenvalue of the partial transpose over the nuclear qubit;
// negative iff the 2-qubit state is entangled.
inline double ppt_min_eigenvalue(const Eigen::MatrixXcd& rho) {
    if (rho.rows() != 4 || rho.cols() != 4) throw std::invalid_argument("ppt: expected 4x4");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
        throw std::invalid_argument("ppt: not Hermitian");
    if (std::abs(rho.trace().real() - 1.0) > 1e-8)
        throw std::invalid_argument("ppt: trace is not 1");
    Eigen::Matrix4cd pt;
    for (int e1 = 0; e1 < 2; ++e1)
        for (int n1 = 0; n1 < 2; ++n1)
            for (int e2 = 0; e2 < 2; ++e2)
                for (int n2 = 0; n2 < 2; ++n2)
                    pt(2 * e1 + n1, 2 * e2 + n2) = rho(2 * e1 + n2, 2 * e2 + n1);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(pt);
    return es.eigenvalues().minCoeff();
}

// --- ODMR ----------------------------------------------------------------

struct OdmrSpectrum {
    std::vector<double> detuning_hz;
    std::vector<double> contrast;
    double inferred_fidelity = 0.0;  // dominant-line weight
};

// Two Lorentzian electron lines split by A_par, weighted by the nuclear
// populations; the asymmetry measures the nuclear initialization fidelity.
inline OdmrSpectrum odmr_spectrum(const Eigen::MatrixXcd& rho, double a_par, double linewidth,
                                  int points = 401, int nucleus = 1) {
    if (linewidth <= 0.0) throw std::invalid_argument("odmr: linewidth must be positive");
    const int qubits = reg_detail::qubit_count(rho);
    Eigen::MatrixXcd marg = rho;
    for (int q = qubits - 1; q >= 0; --q)
        if (q != nucleus) marg = partial_trace_qubit(marg, q);
    const double w_up = marg(0, 0).real();
    const double w_down = marg(1, 1).real();

    const double split = std::abs(hz_from_rad(a_par));
    const double gamma_hz = hz_from_rad(linewidth);
    const double span = 1.5 * std::max(split, gamma_hz * 4.0);
    OdmrSpectrum spec;
    spec.inferred_fidelity = std::max(w_up, w_down) / std::max(w_up + w_down, 1e-300);
    auto lorentz = [&](double d, double center) {
        const double hw = 0.5 * gamma_hz;
        return hw * hw / ((d - center) * (d - center) + hw * hw);
    };
    for (int i = 0; i < points; ++i) {
        const double d = -span + 2.0 * span * i / (points - 1);
        spec.detuning_hz.push_back(d);
        spec.contrast.push_back(w_up * lorentz(d, -0.5 * split) + w_down * lorentz(d, 0.5 * split));
    }
    return spec;
}

// --- noise calibration ----------------------------------------------------

// Forward models used to freeze regression targets: cooled initialization
// fidelity (dominant nuclear population) and Bell-state fidelity.
inline double cooled_init_fidelity(double p_gate, int iterations = 2, double reinit_fidelity = 1.0) {
    NoiseModel noise;
    noise.p_gate = p_gate;
    noise.reinit_fidelity = reinit_fidelity;
    const auto cooled = algorithmic_cool(maximally_mixed(2), iterations, noise);
    return 0.5 * (1.0 + std::abs(cooled.polarization));
}

inline double bell_fidelity_with_noise(double p_gate) {
    NoiseModel noise;
    noise.p_gate = p_gate;
    const Eigen::MatrixXcd out = entangle_bell(ground_state(2), noise);
    return state_fidelity(out, bell_target());
}

// Monotone bisection for the gate-noise level hitting a forward-model target.
template <typename Model>
double calibrate_noise(Model&& model, double target, double lo = 0.0, double hi = 0.5) {
    double flo = model(lo), fhi = model(hi);
    if ((flo - target) * (fhi - target) > 0.0)
        throw std::invalid_argument("calibrate_noise: target not bracketed");
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = model(mid);
        if ((flo - target) * (fmid - target) <= 0.0) {
            hi = mid;
            fhi = fmid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace sicmem
