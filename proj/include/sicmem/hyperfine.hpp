#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "sicmem/constants.hpp"
#include "sicmem/lattice.hpp"

// Electron-nuclear hyperfine tensors (point dipole plus tabulated contact
// overrides on the nearest-neighbor shells), nuclear-nuclear secular dipolar
// couplings, spin species constants, and the electron pseudospin model.

namespace sicmem {

struct SpinSpecies {
    std::string name;
    double gamma = 0.0;  // rad s^-1 T^-1, signed
    double spin = 0.5;
};

inline SpinSpecies species_si29() { return {"29Si", rad_from_hz(gamma_si29_hz_per_t), 0.5}; }
inline SpinSpecies species_c13() { return {"13C", rad_from_hz(gamma_c13_hz_per_t), 0.5}; }
inline SpinSpecies species_for(Element e) { return e == Element::Si ? species_si29() : species_c13(); }

// Divacancy ground-state pseudospin: {m_s = 0, m_s = branch}, field along c.
struct ElectronModel {
    double gamma_e = rad_from_hz(gamma_e_hz_per_t);  // rad s^-1 T^-1
    double b_field = 0.0;                            // T, along the c axis
    int branch = -1;                                 // active m_s branch, +1 or -1
    double zfs = 0.0;                                // rad/s, display only

    void validate() const {
        if (branch != 1 && branch != -1) throw std::invalid_argument("electron branch must be +1 or -1");
        if (b_field < 0.0) throw std::invalid_argument("negative magnetic field");
    }
    double larmor(const SpinSpecies& nucleus) const { return nucleus.gamma * b_field; }
};

// Point-dipole hyperfine tensor A(r) = (mu0/4pi) g_e g_n hbar / r^3 (3 rr^T - I),
// rad/s, z along the c axis. Below `core_exclusion_nm` the point-dipole form is
// invalid and tabulated contact values must be used instead.
inline constexpr double core_exclusion_nm = 0.1;

inline Eigen::Matrix3d dipolar_hyperfine(const Eigen::Vector3d& r_nm, double gamma_e,
                                         double gamma_n) {
    const double r = r_nm.norm();
    if (r <= core_exclusion_nm)
        throw std::invalid_argument("use tabulated contact hyperfine: site inside core exclusion");
    const double pref = dipolar_prefactor(gamma_e, gamma_n, r);
    const Eigen::Vector3d rhat = r_nm / r;
    return pref * (3.0 * rhat * rhat.transpose() - Eigen::Matrix3d::Identity());
}

inline double a_par_of(const Eigen::Matrix3d& tensor) { return tensor(2, 2); }
inline double a_perp_of(const Eigen::Matrix3d& tensor) {
    return std::hypot(tensor(0, 2), tensor(1, 2));
}

// Secular dipolar coupling between two bath nuclei:
//   H = c_zz Iz Iz + b_ff (I+I- + I-I+)/2,  b_ff = -c_zz/2 homonuclear.
// Heteronuclear flip-flops are dropped (Larmor mismatch >> coupling at the
// fields of interest).
struct PairCoupling {
    double c_zz = 0.0;  // rad/s
    double b_ff = 0.0;  // rad/s
};

inline PairCoupling nuclear_pair_coupling(const Eigen::Vector3d& r_ij_nm, double gamma_i,
                                          double gamma_j, bool homonuclear) {
    const double r = r_ij_nm.norm();
    if (r <= 0.0) throw std::invalid_argument("nuclear_pair_coupling: zero separation");
    const double cos_theta = r_ij_nm.z() / r;
    const double c_zz = dipolar_prefactor(gamma_i, gamma_j, r) * (1.0 - 3.0 * cos_theta * cos_theta);
    return {c_zz, homonuclear ? -0.5 * c_zz : 0.0};
}

// Contact-hyperfine overrides keyed by nearest-neighbor shell label. Only the
// Si_IIa value is tabulated by default; the rest keep the point-dipole form.
struct HyperfineOverrides {
    struct Values {
        double a_par = 0.0;   // rad/s
        double a_perp = 0.0;  // rad/s
    };
    std::map<NnShell, Values> table;

    static HyperfineOverrides defaults() {
        HyperfineOverrides o;
        o.table[NnShell::SiIIa] = {rad_from_hz(13.2e6), 0.0};
        return o;
    }
};

// Fill the bath spins' hyperfine tensors: point dipole everywhere except
// overridden shells, where the tensor is assembled from (a_par, a_perp) with
// the perpendicular part along x.
inline void attach_hyperfine(BathConfiguration& bath, const ElectronModel& electron,
                             const HyperfineOverrides& overrides = HyperfineOverrides::defaults()) {
    for (auto& spin : bath.spins) {
        const auto it = overrides.table.find(spin.site.shell);
        if (it != overrides.table.end()) {
            Eigen::Matrix3d t = Eigen::Matrix3d::Zero();
            t(2, 2) = it->second.a_par;
            t(0, 2) = t(2, 0) = it->second.a_perp;
            spin.tensor = t;
        } else {
            spin.tensor =
                dipolar_hyperfine(spin.site.position, electron.gamma_e, species_for(spin.element).gamma);
        }
        spin.a_par = a_par_of(spin.tensor);
        spin.a_perp = a_perp_of(spin.tensor);
        spin.attached = true;
    }
}

// Conditional nuclear Hamiltonian coefficients for electron branch alpha
// (0 or m_s): H_alpha = w_par Iz + w_perp Ix with
//   w_par = w_L + alpha A_par,  w_perp = alpha A_perp,  w_L = gamma_n B.
struct EffectiveFields {
    double w_par = 0.0;   // rad/s
    double w_perp = 0.0;  // rad/s
};

inline EffectiveFields effective_fields(double a_par, double a_perp, double larmor, int alpha) {
    return {larmor + alpha * a_par, alpha * a_perp};
}

}  // namespace sicmem
