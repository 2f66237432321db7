#pragma once

#include <numbers>

// Physical constants and unit conventions.
//
// Unit policy: all internal frequencies and couplings are angular (rad/s),
// lengths are nm, times are s, magnetic fields are T. Config files and
// exported artifacts use linear frequency (Hz/kHz/MHz) and gauss; the
// conversion happens at the I/O boundary, never inside the physics.

namespace sicmem {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// CODATA-level constants
inline constexpr double hbar = 1.054571817e-34;    // J s
inline constexpr double mu0_over_4pi = 1.0e-7;     // T^2 m^3 / J

// Gyromagnetic ratios, linear frequency per tesla (signed).
inline constexpr double gamma_e_hz_per_t = 28.025e9;       // electron, g ~ 2.00
inline constexpr double gamma_si29_hz_per_t = -8.465e6;    // 29Si
inline constexpr double gamma_c13_hz_per_t = 10.7084e6;    // 13C

inline constexpr double gauss_to_tesla = 1.0e-4;

constexpr double rad_from_hz(double f_hz) { return two_pi * f_hz; }
constexpr double hz_from_rad(double w) { return w / two_pi; }

// Dipolar coupling prefactor (mu0/4pi) g1 g2 hbar / r^3 in rad/s, with the
// gyromagnetic ratios in rad s^-1 T^-1 and the distance in nm.
constexpr double dipolar_prefactor(double gamma1_rad, double gamma2_rad, double r_nm) {
    const double r_m3 = r_nm * r_nm * r_nm * 1.0e-27;
    return mu0_over_4pi * gamma1_rad * gamma2_rad * hbar / r_m3;
}

}  // namespace sicmem
