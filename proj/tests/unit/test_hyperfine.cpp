#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sicmem/hyperfine.hpp"
#include "sicmem/rng.hpp"

using namespace sicmem;

namespace {
const double g_e = rad_from_hz(gamma_e_hz_per_t);
const double g_si = rad_from_hz(gamma_si29_hz_per_t);
const double g_c = rad_from_hz(gamma_c13_hz_per_t);
}  // namespace

TEST_CASE("dipolar tensor along z: axial, A_perp = 0") {
    const auto a = dipolar_hyperfine({0.0, 0.0, 1.0}, g_e, g_si);
    REQUIRE(a_perp_of(a) == Catch::Approx(0.0).margin(1e-20));
    const double pref = dipolar_prefactor(g_e, g_si, 1.0);
    REQUIRE(a_par_of(a) == Catch::Approx(2.0 * pref).epsilon(1e-12));
}

TEST_CASE("magic angle zeroes A_par") {
    const double theta = std::acos(1.0 / std::sqrt(3.0));  // 54.7356 deg
    const Eigen::Vector3d r(std::sin(theta), 0.0, std::cos(theta));
    const auto a = dipolar_hyperfine(1.3 * r, g_e, g_si);
    REQUIRE(std::abs(a_par_of(a)) < 1e-9 * std::abs(a_perp_of(a)));
}

TEST_CASE("scalar-formula oracle: 29Si at 1 nm on the axis") {
    // independent evaluation straight from the constants
    const double mu0_4pi = 1.0e-7;
    const double hbar_v = 1.054571817e-34;
    const double expected =
        2.0 * mu0_4pi * (2 * pi * 28.025e9) * (2 * pi * -8.465e6) * hbar_v / 1e-27;
    const auto a = dipolar_hyperfine({0.0, 0.0, 1.0}, g_e, g_si);
    REQUIRE(a_par_of(a) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("point-dipole tensor is symmetric and traceless for random directions") {
    Rng rng(99);
    for (int i = 0; i < 200; ++i) {
        double p[3];
        rng.in_sphere(1.0, p);
        Eigen::Vector3d r(p[0], p[1], p[2]);
        r *= 3.0 / std::max(r.norm(), 0.2);
        if (r.norm() < 0.15) continue;
        const auto a = dipolar_hyperfine(r, g_e, g_si);
        const double scale = a.cwiseAbs().maxCoeff();
        REQUIRE((a - a.transpose()).cwiseAbs().maxCoeff() < 1e-12 * scale);
        REQUIRE(std::abs(a.trace()) < 1e-12 * scale);
    }
}

TEST_CASE("A_par and A_perp invariant under rotation about the c axis") {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const double theta = rng.uniform(0.05, pi - 0.05);
        const double phi1 = rng.uniform(0.0, two_pi);
        const double phi2 = rng.uniform(0.0, two_pi);
        const double r = rng.uniform(0.3, 4.0);
        auto dir = [&](double phi) {
            return Eigen::Vector3d(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                                   std::cos(theta));
        };
        const auto a1 = dipolar_hyperfine(r * dir(phi1), g_e, g_si);
        const auto a2 = dipolar_hyperfine(r * dir(phi2), g_e, g_si);
        REQUIRE(a_par_of(a1) == Catch::Approx(a_par_of(a2)).margin(1e-9 * std::abs(a_par_of(a1)) + 1e-12));
        REQUIRE(a_perp_of(a1) == Catch::Approx(a_perp_of(a2)).margin(1e-9 * a_perp_of(a1) + 1e-12));
    }
}

TEST_CASE("coupling magnitude scales as 1/r^3") {
    const Eigen::Vector3d dir = Eigen::Vector3d(1.0, 0.4, 2.0).normalized();
    const auto a1 = dipolar_hyperfine(0.7 * dir, g_e, g_c);
    const auto a2 = dipolar_hyperfine(1.4 * dir, g_e, g_c);
    REQUIRE(a_par_of(a1) == Catch::Approx(8.0 * a_par_of(a2)).epsilon(1e-12));
    REQUIRE(a_perp_of(a1) == Catch::Approx(8.0 * a_perp_of(a2)).epsilon(1e-12));
}

TEST_CASE("core exclusion raises") {
    REQUIRE_THROWS_WITH(dipolar_hyperfine({0.0, 0.0, 0.05}, g_e, g_si),
                        Catch::Matchers::ContainsSubstring("tabulated contact hyperfine"));
}

TEST_CASE("nuclear pair coupling") {
    SECTION("magic angle zeroes c_zz") {
        const double theta = std::acos(1.0 / std::sqrt(3.0));
        const Eigen::Vector3d r(std::sin(theta), 0.0, std::cos(theta));
        const auto pc = nuclear_pair_coupling(0.5 * r, g_si, g_si, true);
        REQUIRE(std::abs(pc.c_zz) < 1e-9 * std::abs(dipolar_prefactor(g_si, g_si, 0.5)));
    }
    SECTION("scalar oracle: two 29Si at 0.308 nm along x") {
        const auto pc = nuclear_pair_coupling({0.308, 0.0, 0.0}, g_si, g_si, true);
        const double expected =
            1.0e-7 * (2 * pi * -8.465e6) * (2 * pi * -8.465e6) * 1.054571817e-34 /
            (0.308 * 0.308 * 0.308 * 1e-27);  // (1 - 3 cos^2 theta) = 1 at theta = pi/2
        REQUIRE(pc.c_zz == Catch::Approx(expected).epsilon(1e-12));
        REQUIRE(pc.b_ff == Catch::Approx(-0.5 * expected).epsilon(1e-12));
    }
    SECTION("heteronuclear pairs have no flip-flop") {
        const auto pc = nuclear_pair_coupling({0.4, 0.2, 0.1}, g_si, g_c, false);
        REQUIRE(pc.b_ff == 0.0);
        REQUIRE(pc.c_zz != 0.0);
    }
    SECTION("zero separation raises") {
        REQUIRE_THROWS_AS(nuclear_pair_coupling({0.0, 0.0, 0.0}, g_si, g_si, true),
                          std::invalid_argument);
    }
}

TEST_CASE("effective fields per electron branch") {
    const double larmor = rad_from_hz(gamma_si29_hz_per_t) * 0.0584;  // 29Si at 584 G, signed
    const double a_par = rad_from_hz(650.0);
    const double a_perp = rad_from_hz(11.45e3);

    SECTION("alpha = 0 is the bare Larmor precession") {
        const auto f = effective_fields(a_par, a_perp, larmor, 0);
        REQUIRE(f.w_par == larmor);
        REQUIRE(f.w_perp == 0.0);
    }
    SECTION("A_perp = 0, alpha = -1") {
        const auto f = effective_fields(a_par, 0.0, larmor, -1);
        REQUIRE(f.w_par == Catch::Approx(larmor - a_par));
        REQUIRE(f.w_perp == 0.0);
    }
    SECTION("branch splitting between alpha = +1 and -1 equals 2 A_par") {
        const auto plus = effective_fields(a_par, a_perp, larmor, 1);
        const auto minus = effective_fields(a_par, a_perp, larmor, -1);
        REQUIRE(plus.w_par - minus.w_par == Catch::Approx(2.0 * a_par).epsilon(1e-12));
        REQUIRE(plus.w_par - minus.w_par == Catch::Approx(rad_from_hz(1.3e3)).epsilon(1e-9));
    }
}

TEST_CASE("electron model validation and Larmor") {
    ElectronModel e;
    e.b_field = 584.0 * gauss_to_tesla;
    e.validate();
    REQUIRE(e.larmor(species_si29()) == Catch::Approx(rad_from_hz(-8.465e6 * 0.0584)));
    e.branch = 0;
    REQUIRE_THROWS_AS(e.validate(), std::invalid_argument);
    e.branch = -1;
    e.b_field = -1.0;
    REQUIRE_THROWS_AS(e.validate(), std::invalid_argument);
}

TEST_CASE("attach_hyperfine fills tensors, overrides contact shells") {
    CrystalModel m = make_4h_sic();
    const auto sites = enumerate_sites(m, 1.2);
    BathConfiguration bath = sample_bath(sites, {1.0, 1.0}, 1);  // fully occupied
    ElectronModel electron;
    electron.b_field = 0.05;
    attach_hyperfine(bath, electron);

    bool saw_override = false;
    for (const auto& s : bath.spins) {
        REQUIRE(s.attached);
        if (s.site.shell == NnShell::SiIIa) {
            saw_override = true;
            REQUIRE(s.a_par == Catch::Approx(rad_from_hz(13.2e6)));
        } else if (s.site.shell == NnShell::None) {
            const auto expected =
                dipolar_hyperfine(s.site.position, electron.gamma_e, species_for(s.element).gamma);
            REQUIRE(s.a_par == Catch::Approx(a_par_of(expected)));
        }
    }
    REQUIRE(saw_override);
}
