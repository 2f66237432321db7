#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sicmem/constants.hpp"
#include "sicmem/rng.hpp"

// 4H-SiC crystal around an axial (kk) divacancy: site enumeration, isotopic
// bath sampling, and paramagnetic (dark electron spin) bath sampling.

namespace sicmem {

enum class Element : std::uint8_t { Si, C };

// Nearest-neighbor shells of the divacancy, labelled so tabulated contact
// hyperfine values can override the point-dipole form there.
enum class NnShell : std::uint8_t { None, SiI, SiIIa, SiIIb, CI };

inline const char* element_name(Element e) { return e == Element::Si ? "Si" : "C"; }

inline const char* shell_name(NnShell s) {
    switch (s) {
        case NnShell::SiI: return "Si_I";
        case NnShell::SiIIa: return "Si_IIa";
        case NnShell::SiIIb: return "Si_IIb";
        case NnShell::CI: return "C_I";
        default: return "none";
    }
}

struct BasisAtom {
    Eigen::Vector3d frac;   // fractional coordinates in the unit cell
    Element element;
    char site_class;        // 'h' (hexagonal) or 'k' (quasi-cubic)
};

// Hexagonal 4H cell with ABCB stacking. The c axis is the quantization axis z.
struct CrystalModel {
    Eigen::Matrix3d vectors;            // rows are lattice vectors a1, a2, a3 (nm)
    std::vector<BasisAtom> basis;       // 8 atoms: 4 Si + 4 C
    Eigen::Vector3d c_axis{0.0, 0.0, 1.0};
    double a_nm = 0.0;
    double c_nm = 0.0;
    double supercell_max_radius_nm = 20.0;

    // divacancy geometry, fractional: the vacant Si(k) and the axial C(k) above it
    Eigen::Vector3d vsi_frac;
    Eigen::Vector3d vc_frac;

    Eigen::Vector3d cartesian(const Eigen::Vector3d& frac) const {
        return vectors.transpose() * frac;
    }
    Eigen::Vector3d defect_origin() const {
        return 0.5 * (cartesian(vsi_frac) + cartesian(vc_frac));
    }
    double bond_length() const { return (cartesian(vc_frac) - cartesian(vsi_frac)).norm(); }
};

// Standard 4H-SiC lattice parameters; the hexagonal layers stack ABCB with
// site classes h,k,h,k, and carbon sits 3c/16 above its silicon layer.
inline CrystalModel make_4h_sic(double a_nm = 0.3079, double c_nm = 1.0082,
                                double supercell_max_radius_nm = 20.0) {
    CrystalModel m;
    m.a_nm = a_nm;
    m.c_nm = c_nm;
    m.supercell_max_radius_nm = supercell_max_radius_nm;
    m.vectors.row(0) = Eigen::Vector3d(a_nm, 0.0, 0.0);
    m.vectors.row(1) = Eigen::Vector3d(-0.5 * a_nm, 0.5 * std::sqrt(3.0) * a_nm, 0.0);
    m.vectors.row(2) = Eigen::Vector3d(0.0, 0.0, c_nm);

    const Eigen::Vector2d site_a(0.0, 0.0);
    const Eigen::Vector2d site_b(1.0 / 3.0, 2.0 / 3.0);
    const Eigen::Vector2d site_c(2.0 / 3.0, 1.0 / 3.0);
    const Eigen::Vector2d stack[4] = {site_a, site_b, site_c, site_b};
    const char cls[4] = {'h', 'k', 'h', 'k'};
    const double u = 3.0 / 16.0;  // axial Si-C bond in units of c

    for (int layer = 0; layer < 4; ++layer) {
        const double z = 0.25 * layer;
        m.basis.push_back({{stack[layer].x(), stack[layer].y(), z}, Element::Si, cls[layer]});
        m.basis.push_back({{stack[layer].x(), stack[layer].y(), z + u}, Element::C, cls[layer]});
    }

    // axial kk divacancy: vacant Si in the k layer at z = 1/4 plus the C bonded
    // to it along +c
    m.vsi_frac = Eigen::Vector3d(site_b.x(), site_b.y(), 0.25);
    m.vc_frac = Eigen::Vector3d(site_b.x(), site_b.y(), 0.25 + u);
    return m;
}

struct LatticeSite {
    Eigen::Vector3d position;  // nm, relative to the defect midpoint
    Element element;
    int index = -1;            // stable ordering key after sorting
    NnShell shell = NnShell::None;
};

namespace detail {

inline void classify_shells(std::vector<LatticeSite>& sites, const CrystalModel& crystal,
                            const Eigen::Vector3d& vsi, const Eigen::Vector3d& vc) {
    const double bond = crystal.bond_length();
    const double a = crystal.a_nm;
    for (auto& s : sites) {
        const double d_vsi = (s.position - vsi).norm();
        const double d_vc = (s.position - vc).norm();
        if (s.element == Element::Si && d_vc < 1.1 * bond) {
            s.shell = NnShell::SiI;
        } else if (s.element == Element::C && d_vsi < 1.1 * bond) {
            s.shell = NnShell::CI;
        } else if (s.element == Element::Si && d_vsi > 0.85 * a && d_vsi < 1.15 * a) {
            const double dz = std::abs(s.position.z() - vsi.z());
            s.shell = dz < 0.1 * a ? NnShell::SiIIa : NnShell::SiIIb;
        }
    }
}

}  // namespace detail

// All lattice sites within `radius_nm` of the defect midpoint, the two vacancy
// sites excluded, ordered by distance (ties broken by enumeration key).
// `cell_shift` moves the defect to a translationally equivalent position.
inline std::vector<LatticeSite> enumerate_sites(const CrystalModel& crystal, double radius_nm,
                                                const Eigen::Vector3i& cell_shift = Eigen::Vector3i::Zero()) {
    if (radius_nm < 0.0) throw std::invalid_argument("enumerate_sites: negative radius");
    if (radius_nm > crystal.supercell_max_radius_nm)
        throw std::runtime_error("supercell too small: radius exceeds configured bound");
    std::vector<LatticeSite> sites;
    if (radius_nm == 0.0) return sites;

    const Eigen::Vector3d shift_frac = cell_shift.cast<double>();
    const Eigen::Vector3d origin = crystal.cartesian(crystal.vsi_frac + shift_frac) * 0.5 +
                                   crystal.cartesian(crystal.vc_frac + shift_frac) * 0.5;
    const Eigen::Vector3d vsi = crystal.cartesian(crystal.vsi_frac + shift_frac) - origin;
    const Eigen::Vector3d vc = crystal.cartesian(crystal.vc_frac + shift_frac) - origin;

    // cell index bounds from the reciprocal metric, with one basis-extent margin
    const Eigen::Matrix3d recip = crystal.vectors.inverse();  // columns are b_i / 2pi
    const double margin = crystal.vectors.rowwise().norm().maxCoeff();
    Eigen::Vector3i bound;
    for (int i = 0; i < 3; ++i)
        bound[i] = static_cast<int>(std::ceil((radius_nm + margin) * recip.col(i).norm())) + 1;

    struct Raw {
        double dist;
        std::int64_t key;
        Eigen::Vector3d pos;
        Element element;
    };
    std::vector<Raw> raw;
    const double tol = 1e-6;
    std::int64_t key = 0;
    for (int i = -bound[0]; i <= bound[0]; ++i)
        for (int j = -bound[1]; j <= bound[1]; ++j)
            for (int l = -bound[2]; l <= bound[2]; ++l)
                for (const auto& atom : crystal.basis) {
                    const Eigen::Vector3d frac =
                        atom.frac + Eigen::Vector3d(i, j, l) + shift_frac;
                    const Eigen::Vector3d pos = crystal.cartesian(frac) - origin;
                    ++key;
                    const double d = pos.norm();
                    if (d > radius_nm) continue;
                    if ((pos - vsi).norm() < tol || (pos - vc).norm() < tol) continue;  // vacancies
                    raw.push_back({d, key, pos, atom.element});
                }

    std::sort(raw.begin(), raw.end(), [](const Raw& x, const Raw& y) {
        if (std::abs(x.dist - y.dist) > 1e-12) return x.dist < y.dist;
        return x.key < y.key;
    });

    sites.reserve(raw.size());
    for (std::size_t n = 0; n < raw.size(); ++n)
        sites.push_back({raw[n].pos, raw[n].element, static_cast<int>(n), NnShell::None});
    detail::classify_shells(sites, crystal, vsi, vc);
    return sites;
}

// Coherence baths treat strongly coupled contact-shell nuclei as resolved
// register qubits rather than dephasing sources; this strips the flagged
// shells from a site list.
inline std::vector<LatticeSite> exclude_contact_shells(std::vector<LatticeSite> sites) {
    std::erase_if(sites, [](const LatticeSite& s) { return s.shell != NnShell::None; });
    return sites;
}

// Spin-1/2 isotope fraction per element.
struct IsotopeModel {
    double c_si29 = 0.0;
    double c_c13 = 0.0;

    void validate() const {
        if (c_si29 < 0.0 || c_si29 > 1.0 || c_c13 < 0.0 || c_c13 > 1.0)
            throw std::invalid_argument("isotope fraction outside [0, 1]");
    }
    double fraction(Element e) const { return e == Element::Si ? c_si29 : c_c13; }
};

// One occupied bath site. The hyperfine tensor is filled in by the hyperfine
// module (attach_hyperfine); until then `attached` is false.
struct BathSpin {
    LatticeSite site;
    Element element;
    Eigen::Matrix3d tensor = Eigen::Matrix3d::Zero();  // rad/s
    double a_par = 0.0;   // tensor zz component
    double a_perp = 0.0;  // sqrt(zx^2 + zy^2)
    bool attached = false;
};

struct BathConfiguration {
    std::vector<BathSpin> spins;
    std::uint64_t seed = 0;
    IsotopeModel isotopes;
};

// Occupy each site independently with its element's isotopic fraction.
inline BathConfiguration sample_bath(const std::vector<LatticeSite>& sites,
                                     const IsotopeModel& isotopes, std::uint64_t seed) {
    isotopes.validate();
    BathConfiguration bath;
    bath.seed = seed;
    bath.isotopes = isotopes;
    Rng rng(seed);
    for (const auto& s : sites) {
        const double c = isotopes.fraction(s.element);
        const bool occupied = c >= 1.0 ? true : (c <= 0.0 ? false : rng.bernoulli(c));
        if (occupied) bath.spins.push_back({s, s.element});
    }
    return bath;
}

// Poisson-distributed dark electron spins, uniform in a sphere around the
// defect. Density in cm^-3, radius in nm.
inline std::vector<Eigen::Vector3d> sample_paramagnetic_bath(double density_cm3, double radius_nm,
                                                             std::uint64_t seed) {
    if (density_cm3 < 0.0) throw std::invalid_argument("negative paramagnetic density");
    const double density_nm3 = density_cm3 * 1.0e-21;
    const double volume = 4.0 / 3.0 * pi * radius_nm * radius_nm * radius_nm;
    Rng rng(seed);
    const int count = rng.poisson(density_nm3 * volume);
    std::vector<Eigen::Vector3d> positions;
    positions.reserve(count);
    for (int i = 0; i < count; ++i) {
        double p[3];
        rng.in_sphere(radius_nm, p);
        positions.emplace_back(p[0], p[1], p[2]);
    }
    return positions;
}

}  // namespace sicmem
