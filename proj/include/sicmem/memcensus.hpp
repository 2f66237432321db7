#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sicmem/ddgate.hpp"
#include "sicmem/hyperfine.hpp"
#include "sicmem/lattice.hpp"
#include "sicmem/threading.hpp"

// Memory census: the expected number of usable nuclear memories as a function
// of isotopic concentration. A lattice site is usable when some (N, tau)
// design reaches the fidelity threshold within the gate-time budget, where the
// fidelity combines the intrinsic conditional-rotation fidelity with the
// expected crosstalk from every other possible nuclear position,
//   E(M_j) = 1 - c_j (1 - M_j(N, tau)),
// and the census weight of a usable site is its isotopic fraction c_i.

namespace sicmem {

enum class FidelityModel {
    CrosstalkTimesGate,  // F = (1 + P)/2 * F_gate
    PiMagnetization,     // F = (1 - M_i P)/2, for theta_target = pi
};

struct MemoryCriteria {
    double f_min = 0.9;
    double t_max = 1.5e-3;            // s
    double theta_target = 0.5 * pi;   // rad
    int k_max = 7;
    std::optional<double> window_lo;  // optional |A_par| window (rad/s)
    std::optional<double> window_hi;
    FidelityModel model = FidelityModel::CrosstalkTimesGate;

    void validate() const {
        if (f_min < 0.0 || f_min > 1.0) throw std::invalid_argument("f_min must be in [0, 1]");
        if (t_max <= 0.0) throw std::invalid_argument("t_max must be positive");
        if (theta_target <= 0.0 || theta_target > pi)
            throw std::invalid_argument("theta_target must be in (0, pi]");
        if (k_max < 0) throw std::invalid_argument("k_max must be >= 0");
    }
};

struct CensusOptions {
    double radius_nm = 6.0;              // census radius (candidates and crosstalk)
    double low_a_par_cutoff = rad_from_hz(60e3);  // strong-coupling reporting threshold
    int scan_points = 201;
    bool prune = true;  // skip sites whose best reachable angle cannot meet f_min
    int workers = 1;
    HyperfineOverrides overrides = HyperfineOverrides::defaults();
};

// Sites grouped by (element, shell, A_par, A_perp): the point-dipole couplings
// depend only on distance and polar angle, so symmetry orbits share designs
// and crosstalk products.
struct SiteClass {
    Element element = Element::Si;
    NnShell shell = NnShell::None;
    double a_par = 0.0;   // rad/s, signed
    double a_perp = 0.0;  // rad/s
    double distance = 0.0;
    int multiplicity = 0;
    std::vector<int> members;  // site indices
};

inline std::vector<SiteClass> build_site_classes(const CrystalModel& crystal, double radius_nm,
                                                 const ElectronModel& electron,
                                                 const HyperfineOverrides& overrides) {
    const auto sites = enumerate_sites(crystal, radius_nm);
    struct Tagged {
        double a_par, a_perp, distance;
        Element element;
        NnShell shell;
        int index;
    };
    std::vector<Tagged> tagged;
    tagged.reserve(sites.size());
    for (const auto& s : sites) {
        double ap, ax;
        const auto it = overrides.table.find(s.shell);
        if (it != overrides.table.end()) {
            ap = it->second.a_par;
            ax = it->second.a_perp;
        } else {
            const auto t = dipolar_hyperfine(s.position, electron.gamma_e,
                                             species_for(s.element).gamma);
            ap = a_par_of(t);
            ax = a_perp_of(t);
        }
        tagged.push_back({ap, ax, s.position.norm(), s.element, s.shell, s.index});
    }
    std::sort(tagged.begin(), tagged.end(), [](const Tagged& a, const Tagged& b) {
        if (a.element != b.element) return a.element < b.element;
        if (a.shell != b.shell) return a.shell < b.shell;
        if (a.a_par != b.a_par) return a.a_par < b.a_par;
        if (a.a_perp != b.a_perp) return a.a_perp < b.a_perp;
        return a.index < b.index;
    });

    std::vector<SiteClass> classes;
    auto close = [](double x, double y) {
        return std::abs(x - y) <= 1e-9 * std::max(std::abs(x), std::abs(y)) + 1e-12;
    };
    for (const auto& t : tagged) {
        if (!classes.empty()) {
            auto& c = classes.back();
            if (c.element == t.element && c.shell == t.shell && close(c.a_par, t.a_par) &&
                close(c.a_perp, t.a_perp)) {
                c.multiplicity++;
                c.members.push_back(t.index);
                continue;
            }
        }
        SiteClass c;
        c.element = t.element;
        c.shell = t.shell;
        c.a_par = t.a_par;
        c.a_perp = t.a_perp;
        c.distance = t.distance;
        c.multiplicity = 1;
        c.members.push_back(t.index);
        classes.push_back(std::move(c));
    }
    return classes;
}

// One occupancy-averaged magnetization factor: a site hosts a spin with
// probability c and then contributes M, otherwise 1.
inline double crosstalk_term(double c, double m) { return 1.0 - c * (1.0 - m); }

// Expected crosstalk at (N, tau): product of E(M_j) over all sites except the
// excluded one, evaluated class-wise.
inline double expected_crosstalk(const std::vector<SiteClass>& classes, std::size_t exclude_class,
                                 const IsotopeModel& isotopes, const ElectronModel& electron,
                                 int n_pulses, double tau, double abort_below = -2.0) {
    double p = 1.0;
    for (std::size_t j = 0; j < classes.size(); ++j) {
        const auto& cls = classes[j];
        const double c = isotopes.fraction(cls.element);
        if (c <= 0.0) continue;
        const NuclearSpinParams params{cls.a_par, cls.a_perp,
                                       electron.larmor(species_for(cls.element))};
        const double m = magnetization(params, electron, n_pulses, tau);
        const double e = crosstalk_term(c, m);
        const int count = cls.multiplicity - (j == exclude_class ? 1 : 0);
        if (count == 1)
            p *= e;
        else if (count > 1)
            p *= std::pow(e, count);
        if (p < abort_below) return p;  // valid abort: factors stay in (0, 1] for c < 1/2
    }
    return p;
}

struct SiteRecord {
    SiteClass cls;
    std::optional<GateDesign> design;
    double crosstalk = 1.0;  // P at the accepted (or best) design
    double fidelity = 0.0;   // combined census fidelity
    bool usable = false;
};

struct CensusResult {
    double n_mem = 0.0;      // expected usable memory count, all usable sites
    double n_mem_low = 0.0;  // subset with |A_par| below the reporting cutoff
    std::vector<SiteRecord> records;  // one per site class
    std::vector<double> hist_edges;   // |A_par|/2pi bin edges (Hz), log spaced
    std::vector<double> hist_weights; // c-weighted usable counts per bin
    double median_a_par = 0.0;        // c-weighted median |A_par| of usable sites (rad/s)
};

namespace detail {

// Best reachable conditional angle within t_max is ~ t_max * A_perp / pi
// (fastest at order 0); with 20% headroom this bounds the attainable fidelity.
inline bool prune_hopeless(double a_perp, const MemoryCriteria& criteria) {
    const double theta_max = 1.2 * criteria.t_max * std::abs(a_perp) / pi;
    if (theta_max >= criteria.theta_target) return false;
    const double delta = criteria.theta_target - theta_max;
    const double s = 4.0 * std::cos(0.5 * delta);
    const double f_bound = (s * s + 4.0) / 20.0;
    return f_bound < criteria.f_min - 0.02;
}

}  // namespace detail

inline CensusResult census_from_classes(const std::vector<SiteClass>& classes,
                                        const IsotopeModel& isotopes,
                                        const MemoryCriteria& criteria,
                                        const ElectronModel& electron,
                                        const CensusOptions& options) {
    criteria.validate();
    isotopes.validate();
    electron.validate();

    std::vector<SiteRecord> records(classes.size());
    parallel_for(classes.size(), options.workers, [&](std::size_t i) {
        const auto& cls = classes[i];
        SiteRecord rec;
        rec.cls = cls;
        records[i] = rec;
        if (isotopes.fraction(cls.element) <= 0.0) return;
        if (criteria.f_min == 0.0) {
            // any (N, tau) satisfies fidelity >= 0, so existence is trivial
            bool ok = true;
            if (criteria.window_lo && std::abs(cls.a_par) < *criteria.window_lo) ok = false;
            if (criteria.window_hi && std::abs(cls.a_par) > *criteria.window_hi) ok = false;
            records[i].usable = ok;
            return;
        }
        if (cls.a_perp == 0.0) return;  // no conditional axis, never usable
        if (options.prune && detail::prune_hopeless(cls.a_perp, criteria)) return;

        const NuclearSpinParams params{cls.a_par, cls.a_perp,
                                       electron.larmor(species_for(cls.element))};
        std::vector<GateDesign> candidates;
        for (int k = 0; k <= criteria.k_max; ++k) {
            const auto d = design_gate_at_order(params, electron, criteria.theta_target, k,
                                                criteria.t_max, options.scan_points);
            if (d) candidates.push_back(*d);
        }
        if (candidates.empty()) return;
        std::sort(candidates.begin(), candidates.end(),
                  [](const GateDesign& a, const GateDesign& b) { return a.fidelity > b.fidelity; });

        SiteRecord& out = records[i];
        const bool monotone = std::max(isotopes.c_si29, isotopes.c_c13) < 0.45;
        for (const auto& cand : candidates) {
            // abort the product once usability is out of reach even at P's
            // self-exclusion bound P_i <= P_all / (1 - 2 c_self)
            const double needed = 2.0 * criteria.f_min / std::max(cand.fidelity, 1e-12) - 1.0;
            const double c_self = isotopes.fraction(cls.element);
            const double abort = (!monotone || needed <= 0.0)
                                     ? -2.0
                                     : (needed * (1.0 - 2.0 * c_self) - 1e-3);
            const double p = expected_crosstalk(classes, i, isotopes, electron, cand.n_pulses,
                                                cand.tau, abort);
            double f;
            if (criteria.model == FidelityModel::CrosstalkTimesGate) {
                f = 0.5 * (1.0 + p) * cand.fidelity;
            } else {
                const double m_own =
                    magnetization(params, electron, cand.n_pulses, cand.tau);
                f = 0.5 * (1.0 - m_own * p);
            }
            if (f > out.fidelity) {
                out.fidelity = f;
                out.crosstalk = p;
                out.design = cand;
            }
            if (f >= criteria.f_min) {
                out.usable = true;
                break;
            }
        }
        // optional |A_par| acceptance window
        if (out.usable && criteria.window_lo && std::abs(cls.a_par) < *criteria.window_lo)
            out.usable = false;
        if (out.usable && criteria.window_hi && std::abs(cls.a_par) > *criteria.window_hi)
            out.usable = false;
    });

    CensusResult result;
    result.records = std::move(records);

    // histogram over |A_par|/2pi from 10 Hz to 100 MHz, 56 log bins
    const int n_bins = 56;
    result.hist_edges.resize(n_bins + 1);
    for (int b = 0; b <= n_bins; ++b)
        result.hist_edges[b] = std::pow(10.0, 1.0 + 6.0 * b / n_bins);
    result.hist_weights.assign(n_bins, 0.0);

    std::vector<std::pair<double, double>> usable_apar;  // (|A_par|, weight)
    std::vector<double> n_mem_terms, n_mem_low_terms;
    for (const auto& rec : result.records) {
        if (!rec.usable) continue;
        const double c = isotopes.fraction(rec.cls.element);
        const double weight = c * rec.cls.multiplicity;
        n_mem_terms.push_back(weight);
        const double apar_abs = std::abs(rec.cls.a_par);
        if (apar_abs < options.low_a_par_cutoff && rec.cls.shell == NnShell::None)
            n_mem_low_terms.push_back(weight);
        usable_apar.emplace_back(apar_abs, weight);
        const double hz = hz_from_rad(apar_abs);
        const auto it = std::upper_bound(result.hist_edges.begin(), result.hist_edges.end(), hz);
        if (it != result.hist_edges.begin() && it != result.hist_edges.end())
            result.hist_weights[it - result.hist_edges.begin() - 1] += weight;
    }
    result.n_mem = pairwise_reduce(std::move(n_mem_terms), 0.0, std::plus<double>());
    result.n_mem_low = pairwise_reduce(std::move(n_mem_low_terms), 0.0, std::plus<double>());

    if (!usable_apar.empty()) {
        std::sort(usable_apar.begin(), usable_apar.end());
        double total = 0.0;
        for (const auto& [a, w] : usable_apar) total += w;
        double run = 0.0;
        for (const auto& [a, w] : usable_apar) {
            run += w;
            if (run >= 0.5 * total) {
                result.median_a_par = a;
                break;
            }
        }
    }
    return result;
}

inline CensusResult census(const CrystalModel& crystal, const IsotopeModel& isotopes,
                           const MemoryCriteria& criteria, const ElectronModel& electron,
                           const CensusOptions& options = {}) {
    const auto classes =
        build_site_classes(crystal, options.radius_nm, electron, options.overrides);
    return census_from_classes(classes, isotopes, criteria, electron, options);
}

struct SweepRow {
    double concentration = 0.0;
    double n_mem = 0.0;
    double n_mem_low = 0.0;
    double median_a_par = 0.0;  // rad/s
    std::vector<double> hist_weights;
};

// Census per concentration with [13C] = [29Si]; the site classes are geometric
// and shared across the sweep.
inline std::vector<SweepRow> concentration_sweep(const CrystalModel& crystal,
                                                 const std::vector<double>& concentrations,
                                                 const MemoryCriteria& criteria,
                                                 const ElectronModel& electron,
                                                 const CensusOptions& options = {}) {
    for (std::size_t i = 1; i < concentrations.size(); ++i)
        if (concentrations[i] <= concentrations[i - 1])
            throw std::invalid_argument("concentration_sweep: concentrations must be sorted");
    const auto classes =
        build_site_classes(crystal, options.radius_nm, electron, options.overrides);
    std::vector<SweepRow> rows;
    for (double c : concentrations) {
        const auto res = census_from_classes(classes, {c, c}, criteria, electron, options);
        rows.push_back({c, res.n_mem, res.n_mem_low, res.median_a_par, res.hist_weights});
    }
    return rows;
}

}  // namespace sicmem
