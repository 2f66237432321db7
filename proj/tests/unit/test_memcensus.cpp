#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sicmem/memcensus.hpp"

using namespace sicmem;

namespace {

ElectronModel electron_at(double b_gauss) {
    ElectronModel e;
    e.b_field = b_gauss * gauss_to_tesla;
    return e;
}

const CrystalModel crystal = make_4h_sic();

CensusOptions small_options() {
    CensusOptions o;
    o.radius_nm = 2.6;
    o.scan_points = 101;
    o.workers = 2;
    return o;
}

}  // namespace

TEST_CASE("crosstalk term arithmetic") {
    REQUIRE(crosstalk_term(0.0, -0.3) == 1.0);
    REQUIRE(crosstalk_term(1.0, 0.8) == Catch::Approx(0.8));
    REQUIRE(crosstalk_term(0.5, 0.8) * crosstalk_term(0.5, 0.6) == Catch::Approx(0.72));
}

TEST_CASE("expected crosstalk: trivial limits and site-product equivalence") {
    const auto e = electron_at(500.0);
    const auto classes = build_site_classes(crystal, 1.8, e, HyperfineOverrides::defaults());
    REQUIRE(!classes.empty());

    SECTION("zero concentration gives P = 1 exactly") {
        REQUIRE(expected_crosstalk(classes, 0, {0.0, 0.0}, e, 32, 1.1e-6) == 1.0);
    }
    SECTION("A_perp = 0 everywhere gives P = 1 exactly") {
        std::vector<SiteClass> ising = classes;
        for (auto& c : ising) c.a_perp = 0.0;
        REQUIRE(expected_crosstalk(ising, ising.size(), {0.3, 0.2}, e, 32, 1.1e-6) == 1.0);
    }
    SECTION("class product equals the expanded per-site product") {
        const IsotopeModel iso{0.047, 0.011};
        const int n = 16;
        const double tau = 0.9e-6;
        const double via_classes = expected_crosstalk(classes, classes.size(), iso, e, n, tau);
        double direct = 1.0;
        for (const auto& cls : classes) {
            const NuclearSpinParams p{cls.a_par, cls.a_perp, e.larmor(species_for(cls.element))};
            const double m = magnetization(p, e, n, tau);
            for (int rep = 0; rep < cls.multiplicity; ++rep)
                direct *= crosstalk_term(iso.fraction(cls.element), m);
        }
        REQUIRE(via_classes == Catch::Approx(direct).epsilon(1e-10));
    }
    SECTION("excluding a class removes exactly one factor") {
        const IsotopeModel iso{0.047, 0.011};
        const double all = expected_crosstalk(classes, classes.size(), iso, e, 16, 0.9e-6);
        const double excl = expected_crosstalk(classes, 3, iso, e, 16, 0.9e-6);
        const NuclearSpinParams p{classes[3].a_par, classes[3].a_perp,
                                  e.larmor(species_for(classes[3].element))};
        const double m = magnetization(p, e, 16, 0.9e-6);
        REQUIRE(excl * crosstalk_term(iso.fraction(classes[3].element), m) ==
                Catch::Approx(all).epsilon(1e-10));
    }
}

TEST_CASE("site classes partition the enumerated sites") {
    const auto e = electron_at(500.0);
    const auto classes = build_site_classes(crystal, 3.0, e, HyperfineOverrides::defaults());
    const auto sites = enumerate_sites(crystal, 3.0);
    std::size_t total = 0;
    for (const auto& c : classes) {
        REQUIRE(c.multiplicity == static_cast<int>(c.members.size()));
        total += c.multiplicity;
    }
    REQUIRE(total == sites.size());
    // grouping must compress substantially (hexagonal orbits)
    REQUIRE(classes.size() * 3 < sites.size());

    // spot-check: members share the class couplings
    for (std::size_t k = 0; k < classes.size(); k += classes.size() / 7 + 1) {
        const auto& c = classes[k];
        const int idx = c.members.back();
        if (sites[idx].shell != NnShell::None) continue;
        const auto t = dipolar_hyperfine(sites[idx].position, e.gamma_e,
                                         species_for(sites[idx].element).gamma);
        REQUIRE(a_par_of(t) == Catch::Approx(c.a_par).epsilon(1e-8));
        REQUIRE(a_perp_of(t) == Catch::Approx(c.a_perp).margin(1e-8 * std::abs(c.a_par) + 1e-9));
    }
}

TEST_CASE("census: zero concentration counts nothing") {
    const auto e = electron_at(500.0);
    MemoryCriteria crit;
    const auto res = census(crystal, {0.0, 0.0}, crit, e, small_options());
    REQUIRE(res.n_mem == 0.0);
    REQUIRE(res.n_mem_low == 0.0);
}

TEST_CASE("census: F_min = 0 counts every enumerated site") {
    const auto e = electron_at(500.0);
    MemoryCriteria crit;
    crit.f_min = 0.0;
    const IsotopeModel iso{0.01, 0.004};
    const auto opts = small_options();
    const auto res = census(crystal, iso, crit, e, opts);
    const auto sites = enumerate_sites(crystal, opts.radius_nm);
    double expected = 0.0;
    for (const auto& s : sites) expected += iso.fraction(s.element);
    REQUIRE(res.n_mem == Catch::Approx(expected).epsilon(1e-9));
}

TEST_CASE("unusable cases: no conditional axis") {
    const auto e = electron_at(500.0);
    // a single on-axis class: A_perp = 0
    SiteClass axial;
    axial.element = Element::Si;
    axial.a_par = rad_from_hz(20e3);
    axial.a_perp = 0.0;
    axial.multiplicity = 1;
    axial.members = {0};
    MemoryCriteria crit;
    const auto res = census_from_classes({axial}, {0.01, 0.0}, crit, e, small_options());
    REQUIRE_FALSE(res.records[0].usable);
    REQUIRE(res.n_mem == 0.0);
}

TEST_CASE("isolated site: census fidelity reduces to the intrinsic gate fidelity") {
    const auto e = electron_at(584.0);
    SiteClass lone;
    lone.element = Element::Si;
    lone.a_par = rad_from_hz(650.0);
    lone.a_perp = rad_from_hz(11.45e3);
    lone.multiplicity = 1;
    lone.members = {0};
    MemoryCriteria crit;
    crit.t_max = 2.0e-3;
    crit.k_max = 6;
    auto opts = small_options();
    const auto res = census_from_classes({lone}, {0.047, 0.0}, crit, e, opts);
    REQUIRE(res.records[0].design.has_value());
    REQUIRE(res.records[0].crosstalk == 1.0);  // empty product
    REQUIRE(res.records[0].fidelity ==
            Catch::Approx(0.5 * (1.0 + 1.0) * res.records[0].design->fidelity));
    REQUIRE(res.records[0].usable == (res.records[0].fidelity >= crit.f_min));
    REQUIRE(res.records[0].usable);
    REQUIRE(res.n_mem == Catch::Approx(0.047));
}

TEST_CASE("raising F_min never converts unusable to usable") {
    const auto e = electron_at(500.0);
    MemoryCriteria lo, hi;
    lo.f_min = 0.8;
    hi.f_min = 0.95;
    const IsotopeModel iso{0.005, 0.005};
    const auto opts = small_options();
    const auto classes = build_site_classes(crystal, opts.radius_nm, e, opts.overrides);
    const auto res_lo = census_from_classes(classes, iso, lo, e, opts);
    const auto res_hi = census_from_classes(classes, iso, hi, e, opts);
    REQUIRE(res_lo.records.size() == res_hi.records.size());
    for (std::size_t i = 0; i < res_lo.records.size(); ++i)
        if (res_hi.records[i].usable) REQUIRE(res_lo.records[i].usable);
    REQUIRE(res_hi.n_mem <= res_lo.n_mem);
}

TEST_CASE("census monotonicity over the criteria grid") {
    const auto e = electron_at(500.0);
    const IsotopeModel iso{0.004, 0.004};
    const auto opts = small_options();
    const auto classes = build_site_classes(crystal, opts.radius_nm, e, opts.overrides);

    const double f_grid[3] = {0.85, 0.9, 0.95};
    const double t_grid[3] = {1.0e-3, 1.5e-3, 2.0e-3};
    double n_mem[3][3];
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            MemoryCriteria crit;
            crit.f_min = f_grid[a];
            crit.t_max = t_grid[b];
            n_mem[a][b] = census_from_classes(classes, iso, crit, e, opts).n_mem;
        }
    for (int b = 0; b < 3; ++b) {
        REQUIRE(n_mem[1][b] <= n_mem[0][b] + 1e-12);  // non-increasing in F_min
        REQUIRE(n_mem[2][b] <= n_mem[1][b] + 1e-12);
    }
    for (int a = 0; a < 3; ++a) {
        REQUIRE(n_mem[a][1] >= n_mem[a][0] - 1e-12);  // non-decreasing in T_max
        REQUIRE(n_mem[a][2] >= n_mem[a][1] - 1e-12);
    }
}

TEST_CASE("dual-species census is close to the sum of single-species censuses") {
    const auto e = electron_at(500.0);
    MemoryCriteria crit;
    const auto opts = small_options();
    const auto classes = build_site_classes(crystal, opts.radius_nm, e, opts.overrides);
    const double c = 0.003;
    const double both = census_from_classes(classes, {c, c}, crit, e, opts).n_mem;
    const double si_only = census_from_classes(classes, {c, 0.0}, crit, e, opts).n_mem;
    const double c_only = census_from_classes(classes, {0.0, c}, crit, e, opts).n_mem;
    INFO("both " << both << " si " << si_only << " c " << c_only);
    REQUIRE(both >= si_only - 1e-12);
    REQUIRE(both >= c_only - 1e-12);
    REQUIRE(std::abs(both - (si_only + c_only)) <= 0.3 * (si_only + c_only));
}

TEST_CASE("pruning does not change the census") {
    const auto e = electron_at(500.0);
    MemoryCriteria crit;
    auto opts = small_options();
    opts.radius_nm = 2.0;
    const auto classes = build_site_classes(crystal, opts.radius_nm, e, opts.overrides);
    opts.prune = true;
    const auto pruned = census_from_classes(classes, {0.01, 0.01}, crit, e, opts);
    opts.prune = false;
    const auto full = census_from_classes(classes, {0.01, 0.01}, crit, e, opts);
    REQUIRE(pruned.n_mem == full.n_mem);
    REQUIRE(pruned.n_mem_low == full.n_mem_low);
    for (std::size_t i = 0; i < full.records.size(); ++i)
        REQUIRE(pruned.records[i].usable == full.records[i].usable);
}

TEST_CASE("concentration sweep mechanics") {
    const auto e = electron_at(500.0);
    MemoryCriteria crit;
    auto opts = small_options();
    opts.radius_nm = 2.0;
    REQUIRE_THROWS_AS(concentration_sweep(crystal, {0.01, 0.001}, crit, e, opts),
                      std::invalid_argument);
    const std::vector<double> cs = {0.0, 0.002, 0.02};
    const auto rows = concentration_sweep(crystal, cs, crit, e, opts);
    REQUIRE(rows.size() == cs.size());
    REQUIRE(rows[0].n_mem == 0.0);  // c = 0 endpoint
    for (std::size_t i = 0; i < rows.size(); ++i) REQUIRE(rows[i].concentration == cs[i]);
}

TEST_CASE("census is deterministic") {
    const auto e = electron_at(500.0);
    MemoryCriteria crit;
    auto opts = small_options();
    opts.radius_nm = 2.0;
    const auto a = census(crystal, {0.008, 0.002}, crit, e, opts);
    const auto b = census(crystal, {0.008, 0.002}, crit, e, opts);
    REQUIRE(a.n_mem == b.n_mem);
    REQUIRE(a.median_a_par == b.median_a_par);
    REQUIRE(a.hist_weights == b.hist_weights);
}
