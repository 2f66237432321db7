#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sicmem/cce.hpp"
#include "sicmem/rng.hpp"
#include "support/oracles.hpp"

using namespace sicmem;

namespace {

ElectronModel electron_at(double b_gauss, int branch = -1) {
    ElectronModel e;
    e.b_field = b_gauss * gauss_to_tesla;
    e.branch = branch;
    return e;
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * i / (n - 1));
    return out;
}

// deterministic bath with an exact number of spins, for the small-bath
// oracles: draw distinct lattice sites, then attach real hyperfine tensors
std::vector<ClusterSpin> sampled_cluster_spins(int n_spins, const ElectronModel& e,
                                               std::uint64_t& seed_io) {
    static const CrystalModel crystal = make_4h_sic();
    static const auto sites = enumerate_sites(crystal, 1.6);
    Rng rng(seed_io++);
    BathConfiguration bath;
    std::vector<int> chosen;
    while (static_cast<int>(chosen.size()) < n_spins) {
        const int idx = static_cast<int>(rng.uniform(0.0, static_cast<double>(sites.size())));
        if (std::find(chosen.begin(), chosen.end(), idx) != chosen.end()) continue;
        chosen.push_back(idx);
        bath.spins.push_back({sites[idx], sites[idx].element});
    }
    attach_hyperfine(bath, e);
    return cluster_spins_from_bath(bath, e);
}

std::vector<oracle::ExactBathSpin> to_oracle(const std::vector<ClusterSpin>& spins) {
    std::vector<oracle::ExactBathSpin> out;
    for (const auto& s : spins) out.push_back({s.larmor, s.avec});
    return out;
}

void oracle_pairs(const std::vector<ClusterSpin>& spins,
                  std::vector<std::array<double, 2>>& czz_bff,
                  std::vector<std::array<int, 2>>& index) {
    for (int i = 0; i < static_cast<int>(spins.size()); ++i)
        for (int j = i + 1; j < static_cast<int>(spins.size()); ++j) {
            const auto pc =
                nuclear_pair_coupling(spins[j].position - spins[i].position, spins[i].gamma,
                                      spins[j].gamma, spins[i].species_tag == spins[j].species_tag);
            czz_bff.push_back({pc.c_zz, pc.b_ff});
            index.push_back({i, j});
        }
}

}  // namespace

TEST_CASE("build_clusters combinatorics") {
    std::vector<ClusterSpin> spins(1);
    REQUIRE(build_clusters(spins, 2, 1.0).size() == 1);

    std::vector<ClusterSpin> three(3);
    three[0].position = {0.0, 0.0, 0.0};
    three[1].position = {0.3, 0.0, 0.0};
    three[2].position = {0.0, 0.3, 0.0};
    REQUIRE(build_clusters(three, 2, 1.0).size() == 6);   // 3 singletons + 3 pairs
    REQUIRE(build_clusters(three, 2, 0.0).size() == 3);   // cutoff 0: singletons only
    REQUIRE(build_clusters(three, 3, 1.0).size() == 7);   // + 1 triple
    REQUIRE_THROWS_WITH(build_clusters(three, 5, 1.0),
                        Catch::Matchers::ContainsSubstring("unsupported order"));
    REQUIRE_THROWS_AS(build_clusters(three, 0, 1.0), std::invalid_argument);
}

TEST_CASE("single spin, Hahn, pure-z hyperfine refocuses exactly") {
    const auto e = electron_at(100.0);
    ClusterSpin s;
    s.larmor = e.larmor(species_si29());
    s.avec = {0.0, 0.0, rad_from_hz(40e3)};
    s.gamma = species_si29().gamma;
    const auto times = linspace(0.0, 2e-3, 60);
    const auto l = cluster_coherence({s}, {{0}}, make_hahn(), e, times);
    for (double v : l) REQUIRE(v == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("single spin Hahn matches the dense-matrix oracle") {
    const auto e = electron_at(130.0);
    std::uint64_t seed = 10;
    const auto spins = sampled_cluster_spins(1, e, seed);
    const auto times = linspace(1e-6, 4e-3, 160);
    const auto l = cluster_coherence(spins, {{0}}, make_hahn(), e, times);
    double worst = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double exact =
            oracle::exact_coherence(to_oracle(spins), {}, {}, {0.5}, e.branch, times[i]);
        worst = std::max(worst, std::abs(l[i] - exact));
    }
    REQUIRE(worst < 1e-9);
}

TEST_CASE("uncoupled pair factorizes: CCE2 correction is exactly 1") {
    const auto e = electron_at(200.0);
    // separation at the magic angle: c_zz = b_ff = 0
    const double theta = std::acos(1.0 / std::sqrt(3.0));
    ClusterSpin a, b;
    a.larmor = b.larmor = e.larmor(species_si29());
    a.gamma = b.gamma = species_si29().gamma;
    a.avec = {rad_from_hz(3e3), 0.0, rad_from_hz(9e3)};
    b.avec = {rad_from_hz(5e3), rad_from_hz(1e3), rad_from_hz(-6e3)};
    a.position = {0.0, 0.0, 0.0};
    b.position = {0.8 * std::sin(theta), 0.0, 0.8 * std::cos(theta)};

    const auto times = linspace(0.0, 3e-3, 50);
    const auto pair = cluster_coherence({a, b}, {{0, 1}}, make_hahn(), e, times);
    const auto la = cluster_coherence({a, b}, {{0}}, make_hahn(), e, times);
    const auto lb = cluster_coherence({a, b}, {{1}}, make_hahn(), e, times);
    for (std::size_t i = 0; i < times.size(); ++i)
        REQUIRE(pair[i] == Catch::Approx(la[i] * lb[i]).margin(1e-10));
}

TEST_CASE("empty bath gives L = 1") {
    const auto e = electron_at(100.0);
    const auto curve = cce_coherence(std::vector<ClusterSpin>{}, make_hahn(), e,
                                     linspace(0.0, 1e-3, 20), {});
    for (double v : curve.values) REQUIRE(v == 1.0);
    REQUIRE_FALSE(curve.flagged());
}

TEST_CASE("L(0) = 1 for every sequence") {
    const auto e = electron_at(80.0);
    std::uint64_t seed = 33;
    const auto spins = sampled_cluster_spins(3, e, seed);
    for (const auto& seq : {make_ramsey(), make_hahn(), make_cpmg(8)}) {
        CceOptions opt;
        opt.pair_cutoff_nm = 5.0;
        const auto curve = cce_coherence(spins, seq, e, linspace(0.0, 1e-3, 10), opt);
        REQUIRE(curve.values[0] == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("full-order CCE equals exact Hilbert-space evolution on small baths") {
    const auto e = electron_at(90.0);
    std::uint64_t seed = 100;
    for (int n : {2, 3, 4}) {
        const auto spins = sampled_cluster_spins(n, e, seed);
        std::vector<std::array<double, 2>> czz_bff;
        std::vector<std::array<int, 2>> index;
        oracle_pairs(spins, czz_bff, index);

        const auto times = linspace(1e-5, 2.5e-3, 40);
        CceOptions opt;
        opt.order = n;
        opt.pair_cutoff_nm = 1e9;
        const auto curve = cce_coherence(spins, make_hahn(), e, times, opt);

        double worst = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (curve.flags[i]) continue;
            const double exact =
                oracle::exact_coherence(to_oracle(spins), czz_bff, index, {0.5}, e.branch, times[i]);
            if (std::abs(exact) < 0.05) continue;  // keep clear of the division guard
            worst = std::max(worst, std::abs(curve.values[i] - exact));
        }
        INFO("bath size " << n << " worst deviation " << worst);
        REQUIRE(worst < 1e-9);
    }
}

TEST_CASE("CCE2 tracks exact evolution on 3-spin baths") {
    const auto e = electron_at(90.0);
    std::uint64_t seed = 400;
    for (int round = 0; round < 5; ++round) {
        const auto spins = sampled_cluster_spins(3, e, seed);
        std::vector<std::array<double, 2>> czz_bff;
        std::vector<std::array<int, 2>> index;
        oracle_pairs(spins, czz_bff, index);

        const auto times = linspace(1e-5, 4e-3, 50);
        CceOptions opt;
        opt.order = 2;
        opt.pair_cutoff_nm = 1e9;
        const auto curve = cce_coherence(spins, make_hahn(), e, times, opt);
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double exact =
                oracle::exact_coherence(to_oracle(spins), czz_bff, index, {0.5}, e.branch, times[i]);
            if (std::abs(exact) < 0.2) continue;
            REQUIRE(std::abs(curve.values[i] - exact) < 0.02);
        }
    }
}

TEST_CASE("order-1 result ignores the pair cutoff entirely") {
    const auto e = electron_at(150.0);
    std::uint64_t seed = 77;
    const auto spins = sampled_cluster_spins(4, e, seed);
    CceOptions tight, loose;
    tight.order = loose.order = 1;
    tight.pair_cutoff_nm = 0.0;
    loose.pair_cutoff_nm = 100.0;
    const auto times = linspace(0.0, 2e-3, 30);
    const auto a = cce_coherence(spins, make_hahn(), e, times, tight);
    const auto b = cce_coherence(spins, make_hahn(), e, times, loose);
    REQUIRE(a.values == b.values);
}

TEST_CASE("worker count does not change the result") {
    const auto e = electron_at(150.0);
    std::uint64_t seed = 900;
    const auto spins = sampled_cluster_spins(4, e, seed);
    CceOptions one, two;
    one.order = two.order = 2;
    one.pair_cutoff_nm = two.pair_cutoff_nm = 10.0;
    one.workers = 1;
    two.workers = 2;
    const auto times = linspace(0.0, 2e-3, 25);
    const auto a = cce_coherence(spins, make_cpmg(4), e, times, one);
    const auto b = cce_coherence(spins, make_cpmg(4), e, times, two);
    REQUIRE(a.values == b.values);
}

TEST_CASE("paramagnetic pair bath: empty and single-pair oracle") {
    const auto e = electron_at(500.0);
    const auto times = linspace(0.0, 5e-3, 60);
    const auto none = pair_bath_coherence({}, make_hahn(), e, times);
    for (double v : none.values) REQUIRE(v == 1.0);

    // one dark pair vs the dense 4-dim oracle
    const std::vector<Eigen::Vector3d> pos = {{30.0, -10.0, 25.0}, {55.0, 20.0, -15.0}};
    const auto curve = pair_bath_coherence(pos, make_hahn(), e, times);
    std::vector<oracle::ExactBathSpin> dark;
    for (const auto& p : pos) {
        const double d_zz = nuclear_pair_coupling(p, e.gamma_e, e.gamma_e, true).c_zz;
        dark.push_back({0.0, {0.0, 0.0, d_zz}});
    }
    const auto pc = nuclear_pair_coupling(pos[1] - pos[0], e.gamma_e, e.gamma_e, true);
    double worst = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double exact = oracle::exact_coherence(dark, {{pc.c_zz, pc.b_ff}}, {{0, 1}}, {0.5},
                                                     e.branch, times[i]);
        worst = std::max(worst, std::abs(curve.values[i] - exact));
    }
    REQUIRE(worst < 1e-9);
}

TEST_CASE("paramagnetic Hahn T2 decreases with density") {
    const auto e = electron_at(500.0);
    const auto times = linspace(1e-5, 60e-3, 140);
    std::vector<double> medians;
    for (double density : {3e14, 1e15, 3e15}) {
        auto factory = [&](std::uint64_t seed) {
            const auto pos = sample_paramagnetic_bath(density, 100.0, seed);
            return pair_bath_coherence(pos, make_hahn(), e, times, 1e9);
        };
        const auto ens = ensemble_coherence(factory, 40, 0xD00D + static_cast<int>(density / 1e13),
                                            2);
        INFO("density " << density << " median T2 " << ens.median_t2 << " failed fits "
                        << ens.failed_fits);
        REQUIRE(ens.median_t2 > 0.0);
        medians.push_back(ens.median_t2);
    }
    REQUIRE(medians[0] > medians[1]);
    REQUIRE(medians[1] > medians[2]);
}

TEST_CASE("total coherence composes pointwise") {
    CoherenceCurve a, b;
    a.times = b.times = linspace(0.0, 1e-3, 30);
    a.flags.assign(30, 0);
    b.flags.assign(30, 0);
    for (double t : a.times) {
        a.values.push_back(std::exp(-std::pow(t / 0.4e-3, 2.0)));
        b.values.push_back(std::exp(-t / 0.6e-3));
    }
    const auto prod = total_coherence(a, b);
    for (std::size_t i = 0; i < prod.values.size(); ++i)
        REQUIRE(prod.values[i] == Catch::Approx(a.values[i] * b.values[i]));

    // identity factor
    CoherenceCurve one = a;
    one.values.assign(30, 1.0);
    const auto same = total_coherence(a, one);
    REQUIRE(same.values == a.values);

    // the product decays at least as fast as either factor
    const auto fa = fit_stretched(a), fb = fit_stretched(b), fp = fit_stretched(prod);
    REQUIRE(fp.t2 <= std::min(fa.t2, fb.t2) * 1.001);

    CoherenceCurve bad = b;
    bad.times[3] *= 1.5;
    REQUIRE_THROWS_WITH(total_coherence(a, bad), Catch::Matchers::ContainsSubstring("grid mismatch"));
}

TEST_CASE("stretched-exponential fit recovers synthetic generators") {
    const auto times = linspace(1e-5, 5e-3, 120);
    SECTION("Gaussian") {
        std::vector<double> v;
        for (double t : times) v.push_back(std::exp(-std::pow(t / 1e-3, 2.0)));
        const auto fit = fit_stretched(times, v);
        REQUIRE(fit.t2 == Catch::Approx(1e-3).epsilon(1e-3));
        REQUIRE(fit.exponent == Catch::Approx(2.0).margin(0.02));
    }
    SECTION("plain exponential") {
        std::vector<double> v;
        for (double t : times) v.push_back(std::exp(-t / 2e-3));
        const auto fit = fit_stretched(times, v);
        REQUIRE(fit.t2 == Catch::Approx(2e-3).epsilon(1e-3));
        REQUIRE(fit.exponent == Catch::Approx(1.0).margin(0.02));
    }
    SECTION("1% additive noise keeps T2 within 5%") {
        Rng rng(321);
        for (int round = 0; round < 10; ++round) {
            std::vector<double> v;
            for (double t : times)
                v.push_back(std::exp(-std::pow(t / 1.3e-3, 1.7)) + 0.01 * rng.normal());
            const auto fit = fit_stretched(times, v);
            REQUIRE(std::abs(fit.t2 - 1.3e-3) / 1.3e-3 < 0.05);
        }
    }
    SECTION("non-decaying input raises") {
        std::vector<double> v(times.size(), 0.9);
        REQUIRE_THROWS_WITH(fit_stretched(times, v),
                            Catch::Matchers::ContainsSubstring("insufficient decay"));
    }
}

TEST_CASE("dilute Ramsey decay is approximately Gaussian per configuration") {
    // each frozen bath realization dephases near-Gaussian; the disorder mean
    // tends exponential in the dilute limit, so the Gaussian check applies to
    // the per-seed fits
    const auto e = electron_at(50.0);
    const CrystalModel crystal = make_4h_sic();
    const auto sites = exclude_contact_shells(enumerate_sites(crystal, 5.0));
    const auto times = linspace(1e-7, 3.5e-4, 90);
    auto factory = [&](std::uint64_t seed) {
        BathConfiguration bath = sample_bath(sites, {0.0015, 0.0002}, seed);
        attach_hyperfine(bath, e);
        CceOptions opt;
        opt.order = 1;
        return cce_coherence(bath, make_ramsey(), e, times, opt);
    };
    const auto ens = ensemble_coherence(factory, 30, 0xA11CE, 2);
    REQUIRE(ens.failed_fits == 0);
    std::vector<double> exps;
    for (const auto& f : ens.fits) exps.push_back(f.exponent);
    std::sort(exps.begin(), exps.end());
    const double median_n = exps[exps.size() / 2];
    INFO("median per-seed T2* " << ens.median_t2 << " exponent " << median_n);
    REQUIRE(median_n > 1.5);
    REQUIRE(median_n < 2.5);
}
