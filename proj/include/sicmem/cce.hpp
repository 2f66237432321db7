#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <vector>

#include "sicmem/ddgate.hpp"
#include "sicmem/fitting.hpp"
#include "sicmem/hyperfine.hpp"
#include "sicmem/threading.hpp"

// Cluster-correlation expansion of the central-spin coherence L(t) under
// Ramsey/Hahn/CPMG, for nuclear baths and for paramagnetic electron-pair
// baths. Clusters evolve under the two branch-conditional Hamiltonians and
// contribute L_C(t) = Tr[rho_C U_beta^dag U_alpha], rho_C maximally mixed.

namespace sicmem {

struct Cluster {
    std::vector<int> indices;  // sorted, distinct bath-spin indices
    int order() const { return static_cast<int>(indices.size()); }
};

inline constexpr int cce_max_order = 4;  // >2 only exercised by exactness checks

// Spin data a cluster needs: signed Larmor frequency, the secular hyperfine
// row (A_zx, A_zy, A_zz), and enough identity to form pair couplings.
struct ClusterSpin {
    double larmor = 0.0;            // rad/s
    Eigen::Vector3d avec{0, 0, 0};  // rad/s
    Eigen::Vector3d position{0, 0, 0};
    double gamma = 0.0;
    int species_tag = 0;  // flip-flops only between equal tags
};

inline std::vector<ClusterSpin> cluster_spins_from_bath(const BathConfiguration& bath,
                                                        const ElectronModel& electron) {
    std::vector<ClusterSpin> out;
    out.reserve(bath.spins.size());
    for (const auto& s : bath.spins) {
        if (!s.attached) throw std::logic_error("bath spin has no hyperfine tensor attached");
        const SpinSpecies sp = species_for(s.element);
        out.push_back({electron.larmor(sp),
                       Eigen::Vector3d(s.tensor(2, 0), s.tensor(2, 1), s.tensor(2, 2)),
                       s.site.position, sp.gamma, s.element == Element::Si ? 0 : 1});
    }
    return out;
}

// All clusters up to `order`: singletons, close pairs, and (for the exactness
// checks) cliques of size 3 and 4 whose members are pairwise within the
// cutoff.
inline std::vector<Cluster> build_clusters(const std::vector<ClusterSpin>& spins, int order,
                                           double r_pair_cutoff_nm) {
    if (order < 1 || order > cce_max_order) throw std::invalid_argument("unsupported order");
    const int n = static_cast<int>(spins.size());
    std::vector<Cluster> clusters;
    for (int i = 0; i < n; ++i) clusters.push_back({{i}});
    if (order < 2) return clusters;

    auto close = [&](int i, int j) {
        return (spins[i].position - spins[j].position).norm() <= r_pair_cutoff_nm;
    };
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (close(i, j)) {
                clusters.push_back({{i, j}});
                pairs.emplace_back(i, j);
            }
    if (order < 3) return clusters;

    for (const auto& [i, j] : pairs)
        for (int k = j + 1; k < n; ++k)
            if (close(i, k) && close(j, k)) {
                clusters.push_back({{i, j, k}});
                if (order >= 4)
                    for (int l = k + 1; l < n; ++l)
                        if (close(i, l) && close(j, l) && close(k, l))
                            clusters.push_back({{i, j, k, l}});
            }
    // sub-clusters must precede their parents in the correction pass
    std::stable_sort(clusters.begin(), clusters.end(),
                     [](const Cluster& a, const Cluster& b) { return a.order() < b.order(); });
    return clusters;
}

namespace detail {

inline Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline Eigen::MatrixXcd spin_op(int which, int index, int n_spins) {
    using namespace std::complex_literals;
    Eigen::Matrix2cd half;
    switch (which) {
        case 0: half << 0, 0.5, 0.5, 0; break;                // Ix
        case 1: half << 0, -0.5i, 0.5i, 0; break;             // Iy
        default: half << 0.5, 0, 0, -0.5; break;              // Iz
    }
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
    for (int i = 0; i < n_spins; ++i)
        out = kron(out, i == index ? Eigen::MatrixXcd(half)
                                   : Eigen::MatrixXcd(Eigen::Matrix2cd::Identity()));
    return out;
}

// Branch-conditional cluster Hamiltonian: nuclear Zeeman, alpha-scaled
// hyperfine vectors, and secular intra-cluster dipolar couplings.
inline Eigen::MatrixXcd cluster_hamiltonian(const std::vector<ClusterSpin>& spins,
                                            const std::vector<int>& members, int alpha) {
    const int m = static_cast<int>(members.size());
    const int dim = 1 << m;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    for (int i = 0; i < m; ++i) {
        const auto& s = spins[members[i]];
        h += (s.larmor + alpha * s.avec.z()) * spin_op(2, i, m);
        if (alpha != 0) {
            if (s.avec.x() != 0.0) h += alpha * s.avec.x() * spin_op(0, i, m);
            if (s.avec.y() != 0.0) h += alpha * s.avec.y() * spin_op(1, i, m);
        }
    }
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) {
            const auto& si = spins[members[i]];
            const auto& sj = spins[members[j]];
            const PairCoupling pc = nuclear_pair_coupling(sj.position - si.position, si.gamma,
                                                          sj.gamma, si.species_tag == sj.species_tag);
            h += pc.c_zz * spin_op(2, i, m) * spin_op(2, j, m);
            if (pc.b_ff != 0.0)
                h += pc.b_ff * (spin_op(0, i, m) * spin_op(0, j, m) +
                                spin_op(1, i, m) * spin_op(1, j, m));
        }
    return h;
}

struct EigenBasis {
    Eigen::MatrixXcd vectors;
    Eigen::VectorXd values;

    Eigen::MatrixXcd propagator(double t) const {
        Eigen::VectorXcd ph(values.size());
        for (int i = 0; i < values.size(); ++i) ph[i] = std::exp(std::complex<double>(0, -values[i] * t));
        return vectors * ph.asDiagonal() * vectors.adjoint();
    }
};

inline EigenBasis diagonalize(const Eigen::MatrixXcd& h) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    return {es.eigenvectors(), es.eigenvalues()};
}

// Tr[U_beta^dag U_alpha] / dim for one total time, alternating the two branch
// Hamiltonians at the pulse fractions.
inline double conditional_trace(const EigenBasis& h0, const EigenBasis& h1,
                                const std::vector<double>& fractions, double t) {
    const int dim = static_cast<int>(h0.values.size());
    auto evolve = [&](bool start_zero) {
        Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(dim, dim);
        double prev = 0.0;
        bool zero = start_zero;
        for (double f : fractions) {
            u = (zero ? h0 : h1).propagator((f - prev) * t) * u;
            prev = f;
            zero = !zero;
        }
        return Eigen::MatrixXcd((zero ? h0 : h1).propagator((1.0 - prev) * t) * u);
    };
    const Eigen::MatrixXcd ua = evolve(true);
    const Eigen::MatrixXcd ub = evolve(false);
    return (ub.adjoint() * ua).trace().real() / dim;
}

// Singleton fast path: SU(2) quaternions instead of dense 2x2 algebra.
inline double singleton_trace(const ClusterSpin& s, int alpha,
                              const std::vector<double>& fractions, double t) {
    const Eigen::Vector3d w0(0.0, 0.0, s.larmor);
    const Eigen::Vector3d w1 = Eigen::Vector3d(0.0, 0.0, s.larmor) + alpha * s.avec;
    auto rot = [](const Eigen::Vector3d& w, double dt) {
        const double omega = w.norm();
        if (omega == 0.0 || dt == 0.0) return Su2::identity();
        const double half = 0.5 * omega * dt;
        Su2 q;
        q.w = std::cos(half);
        q.v = std::sin(half) / omega * w;
        return q;
    };
    auto evolve = [&](bool start_zero) {
        Su2 u = Su2::identity();
        double prev = 0.0;
        bool zero = start_zero;
        for (double f : fractions) {
            u = rot(zero ? w0 : w1, (f - prev) * t) * u;
            prev = f;
            zero = !zero;
        }
        return rot(zero ? w0 : w1, (1.0 - prev) * t) * u;
    };
    const Su2 ua = evolve(true);
    const Su2 ub = evolve(false);
    // Tr[ub^dag ua]/2 = w(ub^dag ua), real for SU(2)
    return ub.w * ua.w + ub.v.dot(ua.v);
}

}  // namespace detail

struct CoherenceCurve {
    std::vector<double> times;   // s
    std::vector<double> values;  // L(t)
    std::vector<char> flags;     // 1 where the CCE division guard triggered

    bool flagged() const {
        for (char f : flags)
            if (f) return true;
        return false;
    }
};

// L_C(t) over the grid for one cluster under the sequence (total time = grid
// value, pulses at the sequence's fractional offsets).
inline std::vector<double> cluster_coherence(const std::vector<ClusterSpin>& spins,
                                             const Cluster& cluster, const PulseSequence& seq,
                                             const ElectronModel& electron,
                                             const std::vector<double>& times) {
    const auto fractions = seq.pulse_fractions();
    std::vector<double> out(times.size(), 1.0);
    if (cluster.order() == 1) {
        const auto& s = spins[cluster.indices[0]];
        for (std::size_t i = 0; i < times.size(); ++i)
            out[i] = detail::singleton_trace(s, electron.branch, fractions, times[i]);
        return out;
    }
    const auto h0 = detail::diagonalize(detail::cluster_hamiltonian(spins, cluster.indices, 0));
    const auto h1 =
        detail::diagonalize(detail::cluster_hamiltonian(spins, cluster.indices, electron.branch));
    for (std::size_t i = 0; i < times.size(); ++i)
        out[i] = detail::conditional_trace(h0, h1, fractions, times[i]);
    return out;
}

struct CceOptions {
    int order = 2;
    double pair_cutoff_nm = 1.0;
    double eps_div = 1e-6;  // guard for the CCE correction division
    int workers = 1;
};

// Factorized coherence L(t) = prod_C Ltilde_C(t), with Ltilde recursively
// divided by all proper sub-cluster contributions. Wherever the denominator
// magnitude falls below eps_div the correction is set to 1 and flagged.
inline CoherenceCurve cce_coherence(const std::vector<ClusterSpin>& spins,
                                    const PulseSequence& seq, const ElectronModel& electron,
                                    const std::vector<double>& times, const CceOptions& options) {
    const auto clusters = build_clusters(spins, options.order, options.pair_cutoff_nm);

    std::vector<std::vector<double>> raw(clusters.size());
    parallel_for(clusters.size(), options.workers, [&](std::size_t c) {
        raw[c] = cluster_coherence(spins, clusters[c], seq, electron, times);
    });

    // map cluster index set -> position, for the sub-cluster lookups
    std::map<std::vector<int>, std::size_t> position;
    for (std::size_t c = 0; c < clusters.size(); ++c) position[clusters[c].indices] = c;

    CoherenceCurve curve;
    curve.times = times;
    curve.flags.assign(times.size(), 0);

    std::vector<std::vector<double>> corrections(clusters.size());
    // clusters are generated in non-decreasing order, so sub-clusters are done first
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        const auto& idx = clusters[c].indices;
        if (clusters[c].order() == 1) {
            corrections[c] = raw[c];
            continue;
        }
        std::vector<double> corr = raw[c];
        std::vector<char> bad(times.size(), 0);
        const int m = clusters[c].order();
        // divide by every proper non-empty sub-cluster correction
        for (int mask = 1; mask < (1 << m) - 1; ++mask) {
            std::vector<int> sub;
            for (int b = 0; b < m; ++b)
                if (mask & (1 << b)) sub.push_back(idx[b]);
            const auto it = position.find(sub);
            if (it == position.end()) continue;  // pair beyond cutoff: correction is 1
            const auto& d = corrections[it->second];
            for (std::size_t i = 0; i < corr.size(); ++i) {
                if (bad[i]) continue;
                if (std::abs(d[i]) < options.eps_div) {
                    bad[i] = 1;
                    continue;
                }
                corr[i] /= d[i];
            }
        }
        for (std::size_t i = 0; i < corr.size(); ++i)
            if (bad[i]) {
                corr[i] = 1.0;  // guarded correction drops out of the product
                curve.flags[i] = 1;
            }
        corrections[c] = std::move(corr);
    }

    curve.values = pairwise_reduce(
        std::move(corrections), std::vector<double>(times.size(), 1.0),
        [](std::vector<double> a, const std::vector<double>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
            return a;
        });
    return curve;
}

inline CoherenceCurve cce_coherence(const BathConfiguration& bath, const PulseSequence& seq,
                                    const ElectronModel& electron, const std::vector<double>& times,
                                    const CceOptions& options) {
    return cce_coherence(cluster_spins_from_bath(bath, electron), seq, electron, times, options);
}

// Paramagnetic pair bath: dark S = 1/2 electron spins; every pair within the
// cutoff evolves under its intra-pair dipolar coupling (flip-flop retained)
// plus the branch-conditional difference of zz couplings to the central spin.
// The shared dark-spin Zeeman commutes with both and cancels in the trace.
inline CoherenceCurve pair_bath_coherence(const std::vector<Eigen::Vector3d>& positions,
                                          const PulseSequence& seq, const ElectronModel& electron,
                                          const std::vector<double>& times,
                                          double pair_cutoff_nm = 1.0e9, int workers = 1) {
    std::vector<ClusterSpin> dark;
    dark.reserve(positions.size());
    for (const auto& p : positions) {
        const double d_zz =
            nuclear_pair_coupling(p, electron.gamma_e, electron.gamma_e, true).c_zz;
        dark.push_back({0.0, Eigen::Vector3d(0.0, 0.0, d_zz), p, electron.gamma_e, 2});
    }
    std::vector<Cluster> pairs;
    for (int i = 0; i < static_cast<int>(dark.size()); ++i)
        for (int j = i + 1; j < static_cast<int>(dark.size()); ++j)
            if ((dark[i].position - dark[j].position).norm() <= pair_cutoff_nm)
                pairs.push_back({{i, j}});

    std::vector<std::vector<double>> curves(pairs.size());
    parallel_for(pairs.size(), workers, [&](std::size_t c) {
        curves[c] = cluster_coherence(dark, pairs[c], seq, electron, times);
    });

    CoherenceCurve curve;
    curve.times = times;
    curve.flags.assign(times.size(), 0);
    curve.values = pairwise_reduce(
        std::move(curves), std::vector<double>(times.size(), 1.0),
        [](std::vector<double> a, const std::vector<double>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
            return a;
        });
    return curve;
}

// Pointwise product of the nuclear and electron-pair contributions.
inline CoherenceCurve total_coherence(const CoherenceCurve& nuclear,
                                      const CoherenceCurve& electron_pairs) {
    if (nuclear.times != electron_pairs.times)
        throw std::invalid_argument("total_coherence: time grid mismatch");
    CoherenceCurve out = nuclear;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] *= electron_pairs.values[i];
        out.flags[i] = out.flags[i] || electron_pairs.flags[i];
    }
    return out;
}

inline DecayFit fit_stretched(const CoherenceCurve& curve, double floor = 0.01) {
    std::vector<double> t, v;
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        if (curve.flags[i]) continue;  // guard-flagged points are excluded
        t.push_back(curve.times[i]);
        v.push_back(curve.values[i]);
    }
    return fit_stretched(t, v, floor);
}

// Ensemble statistics over seeded bath realizations: mean curve plus the
// median of the per-seed fitted T2 (robust against near-spin outliers).
struct EnsembleCoherence {
    CoherenceCurve mean;
    std::vector<DecayFit> fits;  // one per seed that admitted a fit
    double median_t2 = 0.0;
    int failed_fits = 0;
};

template <typename CurveFactory>
EnsembleCoherence ensemble_coherence(CurveFactory&& factory, int n_seeds, std::uint64_t base_seed,
                                     int workers = 1) {
    std::vector<CoherenceCurve> curves(n_seeds);
    parallel_for(static_cast<std::size_t>(n_seeds), workers, [&](std::size_t i) {
        curves[i] = factory(Rng::substream(base_seed, i));
    });

    EnsembleCoherence out;
    out.mean = curves.at(0);
    for (std::size_t i = 1; i < curves.size(); ++i)
        for (std::size_t j = 0; j < out.mean.values.size(); ++j)
            out.mean.values[j] += curves[i].values[j];
    for (auto& v : out.mean.values) v /= static_cast<double>(n_seeds);

    std::vector<double> t2s;
    for (const auto& c : curves) {
        try {
            const DecayFit f = fit_stretched(c);
            out.fits.push_back(f);
            t2s.push_back(f.t2);
        } catch (const std::invalid_argument&) {
            ++out.failed_fits;
        }
    }
    if (!t2s.empty()) {
        std::sort(t2s.begin(), t2s.end());
        const std::size_t n = t2s.size();
        out.median_t2 = n % 2 == 1 ? t2s[n / 2] : 0.5 * (t2s[n / 2 - 1] + t2s[n / 2]);
    }
    return out;
}

}  // namespace sicmem
