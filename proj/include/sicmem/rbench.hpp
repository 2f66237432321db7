#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sicmem/constants.hpp"
#include "sicmem/ddgate.hpp"  // Su2
#include "sicmem/rng.hpp"

// Single-qubit randomized benchmarking: the 24-element Clifford group with a
// composition table, recovery by group inversion, depolarizing-noise
// simulation on the Bloch sphere, and the exponential decay fit
// survival = A p^N + B with F_avg = 1 - (1 - p)/2.

namespace sicmem {

class CliffordGroup {
public:
    static const CliffordGroup& instance() {
        static const CliffordGroup group;
        return group;
    }

    int size() const { return static_cast<int>(elements_.size()); }
    int identity_index() const { return 0; }
    int compose(int later, int earlier) const { return compose_[later][earlier]; }
    int inverse(int i) const { return inverse_[i]; }
    const Eigen::Matrix3d& bloch(int i) const { return bloch_[i]; }
    const Su2& element(int i) const { return elements_[i]; }
    const std::vector<std::string>& pulse_word(int i) const { return words_[i]; }

    double average_pulses_per_clifford() const {
        double total = 0.0;
        for (const auto& w : words_) total += static_cast<double>(w.size());
        return total / size();
    }

private:
    CliffordGroup() {
        const std::array<std::pair<std::string, Su2>, 4> generators = {{
            {"X90", Su2::rotation({1, 0, 0}, 0.5 * pi)},
            {"Y90", Su2::rotation({0, 1, 0}, 0.5 * pi)},
            {"X180", Su2::rotation({1, 0, 0}, pi)},
            {"Y180", Su2::rotation({0, 1, 0}, pi)},
        }};
        elements_.push_back(Su2::identity());
        words_.push_back({});
        // breadth-first closure; words give a shortest pulse decomposition
        for (std::size_t head = 0; head < elements_.size(); ++head) {
            for (const auto& [label, g] : generators) {
                const Su2 candidate = g * elements_[head];
                if (find(candidate) >= 0) continue;
                elements_.push_back(candidate);
                auto word = words_[head];
                word.push_back(label);
                words_.push_back(std::move(word));
            }
        }
        if (elements_.size() != 24) throw std::logic_error("Clifford closure must have 24 elements");

        compose_.assign(24, std::vector<int>(24, -1));
        inverse_.assign(24, -1);
        for (int i = 0; i < 24; ++i) {
            for (int j = 0; j < 24; ++j) {
                const int k = find(elements_[i] * elements_[j]);
                if (k < 0) throw std::logic_error("Clifford group is not closed");
                compose_[i][j] = k;
            }
            Su2 inv = elements_[i];
            inv.v = -inv.v;  // conjugate quaternion
            inverse_[i] = find(inv);
        }
        for (int i = 0; i < 24; ++i) {
            const Su2& q = elements_[i];
            const double w = q.w, x = q.v.x(), y = q.v.y(), z = q.v.z();
            Eigen::Matrix3d r;
            r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
            bloch_[i] = r;
        }
    }

    int find(const Su2& q) const {
        for (std::size_t i = 0; i < elements_.size(); ++i) {
            const Su2& e = elements_[i];
            const double plus = std::abs(e.w - q.w) + (e.v - q.v).cwiseAbs().sum();
            const double minus = std::abs(e.w + q.w) + (e.v + q.v).cwiseAbs().sum();
            if (std::min(plus, minus) < 1e-9) return static_cast<int>(i);
        }
        return -1;
    }

    std::vector<Su2> elements_;
    std::vector<std::vector<std::string>> words_;
    std::vector<std::vector<int>> compose_;
    std::vector<int> inverse_;
    std::array<Eigen::Matrix3d, 24> bloch_;
};

struct CliffordSequence {
    std::vector<int> gates;  // applied in order
    int recovery = 0;
    int length() const { return static_cast<int>(gates.size()); }
};

inline CliffordSequence make_sequence(const std::vector<int>& gates) {
    const auto& g = CliffordGroup::instance();
    int net = g.identity_index();
    for (int gate : gates) net = g.compose(gate, net);
    return {gates, g.inverse(net)};
}

// Uniform random Clifford sequences per length, recovery by group inversion.
inline std::vector<std::vector<CliffordSequence>> sample_sequences(
    const std::vector<int>& lengths, int per_length, std::uint64_t seed) {
    for (int n : lengths)
        if (n < 1) throw std::invalid_argument("sample_sequences: lengths must be >= 1");
    const auto& g = CliffordGroup::instance();
    std::vector<std::vector<CliffordSequence>> out(lengths.size());
    for (std::size_t li = 0; li < lengths.size(); ++li) {
        Rng rng(Rng::substream(seed, li));
        for (int s = 0; s < per_length; ++s) {
            std::vector<int> gates(lengths[li]);
            for (int& gate : gates)
                gate = std::min(g.size() - 1, static_cast<int>(rng.uniform() * g.size()));
            out[li].push_back(make_sequence(gates));
        }
    }
    return out;
}

// Ideal Clifford followed by a depolarizing channel, recovery included;
// survival is the probability of finding the initial state back.
inline double simulate_sequence(const CliffordSequence& seq, double p_depol) {
    const auto& g = CliffordGroup::instance();
    Eigen::Vector3d v(0.0, 0.0, 1.0);
    for (int gate : seq.gates) v = ((1.0 - p_depol) * (g.bloch(gate) * v)).eval();
    v = ((1.0 - p_depol) * (g.bloch(seq.recovery) * v)).eval();
    return 0.5 * (1.0 + v.z());
}

// Per-length, per-sequence survivals; shots = 0 returns exact probabilities.
inline std::vector<std::vector<double>> simulate_rb(
    const std::vector<std::vector<CliffordSequence>>& sequences, double p_depol, long shots,
    std::uint64_t seed) {
    if (p_depol < 0.0 || p_depol > 1.0)
        throw std::invalid_argument("simulate_rb: depolarizing probability outside [0, 1]");
    std::vector<std::vector<double>> out(sequences.size());
    for (std::size_t li = 0; li < sequences.size(); ++li) {
        Rng rng(Rng::substream(seed ^ 0x5b5b5b5b, li));
        for (const auto& seq : sequences[li]) {
            const double p = simulate_sequence(seq, p_depol);
            if (shots <= 0) {
                out[li].push_back(p);
            } else {
                long hits = 0;
                for (long s = 0; s < shots; ++s) hits += rng.bernoulli(p) ? 1 : 0;
                out[li].push_back(static_cast<double>(hits) / shots);
            }
        }
    }
    return out;
}

struct RBResult {
    std::vector<int> lengths;
    std::vector<double> mean_survival;
    std::vector<double> sem;
    double amplitude = 0.0;  // A
    double decay = 1.0;      // p
    double offset = 0.5;     // B
    double f_avg = 1.0;      // 1 - (1 - p)/2
    double ci_lo = 1.0;      // bootstrap CI on f_avg
    double ci_hi = 1.0;
    bool non_decaying = false;
};

namespace rb_detail {

struct FitABp {
    double a, p, b;
};

inline FitABp fit_exponential(const std::vector<int>& lengths, const std::vector<double>& means) {
    double b = 0.5;
    double a = means.front() - b;
    double p = 0.999;
    if (std::abs(a) > 1e-12 && std::abs(means.back() - b) > 1e-15) {
        const double ratio = (means.back() - b) / a;
        if (ratio > 0.0 && ratio < 1.0)
            p = std::pow(ratio, 1.0 / std::max(1, lengths.back() - lengths.front()));
    }
    auto sse = [&](double a_, double p_, double b_) {
        double s = 0.0;
        for (std::size_t i = 0; i < lengths.size(); ++i) {
            const double r = a_ * std::pow(p_, lengths[i]) + b_ - means[i];
            s += r * r;
        }
        return s;
    };
    double best = sse(a, p, b);
    for (int iter = 0; iter < 300; ++iter) {
        Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
        Eigen::Vector3d grad = Eigen::Vector3d::Zero();
        for (std::size_t i = 0; i < lengths.size(); ++i) {
            const double n = lengths[i];
            const double pn = std::pow(p, n);
            const double r = a * pn + b - means[i];
            const Eigen::Vector3d d(pn, a * n * (p > 0 ? pn / p : 0.0), 1.0);
            grad += r * d;
            h += d * d.transpose();
        }
        h += 1e-12 * Eigen::Matrix3d::Identity();
        Eigen::Vector3d step = -h.ldlt().solve(grad);
        bool improved = false;
        for (int halve = 0; halve < 25; ++halve) {
            const double na = a + step[0];
            const double np = std::clamp(p + step[1], 0.0, 1.0);
            const double nb = b + step[2];
            const double val = sse(na, np, nb);
            if (val < best - 1e-18) {
                a = na;
                p = np;
                b = nb;
                best = val;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;
    }
    return {a, p, b};
}

}  // namespace rb_detail

struct RbFitOptions {
    int bootstrap = 200;
    std::uint64_t seed = 17;
};

inline RBResult fit_rb(const std::vector<int>& lengths,
                       const std::vector<std::vector<double>>& survivals,
                       const RbFitOptions& options = {}) {
    if (lengths.size() < 3) throw std::invalid_argument("fit_rb: need at least 3 lengths");
    if (survivals.size() != lengths.size())
        throw std::invalid_argument("fit_rb: survivals/lengths mismatch");

    RBResult res;
    res.lengths = lengths;
    for (const auto& col : survivals) {
        double mean = 0.0;
        for (double s : col) mean += s;
        mean /= static_cast<double>(col.size());
        double var = 0.0;
        for (double s : col) var += (s - mean) * (s - mean);
        const double denom = col.size() > 1 ? (col.size() - 1.0) * col.size() : 1.0;
        res.mean_survival.push_back(mean);
        res.sem.push_back(std::sqrt(var / denom));
    }

    const double spread = *std::max_element(res.mean_survival.begin(), res.mean_survival.end()) -
                          *std::min_element(res.mean_survival.begin(), res.mean_survival.end());
    if (spread < 1e-9) {
        res.non_decaying = true;
        res.decay = 1.0;
        res.offset = 0.5;
        res.amplitude = res.mean_survival.front() - 0.5;
        res.f_avg = 1.0;
        res.ci_lo = res.ci_hi = 1.0;
        return res;
    }

    const auto fit = rb_detail::fit_exponential(lengths, res.mean_survival);
    res.amplitude = fit.a;
    res.decay = fit.p;
    res.offset = fit.b;
    res.f_avg = 1.0 - 0.5 * (1.0 - fit.p);

    // bootstrap over sequences within each length
    std::vector<double> f_samples;
    Rng rng(options.seed);
    for (int bs = 0; bs < options.bootstrap; ++bs) {
        std::vector<double> means(lengths.size());
        for (std::size_t li = 0; li < lengths.size(); ++li) {
            const auto& col = survivals[li];
            double m = 0.0;
            for (std::size_t k = 0; k < col.size(); ++k)
                m += col[std::min(col.size() - 1,
                                  static_cast<std::size_t>(rng.uniform() * col.size()))];
            means[li] = m / static_cast<double>(col.size());
        }
        const auto bfit = rb_detail::fit_exponential(lengths, means);
        f_samples.push_back(1.0 - 0.5 * (1.0 - bfit.p));
    }
    std::sort(f_samples.begin(), f_samples.end());
    res.ci_lo = f_samples[static_cast<std::size_t>(0.025 * (f_samples.size() - 1))];
    res.ci_hi = f_samples[static_cast<std::size_t>(0.975 * (f_samples.size() - 1))];
    return res;
}

}  // namespace sicmem
