#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sicmem/cce.hpp"
#include "sicmem/hyperfine.hpp"
#include "sicmem/lattice.hpp"
#include "sicmem/memcensus.hpp"
#include "sicmem/registersim.hpp"

// Run configuration: a single versioned JSON document, schema-validated with
// field-level diagnostics before any computation. All frequencies enter as
// linear frequency (kHz/MHz), fields in gauss, times in us/ms; conversion to
// angular units happens here and only here.

namespace sicmem {

inline constexpr int config_schema_version = 1;
inline constexpr const char* code_version = "sicmem 1.0";

struct Diagnostic {
    std::string field;
    std::string message;
};

struct SpectrumConfig {
    int n_pulses = 32;
    double tau_lo = 2.0e-6;
    double tau_hi = 9.0e-6;
    int points = 600;
    int ensemble = 20;
    bool export_schedule = false;
};

struct CoherenceConfig {
    SequenceKind sequence = SequenceKind::Hahn;
    std::vector<int> pulse_counts = {1};
    double t_lo = 1.0e-6;
    double t_hi = 10.0e-3;
    int points = 120;
    int ensemble = 50;
    int order = 2;
};

struct BathParams {
    double radius_nm = 6.0;
    double pair_cutoff_nm = 1.0;
    bool exclude_contact_shells = true;
    double eps_div = 1e-6;
};

struct ParamagneticConfig {
    double density_cm3 = 0.0;
    double radius_nm = 100.0;
    double pair_cutoff_nm = 0.0;  // 0 = all pairs in the sphere
};

struct CensusConfig {
    MemoryCriteria criteria;
    double radius_nm = 6.0;
    double low_apar_cutoff = rad_from_hz(60e3);
    int scan_points = 201;
    bool prune = true;
    bool export_records = false;
};

struct RegisterConfig {
    int cool_iterations = 2;
    NoiseModel cool_noise{0.14, 1.0, 0.0};
    NoiseModel bell_noise{0.1042213054, 1.0, 0.0};
    long qst_shots = 0;
    double odmr_a_par = rad_from_hz(13.2e6);
    double odmr_linewidth = rad_from_hz(1.0e6);
};

struct RbConfig {
    std::vector<int> lengths = {1, 10, 30, 100, 300, 1000, 3000};
    int per_length = 30;
    long shots = 500;
    double p_depol = 3.2e-4;
    int bootstrap = 200;
};

struct RunConfig {
    std::string experiment;
    std::uint64_t seed = 1;
    int workers = 0;  // 0 = hardware concurrency
    std::string output_dir = "out";

    CrystalModel crystal = make_4h_sic();
    IsotopeModel isotopes{0.0015, 0.0002};
    ElectronModel electron;
    HyperfineOverrides overrides = HyperfineOverrides::defaults();
    BathParams bath;
    ParamagneticConfig paramagnetic;

    SpectrumConfig spectrum;
    CoherenceConfig coherence;
    CensusConfig census;
    std::vector<double> sweep_concentrations = {1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 4.7e-2};
    RegisterConfig reg;
    RbConfig rb;

    nlohmann::json raw;  // config snapshot for the manifest
};

namespace config_detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::set<std::string>& allowed,
                           const std::string& prefix, std::vector<Diagnostic>& diags) {
    if (!j.is_object()) return;
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) diags.push_back({prefix + key, "unknown key"});
}

template <typename T>
bool read(const json& j, const char* key, T& out, const std::string& prefix,
          std::vector<Diagnostic>& diags) {
    if (!j.contains(key)) return false;
    try {
        out = j.at(key).get<T>();
        return true;
    } catch (const json::exception&) {
        diags.push_back({prefix + key, "wrong type"});
        return false;
    }
}

inline void check(bool ok, const std::string& field, const std::string& message,
                  std::vector<Diagnostic>& diags) {
    if (!ok) diags.push_back({field, message});
}

}  // namespace config_detail

// Parse and validate; diagnostics out. On any diagnostic the returned config
// must not be executed.
inline RunConfig parse_config(const nlohmann::json& j, std::vector<Diagnostic>& diags) {
    using config_detail::check;
    using config_detail::read;
    using config_detail::reject_unknown;

    RunConfig cfg;
    cfg.raw = j;
    reject_unknown(j,
                   {"version", "experiment", "seed", "workers", "output_dir", "crystal",
                    "isotopes", "electron", "overrides", "bath", "paramagnetic", "spectrum",
                    "coherence", "census", "sweep", "register", "rb"},
                   "", diags);

    int version = config_schema_version;
    read(j, "version", version, "", diags);
    check(version == config_schema_version, "version", "unsupported schema version", diags);

    if (!read(j, "experiment", cfg.experiment, "", diags))
        diags.push_back({"experiment", "required"});
    const std::set<std::string> kinds = {"spectrum", "coherence", "census",
                                         "sweep", "register", "rb"};
    check(kinds.count(cfg.experiment) > 0, "experiment",
          "must be one of spectrum|coherence|census|sweep|register|rb", diags);

    read(j, "seed", cfg.seed, "", diags);
    read(j, "workers", cfg.workers, "", diags);
    check(cfg.workers >= 0, "workers", "must be >= 0", diags);
    read(j, "output_dir", cfg.output_dir, "", diags);
    check(!cfg.output_dir.empty(), "output_dir", "must not be empty", diags);

    if (j.contains("crystal")) {
        const auto& c = j.at("crystal");
        reject_unknown(c, {"a_nm", "c_nm", "max_radius_nm"}, "crystal.", diags);
        double a = 0.3079, cc = 1.0082, maxr = 20.0;
        read(c, "a_nm", a, "crystal.", diags);
        read(c, "c_nm", cc, "crystal.", diags);
        read(c, "max_radius_nm", maxr, "crystal.", diags);
        check(a > 0 && cc > 0 && maxr > 0, "crystal", "lattice parameters must be positive", diags);
        if (diags.empty()) cfg.crystal = make_4h_sic(a, cc, maxr);
    }

    if (j.contains("isotopes")) {
        const auto& c = j.at("isotopes");
        reject_unknown(c, {"c_si29", "c_c13"}, "isotopes.", diags);
        read(c, "c_si29", cfg.isotopes.c_si29, "isotopes.", diags);
        read(c, "c_c13", cfg.isotopes.c_c13, "isotopes.", diags);
        check(cfg.isotopes.c_si29 >= 0.0 && cfg.isotopes.c_si29 <= 1.0, "isotopes.c_si29",
              "must be in [0, 1]", diags);
        check(cfg.isotopes.c_c13 >= 0.0 && cfg.isotopes.c_c13 <= 1.0, "isotopes.c_c13",
              "must be in [0, 1]", diags);
    }

    if (j.contains("electron")) {
        const auto& c = j.at("electron");
        reject_unknown(c, {"b_gauss", "branch", "gamma_e_mhz_per_t", "zfs_mhz"}, "electron.",
                       diags);
        double b_gauss = 0.0, gamma_mhz = 28025.0, zfs_mhz = 0.0;
        read(c, "b_gauss", b_gauss, "electron.", diags);
        read(c, "branch", cfg.electron.branch, "electron.", diags);
        read(c, "gamma_e_mhz_per_t", gamma_mhz, "electron.", diags);
        read(c, "zfs_mhz", zfs_mhz, "electron.", diags);
        check(b_gauss >= 0.0, "electron.b_gauss", "must be >= 0", diags);
        check(cfg.electron.branch == 1 || cfg.electron.branch == -1, "electron.branch",
              "must be +1 or -1", diags);
        cfg.electron.b_field = b_gauss * gauss_to_tesla;
        cfg.electron.gamma_e = rad_from_hz(gamma_mhz * 1e6);
        cfg.electron.zfs = rad_from_hz(zfs_mhz * 1e6);
    }

    if (j.contains("overrides")) {
        const auto& arr = j.at("overrides");
        if (!arr.is_array()) {
            diags.push_back({"overrides", "must be an array"});
        } else {
            cfg.overrides.table.clear();
            int idx = 0;
            for (const auto& item : arr) {
                const std::string prefix = "overrides[" + std::to_string(idx++) + "].";
                reject_unknown(item, {"shell", "a_par_khz", "a_perp_khz"}, prefix, diags);
                std::string shell;
                double apar_khz = 0.0, aperp_khz = 0.0;
                read(item, "shell", shell, prefix, diags);
                read(item, "a_par_khz", apar_khz, prefix, diags);
                read(item, "a_perp_khz", aperp_khz, prefix, diags);
                NnShell which = NnShell::None;
                if (shell == "Si_I") which = NnShell::SiI;
                else if (shell == "Si_IIa") which = NnShell::SiIIa;
                else if (shell == "Si_IIb") which = NnShell::SiIIb;
                else if (shell == "C_I") which = NnShell::CI;
                else diags.push_back({prefix + "shell", "unknown shell label"});
                if (which != NnShell::None)
                    cfg.overrides.table[which] = {rad_from_hz(apar_khz * 1e3),
                                                  rad_from_hz(aperp_khz * 1e3)};
            }
        }
    }

    if (j.contains("bath")) {
        const auto& c = j.at("bath");
        reject_unknown(c, {"radius_nm", "pair_cutoff_nm", "exclude_contact_shells", "eps_div"},
                       "bath.", diags);
        read(c, "radius_nm", cfg.bath.radius_nm, "bath.", diags);
        read(c, "pair_cutoff_nm", cfg.bath.pair_cutoff_nm, "bath.", diags);
        read(c, "exclude_contact_shells", cfg.bath.exclude_contact_shells, "bath.", diags);
        read(c, "eps_div", cfg.bath.eps_div, "bath.", diags);
        check(cfg.bath.radius_nm > 0, "bath.radius_nm", "must be positive", diags);
        check(cfg.bath.pair_cutoff_nm >= 0, "bath.pair_cutoff_nm", "must be >= 0", diags);
    }

    if (j.contains("paramagnetic")) {
        const auto& c = j.at("paramagnetic");
        reject_unknown(c, {"density_cm3", "radius_nm", "pair_cutoff_nm"}, "paramagnetic.", diags);
        read(c, "density_cm3", cfg.paramagnetic.density_cm3, "paramagnetic.", diags);
        read(c, "radius_nm", cfg.paramagnetic.radius_nm, "paramagnetic.", diags);
        read(c, "pair_cutoff_nm", cfg.paramagnetic.pair_cutoff_nm, "paramagnetic.", diags);
        check(cfg.paramagnetic.density_cm3 >= 0.0, "paramagnetic.density_cm3", "must be >= 0",
              diags);
        check(cfg.paramagnetic.radius_nm > 0.0, "paramagnetic.radius_nm", "must be positive",
              diags);
    }

    if (j.contains("spectrum")) {
        const auto& c = j.at("spectrum");
        reject_unknown(
            c, {"n_pulses", "tau_lo_us", "tau_hi_us", "points", "ensemble", "export_schedule"},
            "spectrum.", diags);
        double lo_us = cfg.spectrum.tau_lo * 1e6, hi_us = cfg.spectrum.tau_hi * 1e6;
        read(c, "n_pulses", cfg.spectrum.n_pulses, "spectrum.", diags);
        read(c, "tau_lo_us", lo_us, "spectrum.", diags);
        read(c, "tau_hi_us", hi_us, "spectrum.", diags);
        read(c, "points", cfg.spectrum.points, "spectrum.", diags);
        read(c, "ensemble", cfg.spectrum.ensemble, "spectrum.", diags);
        read(c, "export_schedule", cfg.spectrum.export_schedule, "spectrum.", diags);
        cfg.spectrum.tau_lo = lo_us * 1e-6;
        cfg.spectrum.tau_hi = hi_us * 1e-6;
        check(cfg.spectrum.n_pulses > 0 && cfg.spectrum.n_pulses % 2 == 0, "spectrum.n_pulses",
              "must be even and positive", diags);
        check(cfg.spectrum.tau_lo > 0 && cfg.spectrum.tau_hi > cfg.spectrum.tau_lo,
              "spectrum.tau_lo_us", "need 0 < tau_lo < tau_hi", diags);
        check(cfg.spectrum.points >= 2, "spectrum.points", "must be >= 2", diags);
        check(cfg.spectrum.ensemble >= 1, "spectrum.ensemble", "must be >= 1", diags);
    }

    if (j.contains("coherence")) {
        const auto& c = j.at("coherence");
        reject_unknown(c,
                       {"sequence", "n_pulses", "t_lo_us", "t_hi_us", "points", "ensemble",
                        "order"},
                       "coherence.", diags);
        std::string seq = "hahn";
        read(c, "sequence", seq, "coherence.", diags);
        if (seq == "ramsey") cfg.coherence.sequence = SequenceKind::Ramsey;
        else if (seq == "hahn") cfg.coherence.sequence = SequenceKind::Hahn;
        else if (seq == "cpmg") cfg.coherence.sequence = SequenceKind::Cpmg;
        else diags.push_back({"coherence.sequence", "must be ramsey|hahn|cpmg"});
        read(c, "n_pulses", cfg.coherence.pulse_counts, "coherence.", diags);
        double lo_us = cfg.coherence.t_lo * 1e6, hi_us = cfg.coherence.t_hi * 1e6;
        read(c, "t_lo_us", lo_us, "coherence.", diags);
        read(c, "t_hi_us", hi_us, "coherence.", diags);
        cfg.coherence.t_lo = lo_us * 1e-6;
        cfg.coherence.t_hi = hi_us * 1e-6;
        read(c, "points", cfg.coherence.points, "coherence.", diags);
        read(c, "ensemble", cfg.coherence.ensemble, "coherence.", diags);
        read(c, "order", cfg.coherence.order, "coherence.", diags);
        check(cfg.coherence.t_lo >= 0 && cfg.coherence.t_hi > cfg.coherence.t_lo,
              "coherence.t_lo_us", "need 0 <= t_lo < t_hi", diags);
        check(cfg.coherence.points >= 4, "coherence.points", "must be >= 4", diags);
        check(cfg.coherence.ensemble >= 1, "coherence.ensemble", "must be >= 1", diags);
        check(cfg.coherence.order >= 1 && cfg.coherence.order <= cce_max_order, "coherence.order",
              "must be in [1, 4]", diags);
        for (int n : cfg.coherence.pulse_counts) {
            const bool ok = cfg.coherence.sequence == SequenceKind::Ramsey ? n == 0
                            : cfg.coherence.sequence == SequenceKind::Hahn
                                ? n == 1
                                : (n >= 2 && n % 2 == 0);
            check(ok, "coherence.n_pulses", "pulse count inconsistent with the sequence kind",
                  diags);
        }
    }

    if (j.contains("census")) {
        const auto& c = j.at("census");
        reject_unknown(c,
                       {"f_min", "t_max_ms", "theta_target_rad", "k_max", "radius_nm",
                        "low_apar_cutoff_khz", "scan_points", "prune", "fidelity_model",
                        "window_lo_khz", "window_hi_khz", "export_records"},
                       "census.", diags);
        auto& crit = cfg.census.criteria;
        read(c, "f_min", crit.f_min, "census.", diags);
        double tmax_ms = crit.t_max * 1e3;
        read(c, "t_max_ms", tmax_ms, "census.", diags);
        crit.t_max = tmax_ms * 1e-3;
        read(c, "theta_target_rad", crit.theta_target, "census.", diags);
        read(c, "k_max", crit.k_max, "census.", diags);
        read(c, "radius_nm", cfg.census.radius_nm, "census.", diags);
        double cutoff_khz = hz_from_rad(cfg.census.low_apar_cutoff) / 1e3;
        read(c, "low_apar_cutoff_khz", cutoff_khz, "census.", diags);
        cfg.census.low_apar_cutoff = rad_from_hz(cutoff_khz * 1e3);
        read(c, "scan_points", cfg.census.scan_points, "census.", diags);
        read(c, "prune", cfg.census.prune, "census.", diags);
        read(c, "export_records", cfg.census.export_records, "census.", diags);
        std::string model = "crosstalk_times_gate";
        read(c, "fidelity_model", model, "census.", diags);
        if (model == "crosstalk_times_gate") crit.model = FidelityModel::CrosstalkTimesGate;
        else if (model == "pi_magnetization") crit.model = FidelityModel::PiMagnetization;
        else diags.push_back({"census.fidelity_model", "unknown fidelity model"});
        double w = 0.0;
        if (read(c, "window_lo_khz", w, "census.", diags)) crit.window_lo = rad_from_hz(w * 1e3);
        if (read(c, "window_hi_khz", w, "census.", diags)) crit.window_hi = rad_from_hz(w * 1e3);
        check(crit.f_min >= 0.0 && crit.f_min <= 1.0, "census.f_min", "must be in [0, 1]", diags);
        check(crit.t_max > 0.0, "census.t_max_ms", "must be positive", diags);
        check(crit.theta_target > 0.0 && crit.theta_target <= pi, "census.theta_target_rad",
              "must be in (0, pi]", diags);
        check(crit.k_max >= 0, "census.k_max", "must be >= 0", diags);
        check(cfg.census.radius_nm > 0.0, "census.radius_nm", "must be positive", diags);
        check(cfg.census.scan_points >= 11, "census.scan_points", "must be >= 11", diags);
    }

    if (j.contains("sweep")) {
        const auto& c = j.at("sweep");
        reject_unknown(c, {"concentrations"}, "sweep.", diags);
        read(c, "concentrations", cfg.sweep_concentrations, "sweep.", diags);
        check(!cfg.sweep_concentrations.empty(), "sweep.concentrations", "must not be empty",
              diags);
        for (std::size_t i = 0; i < cfg.sweep_concentrations.size(); ++i) {
            check(cfg.sweep_concentrations[i] >= 0.0 && cfg.sweep_concentrations[i] <= 1.0,
                  "sweep.concentrations", "entries must be in [0, 1]", diags);
            if (i > 0)
                check(cfg.sweep_concentrations[i] > cfg.sweep_concentrations[i - 1],
                      "sweep.concentrations", "must be strictly increasing", diags);
        }
    }

    if (j.contains("register")) {
        const auto& c = j.at("register");
        reject_unknown(c,
                       {"cool_iterations", "cool_p_gate", "bell_p_gate", "reinit_fidelity",
                        "readout_error", "qst_shots", "odmr_apar_mhz", "odmr_linewidth_mhz"},
                       "register.", diags);
        read(c, "cool_iterations", cfg.reg.cool_iterations, "register.", diags);
        read(c, "cool_p_gate", cfg.reg.cool_noise.p_gate, "register.", diags);
        read(c, "bell_p_gate", cfg.reg.bell_noise.p_gate, "register.", diags);
        read(c, "reinit_fidelity", cfg.reg.cool_noise.reinit_fidelity, "register.", diags);
        read(c, "readout_error", cfg.reg.cool_noise.readout_error, "register.", diags);
        cfg.reg.bell_noise.reinit_fidelity = cfg.reg.cool_noise.reinit_fidelity;
        cfg.reg.bell_noise.readout_error = cfg.reg.cool_noise.readout_error;
        read(c, "qst_shots", cfg.reg.qst_shots, "register.", diags);
        double apar_mhz = hz_from_rad(cfg.reg.odmr_a_par) / 1e6;
        double lw_mhz = hz_from_rad(cfg.reg.odmr_linewidth) / 1e6;
        read(c, "odmr_apar_mhz", apar_mhz, "register.", diags);
        read(c, "odmr_linewidth_mhz", lw_mhz, "register.", diags);
        cfg.reg.odmr_a_par = rad_from_hz(apar_mhz * 1e6);
        cfg.reg.odmr_linewidth = rad_from_hz(lw_mhz * 1e6);
        check(cfg.reg.cool_iterations >= 1, "register.cool_iterations", "must be >= 1", diags);
        for (double p : {cfg.reg.cool_noise.p_gate, cfg.reg.bell_noise.p_gate,
                         cfg.reg.cool_noise.reinit_fidelity, cfg.reg.cool_noise.readout_error})
            check(p >= 0.0 && p <= 1.0, "register", "probabilities must be in [0, 1]", diags);
        check(cfg.reg.qst_shots >= 0, "register.qst_shots", "must be >= 0", diags);
        check(cfg.reg.odmr_linewidth > 0.0, "register.odmr_linewidth_mhz", "must be positive",
              diags);
    }

    if (j.contains("rb")) {
        const auto& c = j.at("rb");
        reject_unknown(c, {"lengths", "per_length", "shots", "p_depol", "bootstrap"}, "rb.",
                       diags);
        read(c, "lengths", cfg.rb.lengths, "rb.", diags);
        read(c, "per_length", cfg.rb.per_length, "rb.", diags);
        read(c, "shots", cfg.rb.shots, "rb.", diags);
        read(c, "p_depol", cfg.rb.p_depol, "rb.", diags);
        read(c, "bootstrap", cfg.rb.bootstrap, "rb.", diags);
        check(cfg.rb.lengths.size() >= 3, "rb.lengths", "need at least 3 lengths", diags);
        for (int n : cfg.rb.lengths) check(n >= 1, "rb.lengths", "entries must be >= 1", diags);
        check(cfg.rb.per_length >= 2, "rb.per_length", "must be >= 2", diags);
        check(cfg.rb.shots >= 0, "rb.shots", "must be >= 0", diags);
        check(cfg.rb.p_depol >= 0.0 && cfg.rb.p_depol <= 1.0, "rb.p_depol", "must be in [0, 1]",
              diags);
        check(cfg.rb.bootstrap >= 10, "rb.bootstrap", "must be >= 10", diags);
    }

    return cfg;
}

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

// `--set a.b.c=value` override; values parse as JSON when possible, falling
// back to a plain string.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw std::runtime_error("override must look like key.path=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
        parsed = value;
    }
    nlohmann::json* node = &j;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw std::runtime_error("empty override path");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = parsed;
}

}  // namespace sicmem
