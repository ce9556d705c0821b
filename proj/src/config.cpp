#include "bbopm/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace bbopm {

EnsembleConfig RunConfig::ensemble() const {
    return EnsembleConfig{atom_count, spin_f, gamma, gamma_rel};
}

FieldProgram RunConfig::field() const {
    FieldProgram f;
    f.b0 = b0;
    f.tone_amplitude = tone_amplitude;
    f.tone_frequency = tone_frequency;
    f.tone_phase = tone_phase;
    return f;
}

PumpProgram RunConfig::pump() const {
    return PumpProgram{pump_peak_rate, pump_duty, omega_mod(), pump_phase};
}

ProbeConfig RunConfig::probe() const {
    return ProbeConfig{s1_flux, coupling_g, shot_psd, squeezing_db, transmission};
}

SimPlan RunConfig::plan() const {
    SimPlan p;
    p.sample_rate = sample_rate;
    p.dt = 1.0 / (sample_rate * substeps);
    p.record_seconds = record_seconds;
    p.n_records = n_records;
    p.seed = seed;
    return p;
}

double RunConfig::delta_omega() const {
    return gamma_rel + pump_peak_rate * pump_duty;
}

void RunConfig::validate() const {
    ensemble().validate();
    field().validate();
    pump().validate();
    probe().validate();
    plan().validate(f_mod);
    require(analysis_fmax > analysis_fmin && analysis_fmin > 0.0,
            "config: need 0 < analysis_fmin < analysis_fmax");
    require(sample_rate / decim >= 4.0 * analysis_fmax,
            "config: decimated rate must be >= 4x the analysis band");
}

RunConfig default_config(const std::string& profile) {
    RunConfig c;
    c.profile = profile;

    // shared physics targets
    const double knee_hz = 170.0;
    const double bw3db_sql_hz = 275.0;
    const double dw = hz_to_rad(knee_hz);
    const double zeta2 = std::pow(bw3db_sql_hz / knee_hz, 2.0) - 1.0;

    // 90/10 relaxation/pumping split: keeps the pulsed damping weak against
    // the modulation frequency, so the demodulated noise stays close to the
    // single-Lorentzian model even on the desk profile
    c.gamma_rel = 0.9 * dw;
    c.pump_duty = 0.1;
    c.pump_peak_rate = (dw - c.gamma_rel) / c.pump_duty;

    // coupling chosen so the demodulated spin-to-shot PSD ratio is zeta2:
    // s_sigma = 4 (G S1)^2 V0 / dw equal to zeta2 * (2 shot_psd)
    const double v0 = c.atom_count * c.spin_f * (c.spin_f + 1.0) / 3.0;
    c.coupling_g = std::sqrt(zeta2 * c.shot_psd * dw / (2.0 * v0)) / c.s1_flux;

    if (profile == "desk") {
        c.f_mod = 2000.0;
        c.sample_rate = 32768.0;
        c.decim = 8;
        c.lp_cutoff = 950.0;
        c.analysis_fmax = 850.0;  // 5x knee
    } else if (profile == "paper") {
        c.f_mod = 30164.0;
        c.sample_rate = 262144.0;
        c.decim = 16;
        c.lp_cutoff = 2600.0;
        c.analysis_fmax = 2400.0;
    } else {
        throw std::invalid_argument("unknown profile '" + profile + "' (desk|paper)");
    }

    c.b0 = hz_to_rad(c.f_mod) / std::fabs(c.gamma);  // on resonance
    c.substeps = static_cast<int>(std::ceil(200.0 * c.f_mod / c.sample_rate));
    return c;
}

namespace {

struct Field {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& s) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number for " + key + ": '" + s + "'");
    }
    if (pos != s.size())
        throw std::invalid_argument("config: trailing junk for " + key + ": '" + s + "'");
    return v;
}

#define DOUBLE_FIELD(name)                                                        \
    Field{#name,                                                                  \
          [](RunConfig& c, const std::string& s) { c.name = parse_double(#name, s); }, \
          [](const RunConfig& c) { return fmt_double(c.name); }}
#define INT_FIELD(name)                                                              \
    Field{#name,                                                                     \
          [](RunConfig& c, const std::string& s) {                                   \
              c.name = static_cast<int>(std::llround(parse_double(#name, s)));       \
          },                                                                         \
          [](const RunConfig& c) { return std::to_string(c.name); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        Field{"profile", [](RunConfig& c, const std::string& s) { c.profile = s; },
              [](const RunConfig& c) { return c.profile; }},
        DOUBLE_FIELD(atom_count),
        DOUBLE_FIELD(spin_f),
        DOUBLE_FIELD(gamma),
        DOUBLE_FIELD(gamma_rel),
        DOUBLE_FIELD(b0),
        DOUBLE_FIELD(tone_amplitude),
        DOUBLE_FIELD(tone_frequency),
        DOUBLE_FIELD(tone_phase),
        DOUBLE_FIELD(f_mod),
        DOUBLE_FIELD(pump_peak_rate),
        DOUBLE_FIELD(pump_duty),
        DOUBLE_FIELD(pump_phase),
        DOUBLE_FIELD(s1_flux),
        DOUBLE_FIELD(coupling_g),
        DOUBLE_FIELD(shot_psd),
        DOUBLE_FIELD(squeezing_db),
        DOUBLE_FIELD(transmission),
        DOUBLE_FIELD(sample_rate),
        INT_FIELD(substeps),
        DOUBLE_FIELD(record_seconds),
        INT_FIELD(n_records),
        Field{"seed",
              [](RunConfig& c, const std::string& s) { c.seed = std::stoull(s); },
              [](const RunConfig& c) { return std::to_string(c.seed); }},
        DOUBLE_FIELD(lp_cutoff),
        INT_FIELD(decim),
        DOUBLE_FIELD(analysis_fmin),
        DOUBLE_FIELD(analysis_fmax),
        DOUBLE_FIELD(probe_freq),
        DOUBLE_FIELD(scan_halfwidth_rel),
        INT_FIELD(scan_points),
        INT_FIELD(sweep_points),
        INT_FIELD(sweep_records),
        DOUBLE_FIELD(sweep_tone),
    };
    return f;
}

#undef DOUBLE_FIELD
#undef INT_FIELD

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_overrides(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        bool found = false;
        for (const auto& f : fields()) {
            if (key == f.key) {
                f.set(cfg, value);
                found = true;
                break;
            }
        }
        if (!found) throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 'key = value'");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    apply_overrides(base, kv);
    return base;
}

void write_config_file(const RunConfig& cfg, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "# run configuration (SI units: rates 1/s, fields T, frequencies Hz)\n";
    for (const auto& f : fields()) os << f.key << " = " << f.get(cfg) << "\n";
}

std::map<std::string, std::string> config_to_map(const RunConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& f : fields()) out[f.key] = f.get(cfg);
    return out;
}

}  // namespace bbopm
