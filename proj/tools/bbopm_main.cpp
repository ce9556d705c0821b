// Command-line front end: simulate, calibrate, respond, sensitivity,
// abtest, analytic. Every subcommand loads the same flat key-value config,
// runs the scenario, and writes report.json plus CSV spectra into --out.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "bbopm/experiments.hpp"
#include "bbopm/probe.hpp"

namespace fs = std::filesystem;
using namespace bbopm;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::string profile = "desk";
    std::uint64_t seed = 0;
    bool seed_set = false;
    double squeeze_db = -1.0;
    int records = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "config file (key = value lines)");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--profile", o.profile, "parameter profile: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--seed", o.seed, "random seed")->each([&o](const std::string&) {
        o.seed_set = true;
    });
    cmd->add_option("--squeeze-db", o.squeeze_db, "probe squeezing in dB");
    cmd->add_option("--records", o.records, "number of records to average");
}

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig cfg = default_config(o.profile);
    if (!o.config_path.empty()) cfg = load_config_file(o.config_path, cfg);
    if (o.seed_set) cfg.seed = o.seed;
    if (o.squeeze_db >= 0.0) cfg.squeezing_db = o.squeeze_db;
    if (o.records > 0) cfg.n_records = o.records;
    cfg.validate();
    return cfg;
}

ExperimentReport base_report(const std::string& scenario, const RunConfig& cfg) {
    ExperimentReport rep;
    rep.scenario = scenario;
    rep.config_snapshot = config_to_map(cfg);
    return rep;
}

void emit(const ExperimentReport& rep, const fs::path& dir) {
    write_text_file((dir / "report.json").string(), rep.to_json());
    std::cout << "wrote " << (dir / "report.json").string() << "\n";
}

std::string save_spectrum(const Spectrum& s, const fs::path& dir, const std::string& name,
                          const std::string& label) {
    write_spectrum_csv(s, (dir / name).string(), label);
    return name;
}

SimInputs inputs_from(const RunConfig& cfg) {
    SimInputs in;
    in.ensemble = cfg.ensemble();
    in.field = cfg.field();
    in.pump = cfg.pump();
    in.probe = cfg.probe();
    return in;
}

int cmd_simulate(const CommonOpts& o, bool dump_trajectory) {
    const RunConfig cfg = resolve_config(o);
    const fs::path dir(o.out_dir);
    fs::create_directories(dir);
    const SimInputs in = inputs_from(cfg);

    ExperimentReport rep = base_report("simulate", cfg);
    const double phase = trimmed_demod_phase(cfg);
    const DemodSet dm = run_demod(cfg, in, cfg.n_records, cfg.seed, phase);
    rep.spectra_files.push_back(
        save_spectrum(dm.v_spectrum, dir, "v_spectrum.csv", "demodulated quadrature PSD"));
    const Spectrum raw = raw_spectrum(cfg, in, std::min(cfg.n_records, 20), cfg.seed);
    rep.spectra_files.push_back(
        save_spectrum(raw, dir, "s2_spectrum.csv", "raw polarimeter PSD"));
    rep.derived["u_mean"] = {dm.u_mean, 0.0};
    rep.derived["v_mean"] = {dm.v_mean, 0.0};
    rep.derived["v_plateau"] =
        band_average(dm.v_spectrum, cfg.analysis_fmin, cfg.analysis_fmin + 40.0);

    if (dump_trajectory) {
        SimPlan plan = cfg.plan();
        plan.seed = cfg.seed;
        const SpinTrajectory traj = simulate_record(plan, in, 0);
        std::ofstream os(dir / "trajectory.csv");
        os << "t,Fx,Fy,Fz\n";
        char buf[160];
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", traj.times[i],
                          traj.f_samples[i].x, traj.f_samples[i].y, traj.f_samples[i].z);
            os << buf;
        }
        std::cout << "wrote " << (dir / "trajectory.csv").string() << "\n";
    }
    emit(rep, dir);
    return 0;
}

int cmd_calibrate(const CommonOpts& o) {
    const RunConfig cfg = resolve_config(o);
    const fs::path dir(o.out_dir);
    fs::create_directories(dir);

    const FieldScanResult scan = field_scan_calibration(cfg);
    ExperimentReport rep = base_report("calibrate", cfg);
    rep.derived["dv_db"] = scan.slope;
    rep.derived["v_at_resonance"] = {scan.v_at_resonance, 0.0};

    std::ofstream os(dir / "field_scan.csv");
    os << "b_tesla,detuning_rad_s,u,v\n";
    char buf[160];
    for (std::size_t i = 0; i < scan.b_values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", scan.b_values[i],
                      scan.detuning[i], scan.u_means[i], scan.v_means[i]);
        os << buf;
    }
    emit(rep, dir);
    return 0;
}

int cmd_respond(const CommonOpts& o) {
    const RunConfig cfg = resolve_config(o);
    const fs::path dir(o.out_dir);
    fs::create_directories(dir);

    const ResponsivitySweep sweep = responsivity_sweep(cfg);
    ExperimentReport rep = base_report("respond", cfg);
    rep.derived["delta_omega_hz"] = sweep.delta_omega_hz;
    rep.derived["delta_omega_config_hz"] = {rad_to_hz(cfg.delta_omega()), 0.0};

    std::ofstream os(dir / "responsivity.csv");
    os << "freq_hz,tone_power,tone_power_stderr,normalized,normalized_stderr\n";
    char buf[200];
    for (std::size_t i = 0; i < sweep.freqs_hz.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      sweep.freqs_hz[i], sweep.power[i].value, sweep.power[i].stderr_,
                      sweep.normalized[i].value, sweep.normalized[i].stderr_);
        os << buf;
    }
    emit(rep, dir);
    return 0;
}

int cmd_sensitivity(const CommonOpts& o, bool quick) {
    const RunConfig cfg = resolve_config(o);
    const fs::path dir(o.out_dir);
    fs::create_directories(dir);

    const double squeeze = cfg.squeezing_db;
    const SensitivityResult res = sensitivity_run(cfg, squeeze, quick);

    ExperimentReport rep = base_report("sensitivity", cfg);
    rep.derived["dv_db"] = res.dv_db;
    rep.derived["delta_omega_hz"] = res.delta_omega_hz;
    rep.derived["omega3db_sql_hz"] = res.coherent.omega3db_hz;
    rep.derived["sqrt_sb_probe_sql"] = res.coherent.sqrt_sb_at_probe;
    rep.spectra_files.push_back(save_spectrum(res.coherent.v_spectrum, dir,
                                              "v_coherent.csv", "coherent v PSD"));
    rep.spectra_files.push_back(save_spectrum(
        res.coherent.sb_spectrum, dir, "sb_coherent.csv", "coherent magnetic PSD"));
    if (res.has_squeezed) {
        rep.derived["omega3db_sq_hz"] = res.squeezed.omega3db_hz;
        rep.derived["sqrt_sb_probe_sq"] = res.squeezed.sqrt_sb_at_probe;
        rep.derived["amplitude_ratio_at_probe"] = res.amplitude_ratio_at_probe;
        rep.derived["bandwidth_ratio"] = res.bandwidth_ratio;
        rep.derived["plateau_ratio"] = res.plateau_ratio;
        rep.spectra_files.push_back(save_spectrum(res.squeezed.v_spectrum, dir,
                                                  "v_squeezed.csv", "squeezed v PSD"));
        rep.spectra_files.push_back(save_spectrum(
            res.squeezed.sb_spectrum, dir, "sb_squeezed.csv", "squeezed magnetic PSD"));
    }
    emit(rep, dir);
    return 0;
}

int cmd_abtest(const CommonOpts& o) {
    const RunConfig cfg = resolve_config(o);
    const fs::path dir(o.out_dir);
    fs::create_directories(dir);

    const BackactionResult res = backaction_ab_test(cfg);
    ExperimentReport rep = base_report("abtest", cfg);
    rep.derived["max_plateau_deviation"] = {res.max_plateau_deviation, 0.0};
    rep.derived["var_fx_slope"] = res.fitted_var_slope;
    rep.derived["var_fx_slope_predicted"] = {res.predicted_var_slope, 0.0};
    for (std::size_t i = 0; i < res.scales.size(); ++i) {
        const std::string tag = "_scale_" + std::to_string(static_cast<int>(res.scales[i]));
        rep.derived["var_fx" + tag] = res.var_fx[i];
        rep.derived["plateau" + tag] = res.plateau[i];
    }
    emit(rep, dir);
    return 0;
}

int cmd_analytic(const CommonOpts& o) {
    const RunConfig cfg = resolve_config(o);
    const fs::path dir(o.out_dir);
    fs::create_directories(dir);

    AnalyticParams sql = analytic_params_from_config(cfg);
    sql.xi2 = 1.0;
    sql.s_shot = sql.s_shot_sql;
    RunConfig sq_cfg = cfg;
    if (sq_cfg.squeezing_db <= 0.0) sq_cfg.squeezing_db = 1.9;
    const AnalyticParams sq = analytic_params_from_config(sq_cfg);

    const double df = 1.0;
    std::ofstream os(dir / "analytic.csv");
    os << "freq_hz,lineshape,r_hat_sq,s_v_sql,s_v_sq,s_b_sql,s_b_sq,ratio,ratio_printed_"
          "form\n";
    char buf[320];
    for (double f = df; f <= cfg.analysis_fmax; f += df) {
        const double w = hz_to_rad(f);
        const double L = lineshape(sql, w);
        const double rhat = std::norm(responsivity(sql, w) / responsivity(sql, 0.0));
        std::snprintf(buf, sizeof buf,
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", f, L,
                      rhat, signal_noise_spectrum(sql, w), signal_noise_spectrum(sq, w),
                      sensitivity(sql, w), sensitivity(sq, w), squeezed_ratio(sq, w),
                      squeezed_ratio_printed_form(sq, w));
        os << buf;
    }

    ExperimentReport rep = base_report("analytic", cfg);
    const Bandwidth3dB bw = bandwidth_3db(sq);
    rep.derived["zeta2"] = {sq.zeta2(), 0.0};
    rep.derived["xi2"] = {sq.xi2, 0.0};
    rep.derived["omega3db_sql_hz"] = {bw.sql_hz, 0.0};
    rep.derived["omega3db_sq_hz"] = {bw.squeezed_hz, 0.0};
    const double w_probe = hz_to_rad(cfg.probe_freq);
    rep.derived["power_ratio_at_probe"] = {squeezed_ratio(sq, w_probe), 0.0};
    rep.derived["amplitude_ratio_at_probe"] = {std::sqrt(squeezed_ratio(sq, w_probe)),
                                               0.0};
    rep.spectra_files.push_back("analytic.csv");
    emit(rep, dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bell-Bloom magnetometer quantum-noise simulator"};
    app.require_subcommand(1);

    CommonOpts o_sim, o_cal, o_res, o_sen, o_ab, o_ana;
    bool dump_traj = false;
    bool quick = false;

    auto* sim = app.add_subcommand("simulate", "run records, emit raw and demod spectra");
    add_common(sim, o_sim);
    sim->add_flag("--dump-trajectory", dump_traj, "write t,Fx,Fy,Fz for record 0");

    auto* cal = app.add_subcommand("calibrate", "field scan, dispersive slope dv/dB");
    add_common(cal, o_cal);

    auto* res = app.add_subcommand("respond", "responsivity sweep and knee fit");
    add_common(res, o_res);

    auto* sen = app.add_subcommand("sensitivity",
                                   "magnetic sensitivity spectrum (A/B when --squeeze-db > 0)");
    add_common(sen, o_sen);
    sen->add_flag("--configured-response", quick,
                  "use configured calibration instead of measuring it");

    auto* ab = app.add_subcommand("abtest", "backaction A/B with scaled S3 noise");
    add_common(ab, o_ab);

    auto* ana = app.add_subcommand("analytic", "closed-form model curves");
    add_common(ana, o_ana);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(o_sim, dump_traj);
        if (cal->parsed()) return cmd_calibrate(o_cal);
        if (res->parsed()) return cmd_respond(o_res);
        if (sen->parsed()) return cmd_sensitivity(o_sen, quick);
        if (ab->parsed()) return cmd_abtest(o_ab);
        if (ana->parsed()) return cmd_analytic(o_ana);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
