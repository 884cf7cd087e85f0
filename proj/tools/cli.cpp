#include "cli.hpp"

#include "run_config.hpp"

#include <jenn/checkpoint.hpp>
#include <jenn/container.hpp>
#include <jenn/dataset.hpp>
#include <jenn/diagnostics.hpp>
#include <jenn/error.hpp>
#include <jenn/parallel.hpp>
#include <jenn/rng.hpp>
#include <jenn/training.hpp>
#include <jenn/verification.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace jenn::cli {

namespace fs = std::filesystem;

namespace {

// Flags that map onto RunConfig keys. Values are kept as text and applied on
// top of the config file, so both sources go through the same parser.
class Settings {
  public:
    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        CLI::Option* opt = app->add_option(flag, values_[key], help);
        options_.emplace_back(key, opt);
    }

    void add_config(CLI::App* app) {
        app->add_option("--config", config_path_, "Run configuration file (key = value lines)");
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path_.empty()) {
            std::ifstream in(config_path_, std::ios::binary);
            if (!in) {
                throw ConfigError(fmt::format("cannot read config file '{}'", config_path_));
            }
            std::ostringstream text;
            text << in.rdbuf();
            cfg = run_config_from_text(text.str());
        }
        for (const auto& [key, opt] : options_) {
            if (opt->count() > 0) {
                apply_setting(cfg, key, values_.at(key));
            }
        }
        return cfg;
    }

  private:
    std::map<std::string, std::string> values_;
    std::vector<std::pair<std::string, CLI::Option*>> options_;
    std::string config_path_;
};

void add_physics(CLI::App* app, Settings& s) {
    s.add(app, "--n", "n", "State dimension (default 40)");
    s.add(app, "--forcing", "forcing", "Forcing F (default 8)");
    s.add(app, "--dt", "dt", "RK4 time step (default 0.0125)");
}

void add_sampling(CLI::App* app, Settings& s) {
    s.add(app, "--seed", "seed", "Master seed (default 0)");
    s.add(app, "--holdout-fraction", "holdout_fraction", "Trailing share of pairs held out (default 0.1)");
    s.add(app, "--mode", "perturbation_mode", "Perturbation mode: dense_proportional | sparse_site");
    s.add(app, "--rel-scale", "rel_scale", "Relative perturbation size (default 0.01)");
    s.add(app, "--eval-sensitivity-count", "eval_sensitivity_count", "Held-out sensitivity records (default 1024)");
    s.add(app, "--jacobian-states", "eval_jacobian_states", "Held-out states for Jacobian metrics (default 20)");
}

std::string output_dir(const RunConfig& cfg) {
    if (!cfg.out.empty()) {
        return cfg.out;
    }
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
        return env;
    }
    throw ConfigError(fmt::format("--out is required (or set {})", kOutputDirEnv));
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw Error(fmt::format("failed writing '{}'", path.string()));
    }
}

const std::string& required(const std::string& value, const char* flag) {
    if (value.empty()) {
        throw ConfigError(fmt::format("{} is required", flag));
    }
    return value;
}

SensitivitySet holdout_sensitivity(const ExperimentConfig& e, const TrajectoryDataset& holdout) {
    return generate_sensitivity_set(holdout, std::min(e.eval_sensitivity_count, holdout.size()), e.mode, e.rel_scale,
                                    ExperimentSeeds::from(e.seed).eval_sensitivity);
}

EvalOptions eval_options(const ExperimentConfig& e) {
    return {e.eval_jacobian_states, ExperimentSeeds::from(e.seed).eval_jacobian};
}

std::string describe(const OptimizeReport& r) {
    return fmt::format("{} iterations, {} evaluations, loss {:.6g} -> {:.6g}, {}", r.iterations, r.evaluations,
                       r.loss_history.empty() ? r.final_loss : r.loss_history.front(), r.final_loss,
                       to_string(r.termination));
}

// ---------------------------------------------------------------------------

void cmd_gen_data(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const auto& e = cfg.experiment;
    const fs::path dir = output_dir(cfg);
    ensure_dir(dir);
    const TrajectoryDataset traj = generate_trajectory(e.physics, e.spinup_time, e.sample_time, e.seed);
    const SensitivitySet sens = generate_sensitivity_set(traj, std::min(e.sensitivity_count, traj.size()), e.mode,
                                                         e.rel_scale, ExperimentSeeds::from(e.seed).sensitivity);
    const fs::path traj_path = dir / "trajectory.jenn";
    const fs::path sens_path = dir / "sensitivity.jenn";
    save_dataset(traj_path, traj);
    save_dataset(sens_path, sens);
    out << fmt::format("wrote {} pairs (n={}, dt={}) to {} and {} sensitivity records to {}\n", traj.size(),
                       e.physics.n, format_real(e.physics.dt), traj_path.string(), sens.size(), sens_path.string());
}

Matrix attractor_states(const Lorenz96Config& cfg, Eigen::Index count) {
    StateVector x = StateVector::Constant(cfg.n, cfg.forcing);
    x[0] += kSpinupKick;
    for (int i = 0; i < 2000; ++i) {
        x = lorenz96::step_rk4(cfg, x);
    }
    Matrix states(cfg.n, count);
    for (Eigen::Index k = 0; k < count; ++k) {
        for (int i = 0; i < 8; ++i) {
            x = lorenz96::step_rk4(cfg, x);
        }
        states.col(k) = x;
    }
    return states;
}

constexpr double kIdentityTol = 1e-12;
constexpr double kTaylorOrder = 2.0;
constexpr double kTaylorSlack = 0.1;

bool cmd_verify_tlad(const RunConfig& cfg, Eigen::Index probes, const std::string& checkpoint, std::ostream& out) {
    const auto& e = cfg.experiment;
    e.physics.validate();
    if (probes <= 0) {
        throw ConfigError("--probes must be positive");
    }
    bool ok = true;
    auto verdict = [&](bool pass) {
        ok = ok && pass;
        return pass ? "PASS" : "FAIL";
    };

    const Matrix states = attractor_states(e.physics, probes);
    const auto adj = physics_adjoint_identity(e.physics, states, probes, derive_seed(e.seed, 10));
    const bool adj_ok = adj.max_rel < kIdentityTol;
    out << fmt::format("physics adjoint identity: probes={} max_rel={:.3e} tol={:.0e} {}", adj.probes, adj.max_rel,
                       kIdentityTol, verdict(adj_ok));
    out << (adj_ok ? std::string("\n") : fmt::format(" (worst probe {})\n", adj.worst_probe));

    Rng rng(derive_seed(e.seed, 11));
    StateVector dx(e.physics.n);
    for (Eigen::Index i = 0; i < dx.size(); ++i) {
        dx[i] = rng.normal();
    }
    const auto taylor = taylor_test(e.physics, states.col(0), dx);
    const bool taylor_ok = std::abs(taylor.min_order - kTaylorOrder) <= kTaylorSlack &&
                           std::abs(taylor.max_order - kTaylorOrder) <= kTaylorSlack;
    std::string orders;
    for (const double o : taylor.orders) {
        orders += fmt::format("{}{:.4f}", orders.empty() ? "" : ",", o);
    }
    out << fmt::format("physics Taylor order: orders={} expected {}+-{} {}\n", orders, kTaylorOrder, kTaylorSlack,
                       verdict(taylor_ok));

    if (!checkpoint.empty()) {
        const Checkpoint ckpt = load_checkpoint(checkpoint);
        if (ckpt.is_physics_stub()) {
            out << "checkpoint holds the physics stub; emulator checks covered above\n";
        } else {
            const MlpParams& params = ckpt.params();
            Lorenz96Config physics = e.physics;
            physics.n = params.architecture().input_dim;
            const Matrix emu_states = attractor_states(physics, probes);
            const auto t = emulator_transpose_identity(params, emu_states, probes, derive_seed(e.seed, 12));
            const bool t_ok = t.identity.max_rel < kIdentityTol;
            out << fmt::format("emulator transpose identity: probes={} max_rel={:.3e} tol={:.0e} {}", probes,
                               t.identity.max_rel, kIdentityTol, verdict(t_ok));
            out << (t_ok ? std::string("\n") : fmt::format(" (worst probe {})\n", t.identity.worst_probe));
            const bool j_ok = t.jacobian_max_abs < kIdentityTol;
            out << fmt::format("emulator Jacobian forward vs reverse: max_abs={:.3e} tol={:.0e} {}\n",
                               t.jacobian_max_abs, kIdentityTol, verdict(j_ok));
        }
    }
    return ok;
}

void cmd_train(const RunConfig& cfg_in, const std::string& phase, std::ostream& out) {
    if (phase != "1" && phase != "2" && phase != "both") {
        throw ConfigError(fmt::format("--phase must be 1, 2 or both (got '{}')", phase));
    }
    RunConfig cfg = cfg_in;
    const bool run1 = phase != "2";
    const bool run2 = phase != "1";
    if (!run1 && cfg.phase1_checkpoint.empty()) {
        throw ConfigError("--phase 2 requires --phase1-checkpoint");
    }
    const TrajectoryDataset traj = load_trajectory(required(cfg.data, "--data"));
    cfg.experiment.physics = traj.config;
    cfg.validate();
    const fs::path dir = output_dir(cfg);
    ensure_dir(dir);
    const auto& e = cfg.experiment;
    const auto seeds = ExperimentSeeds::from(e.seed);

    ExperimentData data = prepare_experiment_data(e, traj);
    if (!cfg.sensitivity.empty()) {
        data.sensitivity = load_sensitivity(cfg.sensitivity);
        if (!(data.sensitivity.config == traj.config)) {
            throw ConfigError("sensitivity file and trajectory use different physics configs");
        }
    }
    out << fmt::format("data: {} train pairs, {} holdout pairs, subset {}, {} sensitivity records\n",
                       data.train.size(), data.holdout.size(), data.subset.size(), data.sensitivity.size());

    std::optional<TrainResult> p1;
    std::optional<MlpParams> nn;
    if (run1) {
        const auto arch = MlpArchitecture::state_map(e.physics.n, e.hidden_dims);
        p1 = train_phase1(arch, data.subset, e.phase1, seeds.init);
        nn = p1->params;
        save_checkpoint(dir / "phase1.ckpt", p1->params, {e.seed, "phase1", {1.0, 0.0, 0.0}});
        out << "phase1: " << describe(p1->report) << '\n';
    } else {
        const Checkpoint ckpt = load_checkpoint(cfg.phase1_checkpoint);
        nn = ckpt.params();
        if (nn->architecture().input_dim != e.physics.n) {
            throw ConfigError("phase-1 checkpoint does not match the data dimension");
        }
    }

    std::optional<TrainResult> p2;
    if (run2) {
        p2 = train_phase2(*nn, data.subset, data.sensitivity, e.weights, e.phase2);
        save_checkpoint(dir / "phase2.ckpt", p2->params, {e.seed, "phase2", e.weights});
        out << "phase2: " << describe(p2->report) << '\n';
    }

    const EvalOptions opts = eval_options(e);
    const MetricsReport m_nn = evaluate(MlpEmulator(*nn), data.holdout, data.eval_sensitivity, opts);
    std::optional<MetricsReport> m_jenn;
    if (p2) {
        m_jenn = evaluate(MlpEmulator(p2->params), data.holdout, data.eval_sensitivity, opts);
    }
    const std::string report = format_run_report(&e, p1 ? &p1->report : nullptr, p2 ? &p2->report : nullptr, &m_nn,
                                                 m_jenn ? &*m_jenn : nullptr);
    write_text(dir / "report.txt", report);
    write_text(dir / "run_config.txt", to_text(cfg));
    out << report;
}

struct Holdout {
    TrajectoryDataset holdout;
    SensitivitySet sens;
};

Holdout load_holdout(const RunConfig& cfg) {
    const TrajectoryDataset traj = load_trajectory(required(cfg.data, "--data"));
    ExperimentConfig e = cfg.experiment;
    e.physics = traj.config;
    e.validate();
    Holdout h;
    h.holdout = split_holdout(traj, e.holdout_fraction).second;
    h.sens = holdout_sensitivity(e, h.holdout);
    return h;
}

void cmd_eval(const RunConfig& cfg, const std::string& nn_path, const std::string& jenn_path,
              const std::string& report_path, std::ostream& out) {
    const Holdout h = load_holdout(cfg);
    const EvalOptions opts = eval_options(cfg.experiment);
    const auto nn = make_emulator(load_checkpoint(nn_path));
    const MetricsReport m_nn = evaluate(*nn, h.holdout, h.sens, opts);
    std::optional<MetricsReport> m_jenn;
    if (!jenn_path.empty()) {
        const auto jenn = make_emulator(load_checkpoint(jenn_path));
        m_jenn = evaluate(*jenn, h.holdout, h.sens, opts);
    }
    const std::string report = format_run_report(nullptr, nullptr, nullptr, &m_nn, m_jenn ? &*m_jenn : nullptr);
    if (!report_path.empty()) {
        write_text(report_path, report);
    }
    out << report;
}

void cmd_export_figures(const RunConfig& cfg, const std::string& nn_path, const std::string& jenn_path,
                        const std::string& format, Eigen::Index record, Eigen::Index probes, std::ostream& out) {
    if (format != "csv" && format != "svg" && format != "both") {
        throw ConfigError(fmt::format("--format must be csv, svg or both (got '{}')", format));
    }
    const fs::path dir = output_dir(cfg);
    const Holdout h = load_holdout(cfg);
    const auto nn = make_emulator(load_checkpoint(nn_path));
    const auto jenn = make_emulator(load_checkpoint(jenn_path));
    const FigureData fig = collect_figure_data(*nn, *jenn, h.sens, record, h.sens.seed);

    std::vector<fs::path> written;
    for (const auto f : {ExportFormat::csv, ExportFormat::svg}) {
        if (format == "both" || format == (f == ExportFormat::csv ? "csv" : "svg")) {
            const auto paths = export_figure_data(fig, dir, f);
            written.insert(written.end(), paths.begin(), paths.end());
        }
    }

    const ProbeStatistics s =
        aggregate_probes(*nn, *jenn, h.sens, probes, cfg.experiment.eval_jacobian_states);
    std::vector<std::pair<std::string, std::string>> stats = {
        {"probes", std::to_string(s.probes)},
        {"sensitivity_seed", std::to_string(h.sens.seed)},
        {"forecast_mean_abs_nn", format_real(s.forecast_nn)},
        {"forecast_mean_abs_jenn", format_real(s.forecast_jenn)},
        {"tlm_mean_abs_nn", format_real(s.tlm_nn)},
        {"tlm_mean_abs_jenn", format_real(s.tlm_jenn)},
        {"adj_mean_abs_nn", format_real(s.adj_nn)},
        {"adj_mean_abs_jenn", format_real(s.adj_jenn)},
        {"jacobian_states", std::to_string(s.jacobian_states)},
        {"frob_rmse_nn", format_real(s.frob_rmse_nn)},
        {"frob_rmse_jenn", format_real(s.frob_rmse_jenn)},
    };
    const std::string text = format_key_values(stats);
    write_text(dir / "aggregate.txt", text);
    written.push_back(dir / "aggregate.txt");
    for (const auto& p : written) {
        out << "wrote " << p.string() << '\n';
    }
    out << text;
}

void cmd_make_stub(const RunConfig& cfg, const std::string& path, std::ostream& out) {
    save_physics_stub(path, cfg.experiment.physics);
    out << fmt::format("wrote physics stub (n={}) to {}\n", cfg.experiment.physics.n, path);
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Jacobian-enforced neural emulators of Lorenz 96", "jenn"};
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (0 = all cores)");

    std::function<int()> action;

    Settings gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate trajectory and sensitivity datasets");
    add_physics(gen_cmd, gen);
    gen.add(gen_cmd, "--spinup-time", "spinup_time", "Discarded spin-up time (default 1000)");
    gen.add(gen_cmd, "--sample-time", "sample_time", "Recorded time (default 1000)");
    gen.add(gen_cmd, "--seed", "seed", "Master seed (default 0)");
    gen.add(gen_cmd, "--sensitivity-count", "sensitivity_count", "Sensitivity records (default 2048)");
    gen.add(gen_cmd, "--mode", "perturbation_mode", "Perturbation mode: dense_proportional | sparse_site");
    gen.add(gen_cmd, "--rel-scale", "rel_scale", "Relative perturbation size (default 0.01)");
    gen.add(gen_cmd, "--out", "out", "Output directory");
    gen.add_config(gen_cmd);
    gen_cmd->callback([&] {
        action = [&] {
            cmd_gen_data(gen.resolve(), out);
            return kExitOk;
        };
    });

    Settings ver;
    Eigen::Index probes = 100;
    std::string ver_checkpoint;
    auto* ver_cmd = app.add_subcommand("verify-tlad", "Check tangent linear and adjoint consistency");
    add_physics(ver_cmd, ver);
    ver.add(ver_cmd, "--seed", "seed", "Probe seed (default 0)");
    ver_cmd->add_option("--probes", probes, "Random probes per identity check")->capture_default_str();
    ver_cmd->add_option("--checkpoint", ver_checkpoint, "Also check this emulator checkpoint");
    ver.add_config(ver_cmd);
    ver_cmd->callback([&] {
        action = [&] { return cmd_verify_tlad(ver.resolve(), probes, ver_checkpoint, out) ? kExitOk : kExitFailure; };
    });

    Settings tr;
    std::string phase = "both";
    auto* tr_cmd = app.add_subcommand("train", "Run phase 1, phase 2, or both");
    tr_cmd->add_option("--phase", phase, "1, 2 or both")->capture_default_str();
    tr.add(tr_cmd, "--data", "data", "Trajectory file from gen-data");
    tr.add(tr_cmd, "--sens", "sensitivity", "Sensitivity file to train phase 2 on (default: drawn from train split)");
    tr.add(tr_cmd, "--phase1-checkpoint", "phase1_checkpoint", "Starting point for --phase 2");
    tr.add(tr_cmd, "--out", "out", "Output directory");
    tr.add(tr_cmd, "--alpha", "alpha", "Forecast loss weight (default 1)");
    tr.add(tr_cmd, "--beta", "beta", "Tangent linear loss weight (default 1)");
    tr.add(tr_cmd, "--gamma", "gamma", "Adjoint loss weight (default 1)");
    tr.add(tr_cmd, "--hidden", "hidden_dims", "Hidden widths, comma separated (default 256,256)");
    tr.add(tr_cmd, "--subset-size", "subset_size", "Forecast pairs per phase (default 8192)");
    tr.add(tr_cmd, "--sensitivity-count", "sensitivity_count", "Phase-2 sensitivity records (default 2048)");
    tr.add(tr_cmd, "--phase1-iters", "phase1_max_iters", "Phase-1 iteration cap (default 2000)");
    tr.add(tr_cmd, "--phase2-iters", "phase2_max_iters", "Phase-2 iteration cap (default 2000)");
    tr.add(tr_cmd, "--lbfgs-memory", "lbfgs_memory", "Stored curvature pairs (default 10)");
    tr.add(tr_cmd, "--grad-tol", "grad_tol", "Gradient sup-norm tolerance (default 1e-8)");
    tr.add(tr_cmd, "--loss-tol", "loss_tol", "Relative loss decrease tolerance (default 1e-12)");
    add_sampling(tr_cmd, tr);
    tr.add_config(tr_cmd);
    tr_cmd->callback([&] {
        action = [&] {
            cmd_train(tr.resolve(), phase, out);
            return kExitOk;
        };
    });

    Settings ev;
    std::string ev_nn;
    std::string ev_jenn;
    std::string ev_report;
    auto* ev_cmd = app.add_subcommand("eval", "Evaluate checkpoints on the held-out split");
    ev.add(ev_cmd, "--data", "data", "Trajectory file from gen-data");
    ev_cmd->add_option("--nn", ev_nn, "Standard network (or physics stub) checkpoint")->required();
    ev_cmd->add_option("--jenn", ev_jenn, "JENN checkpoint to compare against");
    ev_cmd->add_option("--report", ev_report, "Also write the report to this file");
    add_sampling(ev_cmd, ev);
    ev.add_config(ev_cmd);
    ev_cmd->callback([&] {
        action = [&] {
            cmd_eval(ev.resolve(), ev_nn, ev_jenn, ev_report, out);
            return kExitOk;
        };
    });

    Settings fig;
    std::string fig_nn;
    std::string fig_jenn;
    std::string fig_format = "both";
    Eigen::Index fig_record = 0;
    Eigen::Index fig_probes = 100;
    auto* fig_cmd = app.add_subcommand("export-figures", "Write forecast, TLM, ADJ and Jacobian comparison figures");
    fig.add(fig_cmd, "--data", "data", "Trajectory file from gen-data");
    fig.add(fig_cmd, "--out", "out", "Output directory");
    fig_cmd->add_option("--nn", fig_nn, "Standard network checkpoint")->required();
    fig_cmd->add_option("--jenn", fig_jenn, "JENN checkpoint")->required();
    fig_cmd->add_option("--format", fig_format, "csv, svg or both")->capture_default_str();
    fig_cmd->add_option("--record", fig_record, "Held-out sensitivity record to draw")->capture_default_str();
    fig_cmd->add_option("--probes", fig_probes, "Probes in the aggregate statistics")->capture_default_str();
    add_sampling(fig_cmd, fig);
    fig.add_config(fig_cmd);
    fig_cmd->callback([&] {
        action = [&] {
            cmd_export_figures(fig.resolve(), fig_nn, fig_jenn, fig_format, fig_record, fig_probes, out);
            return kExitOk;
        };
    });

    Settings stub;
    std::string stub_out;
    auto* stub_cmd = app.add_subcommand("make-stub", "Write a checkpoint that evaluates the physics core itself");
    add_physics(stub_cmd, stub);
    stub_cmd->add_option("--out", stub_out, "Checkpoint path")->required();
    stub_cmd->callback([&] {
        action = [&] {
            cmd_make_stub(stub.resolve(), stub_out, out);
            return kExitOk;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }
    set_max_threads(threads);

    try {
        return action();
    } catch (const ConfigError& e) {
        err << "jenn: configuration error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "jenn: error: " << e.what() << '\n';
        return kExitFailure;
    }
}

} // namespace jenn::cli
