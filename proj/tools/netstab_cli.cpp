/*
 Copyright 2026 netstab contributors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "netstab/netstab.hpp"

namespace fs = std::filesystem;
using namespace netstab;

namespace {

// ---------------------------------------------------------------------
// key=value config plumbing: flags populate the map, defaults are
// materialized into it, and the manifest dumps the resolved map so a
// replay reproduces the run exactly.
// ---------------------------------------------------------------------

std::string get_str(KeyValueMap& kv, const std::string& key,
                    const std::string& def) {
    auto it = kv.find(key);
    if (it == kv.end()) {
        kv[key] = def;
        return def;
    }
    return it->second;
}

double get_double(KeyValueMap& kv, const std::string& key, double def) {
    auto it = kv.find(key);
    if (it == kv.end()) {
        kv[key] = format_number(def);
        return def;
    }
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not a number: '" +
                          it->second + "'");
    }
}

long get_long(KeyValueMap& kv, const std::string& key, long def) {
    auto it = kv.find(key);
    if (it == kv.end()) {
        kv[key] = std::to_string(def);
        return def;
    }
    try {
        return std::stol(it->second);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not an integer: '" +
                          it->second + "'");
    }
}

std::uint64_t resolve_seed(KeyValueMap& kv) {
    if (const char* env = std::getenv("NETSTAB_SEED")) {
        kv["seed"] = env;
    }
    auto it = kv.find("seed");
    if (it == kv.end()) {
        kv["seed"] = "12345";
        return 12345;
    }
    try {
        return std::stoull(it->second);
    } catch (const std::exception&) {
        throw ConfigError("config key 'seed': not an integer: '" + it->second +
                          "'");
    }
}

/// "2 0; 0 0.5" -> 2x2 matrix
Matrix parse_matrix(const std::string& text, const std::string& key) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(text);
    std::string row_text;
    while (std::getline(ss, row_text, ';')) {
        std::stringstream rs(row_text);
        std::vector<double> row;
        double v;
        while (rs >> v) row.push_back(v);
        if (!row.empty()) rows.push_back(row);
    }
    if (rows.empty()) throw ConfigError("config key '" + key + "': empty matrix");
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw ConfigError("config key '" + key + "': ragged matrix rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

LorentzParams lorentz_params_from(KeyValueMap& kv, const std::string& prefix) {
    LorentzParams p;
    p.alpha = get_double(kv, prefix + "alpha", 1.25);
    p.beta = get_double(kv, prefix + "beta", 0.75);
    p.k_sat = get_double(kv, prefix + "k_sat", 100.0);
    p.L_sat = get_double(kv, prefix + "L_sat", 50.0);
    p.M_sat = get_double(kv, prefix + "M_sat", 100.0);
    return p;
}

DiscreteSystem system_from(KeyValueMap& kv, LorentzParams* params_out = nullptr) {
    const std::string name = get_str(kv, "system", "saturated-lorentz");
    if (name == "lorentz" || name == "saturated-lorentz") {
        const LorentzParams p = lorentz_params_from(kv, "");
        if (params_out) *params_out = p;
        return name == "lorentz" ? lorentz_system(p)
                                 : saturated_lorentz_system(p);
    }
    if (name == "linear") {
        auto it = kv.find("A");
        if (it == kv.end())
            throw ConfigError("config key 'A': required for system=linear");
        const Matrix A = parse_matrix(it->second, "A");
        const Matrix B = kv.count("B")
                             ? parse_matrix(kv.at("B"), "B")
                             : Matrix::Identity(A.rows(), A.rows());
        return linear_system(A, B);
    }
    throw ConfigError("config key 'system': unknown system '" + name + "'");
}

void finish_manifest(RunManifest& man, const KeyValueMap& kv,
                     const fs::path& out_dir,
                     std::chrono::steady_clock::time_point t0) {
    man.config = kv;
    man.tool_version = kVersion;
    man.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    man.write((out_dir / "manifest.txt").string());
}

// ---------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------

int run_lyapunov(KeyValueMap kv) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path out_dir = get_str(kv, "out", ".");
    fs::create_directories(out_dir);
    const std::uint64_t seed = resolve_seed(kv);
    const long steps = get_long(kv, "steps", 1000000);
    const long burn_in = get_long(kv, "burn_in", 1000);
    const long reorth = get_long(kv, "reorth_every", 1);

    const DiscreteSystem sys = system_from(kv);
    Vector x0;
    if (kv.count("x0") && kv["x0"] != "auto") {
        const Matrix m = parse_matrix(kv["x0"], "x0");
        x0 = m.reshaped();
        if (x0.size() != sys.dim) throw ConfigError("config key 'x0': wrong dimension");
    } else {
        kv["x0"] = "auto";
        if (kv["system"] == "linear") {
            x0 = Vector::Zero(sys.dim);
        } else {
            SeededStream init(seed, 0, SeededStream::InitTag);
            x0 = attractor_point(sys, init);
        }
    }

    const LyapunovSpectrum spec =
        estimate_spectrum(sys, x0, steps, burn_in, reorth);

    CsvWriter csv((out_dir / "spectrum.csv").string());
    std::string header = "step";
    for (int i = 0; i < sys.dim; ++i) header += ",exp" + std::to_string(i + 1);
    csv.header(header);
    for (const auto& [step, running] : spec.history) {
        std::vector<std::string> cells{std::to_string(step)};
        for (double e : running) cells.push_back(format_number(e));
        csv.row(cells);
    }

    std::cout << "Lambda1 = " << format_number(spec.top())
              << "  lambda1 = exp(Lambda1) = "
              << format_number(spec.multipliers.front())
              << "  tail_variation = " << format_number(spec.tail_variation)
              << "\n";

    RunManifest man;
    man.command = "lyapunov";
    man.outputs = {"spectrum.csv"};
    finish_manifest(man, kv, out_dir, t0);
    return 0;
}

int run_critical_p(KeyValueMap kv) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path out_dir = get_str(kv, "out", ".");
    fs::create_directories(out_dir);
    const std::uint64_t seed = resolve_seed(kv);
    const long steps = get_long(kv, "steps", 1000000);
    const long burn_in = get_long(kv, "burn_in", 1000);
    get_str(kv, "system", "saturated-lorentz");

    const DiscreteSystem sys = system_from(kv);
    LyapunovSpectrum spec;
    if (kv.count("spectrum_file")) {
        // cached spectrum: one exponent per line
        std::ifstream in(kv["spectrum_file"]);
        if (!in) throw ConfigError("cannot open spectrum_file");
        double e;
        while (in >> e) spec.exponents.push_back(e);
        std::sort(spec.exponents.begin(), spec.exponents.end(),
                  std::greater<>());
        for (double v : spec.exponents)
            spec.multipliers.push_back(std::exp(v));
    } else {
        Vector x0;
        if (kv["system"] == "linear") {
            x0 = Vector::Zero(sys.dim);
        } else {
            SeededStream init(seed, 0, SeededStream::InitTag);
            x0 = attractor_point(sys, init);
        }
        spec = estimate_spectrum(sys, x0, steps, burn_in);
    }

    const QosReport rep = qos_report(sys, spec);
    const char* dom = rep.dominant == Dominant::Local ? "Local" : "Global";
    std::cout << "p_star_eig = " << format_number(rep.p_star_eig)
              << "\np_star_lya = " << format_number(rep.p_star_lya)
              << "\np_star = " << format_number(rep.p_star)
              << "\ndominant = " << dom << "\n";

    CsvWriter csv((out_dir / "critical_p.csv").string());
    csv.header("p_star_eig,p_star_lya,p_star,dominant");
    csv.row({format_number(rep.p_star_eig), format_number(rep.p_star_lya),
             format_number(rep.p_star), dom});

    RunManifest man;
    man.command = "critical-p";
    man.outputs = {"critical_p.csv"};
    finish_manifest(man, kv, out_dir, t0);
    return 0;
}

ExperimentConfig experiment_from(KeyValueMap& kv) {
    ExperimentConfig cfg;
    const std::string name = get_str(kv, "system", "saturated-lorentz");
    if (name == "linear") {
        cfg.slave.kind = SystemSpec::Kind::Linear;
        if (!kv.count("A")) throw ConfigError("config key 'A': required for system=linear");
        cfg.slave.A = parse_matrix(kv.at("A"), "A");
        cfg.slave.B = kv.count("B") ? parse_matrix(kv.at("B"), "B")
                                    : Matrix::Identity(cfg.slave.A.rows(),
                                                       cfg.slave.A.rows());
        cfg.master = cfg.slave;
        cfg.controller.kind = Controller::Kind::LinearGain;
        if (!kv.count("K")) throw ConfigError("config key 'K': required for system=linear");
        cfg.controller.K = parse_matrix(kv.at("K"), "K");
    } else if (name == "lorentz" || name == "saturated-lorentz") {
        cfg.slave.kind = name == "lorentz" ? SystemSpec::Kind::Lorentz
                                           : SystemSpec::Kind::SaturatedLorentz;
        LorentzParams ps;
        ps.alpha = get_double(kv, "alpha_s", 1.25);
        ps.beta = get_double(kv, "beta_s", 0.75);
        cfg.slave.params = ps;
        cfg.master.kind = cfg.slave.kind;
        LorentzParams pm;
        pm.alpha = get_double(kv, "alpha_m", ps.alpha);
        pm.beta = get_double(kv, "beta_m", ps.beta);
        cfg.master.params = pm;
        const std::string ctrl = get_str(kv, "controller", "cancel");
        if (ctrl == "cancel")
            cfg.controller.kind = Controller::Kind::CancelNonlinearity;
        else if (ctrl == "none")
            cfg.controller.kind = Controller::Kind::None;
        else
            throw ConfigError("config key 'controller': unknown '" + ctrl + "'");
    } else {
        throw ConfigError("config key 'system': unknown system '" + name + "'");
    }
    const double p = get_double(kv, "p", 0.9);
    if (p <= 0.0 || p > 1.0)
        throw ConfigError("config key 'p': must be in (0,1]");
    cfg.channel = ChannelModel::bernoulli(p);
    cfg.noise.stddev = get_double(kv, "noise", 0.1);
    cfg.n_steps = get_long(kv, "steps", 300);
    cfg.n_realizations = static_cast<int>(get_long(kv, "realizations", 3000));
    cfg.master_seed = resolve_seed(kv);
    cfg.init_radius = get_double(kv, "init_radius", 2.0);
    cfg.master_warmup = get_long(kv, "warmup", 500);
    cfg.threads = static_cast<int>(get_long(kv, "threads", 0));
    return cfg;
}

int run_simulate(KeyValueMap kv) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path out_dir = get_str(kv, "out", ".");
    fs::create_directories(out_dir);
    const ExperimentConfig cfg = experiment_from(kv);
    const EnsembleStats st = ensemble_error_stats(cfg);

    {
        CsvWriter csv((out_dir / "mse.csv").string());
        csv.header("step,mse,stderr");
        for (std::size_t n = 0; n < st.mse.size(); ++n)
            csv.row({std::to_string(n), format_number(st.mse[n]),
                     format_number(st.stderr_mse[n])});
    }
    {
        CsvWriter csv((out_dir / "histogram.csv").string());
        csv.header("bin_left,bin_right,count");
        for (std::size_t b = 0; b < st.hist_counts.size(); ++b)
            csv.row({format_number(st.hist_edges[b]),
                     format_number(st.hist_edges[b + 1]),
                     std::to_string(st.hist_counts[b])});
    }

    std::cout << "beta_hat = " << format_number(st.beta_hat)
              << "\nterminal_variance = " << format_number(st.terminal_variance)
              << "\ndiverged = " << st.diverged_count << "\n";

    RunManifest man;
    man.command = "simulate";
    man.outputs = {"mse.csv", "histogram.csv"};
    finish_manifest(man, kv, out_dir, t0);
    return 0;
}

int run_sweep(KeyValueMap kv) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path out_dir = get_str(kv, "out", ".");
    fs::create_directories(out_dir);
    resolve_seed(kv);
    const double p_min = get_double(kv, "p_min", 0.5);
    const double p_max = get_double(kv, "p_max", 0.8);
    const double p_step = get_double(kv, "p_step", 0.01);
    const long horizon = get_long(kv, "horizon", 5000);
    if (p_step <= 0.0) throw ConfigError("config key 'p_step': must be positive");

    Matrix A, B, K;
    const std::string name = get_str(kv, "system", "saturated-lorentz");
    if (name == "linear") {
        if (!kv.count("A")) throw ConfigError("config key 'A': required for system=linear");
        A = parse_matrix(kv.at("A"), "A");
        B = kv.count("B") ? parse_matrix(kv.at("B"), "B")
                          : Matrix::Identity(A.rows(), A.rows());
        if (kv.count("K")) K = parse_matrix(kv.at("K"), "K");
    } else {
        const LorentzParams p = lorentz_params_from(kv, "");
        A = lorentz_jacobian(Vector::Zero(2), p);
        B = (Matrix(2, 1) << 1.0, 0.0).finished();
    }
    if (K.size() == 0) {
        // optimal tangent gain from the equilibrium DARE; for Bernoulli
        // channels the gain is p-independent
        const RiccatiSolution sol =
            solve_dare(A, B, Matrix::Identity(A.rows(), A.cols()));
        K = optimal_gain(sol.P, A, B, ChannelModel::bernoulli(0.5));
    }

    CsvWriter csv((out_dir / "sweep.csv").string());
    csv.header("p,final_trace,status");
    const long n_grid = std::lround((p_max - p_min) / p_step);
    for (long i = 0; i <= n_grid; ++i) {
        const double p = p_min + double(i) * p_step;
        if (p <= 0.0 || p > 1.0) continue;
        const CovarianceTrace tr = linearized_covariance_trace(
            A, B, K, ChannelModel::bernoulli(p), horizon);
        const bool conv = tr.status == CovarianceTrace::Status::Converged;
        csv.row({format_number(p),
                 conv ? format_number(tr.traces.back())
                      : std::string("inf"),
                 conv ? "Converged" : "Diverged"});
    }

    RunManifest man;
    man.command = "sweep";
    man.outputs = {"sweep.csv"};
    finish_manifest(man, kv, out_dir, t0);
    return 0;
}

int dispatch(const std::string& command, KeyValueMap kv) {
    if (command == "lyapunov") return run_lyapunov(std::move(kv));
    if (command == "critical-p") return run_critical_p(std::move(kv));
    if (command == "simulate") return run_simulate(std::move(kv));
    if (command == "sweep") return run_sweep(std::move(kv));
    throw ConfigError("unknown command in manifest: '" + command + "'");
}

int run_replay(const std::string& manifest_path, const std::string& out_override) {
    KeyValueMap kv = load_key_values(manifest_path);
    auto it = kv.find("command");
    if (it == kv.end()) throw ConfigError("manifest has no 'command' key");
    const std::string command = it->second;
    kv.erase("command");
    kv.erase("tool_version");
    kv.erase("duration_seconds");
    for (auto i = kv.begin(); i != kv.end();) {
        if (i->first.rfind("output", 0) == 0)
            i = kv.erase(i);
        else
            ++i;
    }
    if (!out_override.empty()) kv["out"] = out_override;
    return dispatch(command, kv);
}

/// Flags override values loaded from --config; both land in one map.
struct CommonOpts {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> overrides;

    KeyValueMap resolve() const {
        KeyValueMap kv;
        if (!config_file.empty()) kv = load_key_values(config_file);
        for (const auto& [k, v] : overrides) kv[k] = v;
        return kv;
    }
};

void add_kv_flag(CLI::App* cmd, CommonOpts& opts, const std::string& flag,
                 const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        flag,
        [&opts, key](const std::string& v) {
            opts.overrides.emplace_back(key, v);
        },
        help);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"QoS limits and Monte Carlo experiments for stabilization "
                 "over erasure channels"};
    app.require_subcommand(1);

    CommonOpts ly, cp, sim, sw;
    std::string replay_manifest, replay_out;

    auto add_common = [](CLI::App* cmd, CommonOpts& o) {
        cmd->add_option("--config", o.config_file,
                        "key=value config file; flags override file values");
        add_kv_flag(cmd, o, "--out", "out", "output directory");
        add_kv_flag(cmd, o, "--seed", "seed", "master seed");
        add_kv_flag(cmd, o, "--threads", "threads", "worker threads (0 = cores)");
    };

    CLI::App* c_ly = app.add_subcommand("lyapunov", "estimate the Lyapunov spectrum");
    add_common(c_ly, ly);
    add_kv_flag(c_ly, ly, "--system", "system", "lorentz | saturated-lorentz | linear");
    add_kv_flag(c_ly, ly, "--alpha", "alpha", "Lorentz alpha");
    add_kv_flag(c_ly, ly, "--beta", "beta", "Lorentz beta");
    add_kv_flag(c_ly, ly, "--A", "A", "matrix for system=linear, e.g. \"2 0; 0 0.5\"");
    add_kv_flag(c_ly, ly, "--steps", "steps", "estimation steps");
    add_kv_flag(c_ly, ly, "--burn-in", "burn_in", "burn-in steps");
    add_kv_flag(c_ly, ly, "--x0", "x0", "initial state, or 'auto'");

    CLI::App* c_cp = app.add_subcommand("critical-p", "critical non-erasure probabilities");
    add_common(c_cp, cp);
    add_kv_flag(c_cp, cp, "--system", "system", "lorentz | saturated-lorentz | linear");
    add_kv_flag(c_cp, cp, "--alpha", "alpha", "Lorentz alpha");
    add_kv_flag(c_cp, cp, "--beta", "beta", "Lorentz beta");
    add_kv_flag(c_cp, cp, "--A", "A", "matrix for system=linear");
    add_kv_flag(c_cp, cp, "--steps", "steps", "spectrum estimation steps");
    add_kv_flag(c_cp, cp, "--spectrum-file", "spectrum_file",
                "reuse a cached spectrum (one exponent per line)");

    CLI::App* c_sim = app.add_subcommand("simulate", "master-slave Monte Carlo ensemble");
    add_common(c_sim, sim);
    add_kv_flag(c_sim, sim, "--system", "system", "saturated-lorentz | lorentz | linear");
    add_kv_flag(c_sim, sim, "--p", "p", "non-erasure probability");
    add_kv_flag(c_sim, sim, "--alpha-s", "alpha_s", "slave alpha");
    add_kv_flag(c_sim, sim, "--beta-s", "beta_s", "slave beta");
    add_kv_flag(c_sim, sim, "--alpha-m", "alpha_m", "master alpha (default slave's)");
    add_kv_flag(c_sim, sim, "--beta-m", "beta_m", "master beta (default slave's)");
    add_kv_flag(c_sim, sim, "--realizations", "realizations", "ensemble size");
    add_kv_flag(c_sim, sim, "--steps", "steps", "steps per realization");
    add_kv_flag(c_sim, sim, "--noise", "noise", "gamma stddev per coordinate");
    add_kv_flag(c_sim, sim, "--controller", "controller", "cancel | none");
    add_kv_flag(c_sim, sim, "--A", "A", "matrix for system=linear");
    add_kv_flag(c_sim, sim, "--B", "B", "input matrix for system=linear");
    add_kv_flag(c_sim, sim, "--K", "K", "gain for system=linear");

    CLI::App* c_sw = app.add_subcommand("sweep", "linearized covariance trace over p");
    add_common(c_sw, sw);
    add_kv_flag(c_sw, sw, "--system", "system", "saturated-lorentz | lorentz | linear");
    add_kv_flag(c_sw, sw, "--alpha", "alpha", "Lorentz alpha");
    add_kv_flag(c_sw, sw, "--beta", "beta", "Lorentz beta");
    add_kv_flag(c_sw, sw, "--A", "A", "matrix for system=linear");
    add_kv_flag(c_sw, sw, "--B", "B", "input matrix for system=linear");
    add_kv_flag(c_sw, sw, "--K", "K", "fixed gain (default: equilibrium DARE gain)");
    add_kv_flag(c_sw, sw, "--p-min", "p_min", "grid start");
    add_kv_flag(c_sw, sw, "--p-max", "p_max", "grid end");
    add_kv_flag(c_sw, sw, "--p-step", "p_step", "grid step");
    add_kv_flag(c_sw, sw, "--horizon", "horizon", "recursion horizon");

    CLI::App* c_rp = app.add_subcommand("replay", "re-run a recorded manifest");
    c_rp->add_option("manifest", replay_manifest, "manifest file")->required();
    c_rp->add_option("--out", replay_out, "redirect outputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (c_ly->parsed()) return run_lyapunov(ly.resolve());
        if (c_cp->parsed()) return run_critical_p(cp.resolve());
        if (c_sim->parsed()) return run_simulate(sim.resolve());
        if (c_sw->parsed()) return run_sweep(sw.resolve());
        if (c_rp->parsed()) return run_replay(replay_manifest, replay_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DivergedError& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return 2;
    } catch (const DegenerateError& e) {
        std::cerr << "degenerate: " << e.what() << "\n";
        return 2;
    } catch (const NoUnstableDirectionsError& e) {
        std::cerr << "no unstable directions: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
