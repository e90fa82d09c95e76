#include "mdsm/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mdsm/analysis.hpp"
#include "mdsm/checkpoint.hpp"
#include "mdsm/config.hpp"
#include "mdsm/dataset.hpp"
#include "mdsm/error.hpp"
#include "mdsm/kernels.hpp"
#include "mdsm/likelihood.hpp"
#include "mdsm/sampler.hpp"
#include "mdsm/training.hpp"

namespace mdsm {

namespace {

constexpr const char* kModule = "cli";
namespace fs = std::filesystem;
using nlohmann::json;

// RNG streams per pipeline, all derived from the run seed. Stream 1 is the
// synthetic dataset (see make_dataset).
enum Stream : std::uint64_t {
    kSampleStream = 2,
    kLogzStream = 3,
    kConcentrationStream = 4,
    kShellStream = 5,
    kOodStream = 6,
    kDenoiseStream = 7,
    kInpaintStream = 8,
};

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::string out = ".";
    std::string isa;
};

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw UsageError(kModule, "cannot write " + path.string());
    f << text;
    if (!f) throw UsageError(kModule, "write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// CSV with a header row; every value printed with round-trip precision.
void write_table(const fs::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
    std::string text;
    for (std::size_t i = 0; i < header.size(); ++i) text += (i ? "," : "") + header[i];
    text += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) text += (i ? "," : "") + format_double(row[i]);
        text += '\n';
    }
    write_text(path, text);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string config_hash(const RunConfig& config) {
    const std::string text = to_json(config).dump();
    const auto* p = reinterpret_cast<const std::uint8_t*>(text.data());
    return hex64(fnv1a64({p, text.size()}));
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError(kModule, "cannot open config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(kModule, path.string() + " is not valid JSON: " + e.what());
    }
}

// Layers: checkpoint echo, then --config file, then --seed.
RunConfig resolve_config(const GlobalOptions& g, const json* checkpoint_config) {
    json j = checkpoint_config ? *checkpoint_config : json::object();
    if (!g.config_path.empty()) j.merge_patch(read_json_file(g.config_path));
    if (g.seed) j["seed"] = *g.seed;
    return parse_config(j);
}

fs::path prepare_out(const GlobalOptions& g) {
    const fs::path out(g.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw UsageError(kModule, "cannot create output directory " + out.string() + ": " + ec.message());
    return out;
}

json tagged(const char* experiment, const RunConfig& config) {
    return json{{"experiment", experiment}, {"config_hash", config_hash(config)}, {"seed", config.seed}};
}

struct Loaded {
    Checkpoint checkpoint;
    RunConfig config;
};

Loaded load_run(const GlobalOptions& g, const std::string& checkpoint_path) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    RunConfig config = resolve_config(g, &ck.config);
    if (config.net.input_dim != ck.net.config().input_dim) {
        throw CompatibilityError(kModule, "config input_dim differs from the checkpoint network");
    }
    return {std::move(ck), std::move(config)};
}

Tensor load_rows(const std::string& path) { return load_dataset(path, DatasetKind::Csv2d); }

// Image-domain samples are clipped to [0,1] on export only.
void export_samples(const fs::path& path, Tensor samples, const RunConfig& config) {
    if (config.data.kind == "idx-images") {
        for (double& v : samples.data()) v = std::clamp(v, 0.0, 1.0);
    }
    write_csv(path, samples);
}

SampleOptions sample_options(const RunConfig& config) {
    SampleOptions o;
    o.sigma0 = config.noise.sigma0;
    o.init_center = config.sample.init_center;
    o.trace = true;
    return o;
}

void write_trace(const fs::path& path, const std::vector<TraceRow>& trace) {
    std::vector<std::vector<double>> rows;
    rows.reserve(trace.size());
    for (const auto& t : trace) {
        rows.push_back({static_cast<double>(t.step), t.temperature, t.mean_energy, t.std_energy});
    }
    write_table(path, {"step", "T", "mean_energy", "std_energy"}, rows);
}

std::vector<bool> parse_mask(const std::string& text, std::size_t dim) {
    std::vector<bool> mask;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "1") {
            mask.push_back(true);
        } else if (item == "0") {
            mask.push_back(false);
        } else {
            throw UsageError(kModule, "mask entries must be 0 or 1, got '" + item + "'");
        }
    }
    if (mask.size() != dim) {
        throw UsageError(kModule, "mask has " + std::to_string(mask.size()) + " entries, data has " +
                                      std::to_string(dim) + " coordinates");
    }
    return mask;
}

json ais_json(const AisResult& r, const AisConfig& cfg) {
    json j{{"direction", r.reverse ? "reverse" : "forward"},
           {"log_z", r.log_z},
           {"stderr_log_z", r.stderr_log_z},
           {"ess", r.ess},
           {"low_ess", r.low_ess},
           {"log_z_reference", r.log_z_reference},
           {"accept_rate", r.accept_rate},
           {"rejected_nonfinite", r.rejected_nonfinite},
           {"n_chains", r.log_weights.size()},
           {"n_intermediates", cfg.n_intermediates},
           {"hmc_steps_per_dist", cfg.hmc_steps_per_dist},
           {"spacing", std::string(beta_spacing_name(cfg.spacing))}};
    if (r.reverse) j["mean_log_density"] = r.mean_log_density;
    return j;
}

std::string timestamp_utc() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Library messages already carry their module prefix.
int report(std::ostream& err, const char* kind, const std::string& what, int code) {
    err << "mdsm: " << kind << ": " << what << '\n';
    return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multiscale denoising score matching: training, sampling and analysis"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Run seed (overrides the config)");
    app.add_option("--config", g.config_path, "JSON run configuration");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--isa", g.isa, "Kernel set: scalar or avx2 (default: best available)");

    std::string checkpoint, input, data_path, samples_path, mask_text;
    std::optional<std::size_t> n_opt, steps_opt;
    bool reverse = false;
    std::optional<double> gaussian_scale;
    std::size_t dim = 2, k = 1, n_noise = 16, n_eval = 1000;
    std::string preset;
    double noise_std = 0.0, sigma_eval = 0.3, shell_epsilon = -1.0;
    std::optional<double> threshold;
    std::vector<double> radii{0.25, 0.5, 1.0, 2.0, 4.0};
    ShellSpec shell;

    auto* train_cmd = app.add_subcommand("train", "Train an energy network");

    auto* sample_cmd = app.add_subcommand("sample", "Annealed Langevin sampling with a final denoising jump");
    sample_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    sample_cmd->add_option("--n", n_opt, "Number of chains");
    sample_cmd->add_option("--steps", steps_opt, "Annealing steps");

    auto* denoise_cmd = app.add_subcommand("denoise", "One-step denoising of CSV rows");
    denoise_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    denoise_cmd->add_option("--input", input, "CSV rows")->required();
    denoise_cmd->add_option("--noise-std", noise_std, "Gaussian noise added before denoising");

    auto* inpaint_cmd = app.add_subcommand("inpaint", "Fill masked-out coordinates by clamped sampling");
    inpaint_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    inpaint_cmd->add_option("--input", input, "CSV rows holding the known values")->required();
    inpaint_cmd->add_option("--mask", mask_text, "Comma separated 0/1 per coordinate, 1 = known")->required();
    inpaint_cmd->add_option("--steps", steps_opt, "Annealing steps");

    auto* logz_cmd = app.add_subcommand("logz", "Log partition function by annealed importance sampling");
    auto* logz_ck = logz_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file");
    auto* logz_gauss = logz_cmd->add_option("--gaussian-scale", gaussian_scale,
                                            "Use the energy of N(0, s^2 I) instead of a checkpoint");
    logz_ck->excludes(logz_gauss);
    logz_cmd->add_option("--dim", dim, "Dimension for --gaussian-scale");
    logz_cmd->add_flag("--reverse", reverse, "Run reverse AIS from data points");
    logz_cmd->add_option("--data", data_path, "CSV rows for --reverse (default: the run dataset)");
    logz_cmd->add_option("--preset", preset, "desk or full");

    auto* conc_cmd = app.add_subcommand("concentration", "Norm and angle statistics of isotropic Gaussian noise");
    conc_cmd->add_option("--d", shell.d, "Dimension")->required();
    conc_cmd->add_option("--sigma", shell.sigma, "Noise std")->required();
    conc_cmd->add_option("--n", n_eval, "Number of draws")->capture_default_str();
    conc_cmd->add_option("--epsilon", shell_epsilon, "Shell half-width (default: sigma)");

    auto* shell_cmd = app.add_subcommand("shell-error", "Score error by distance from the data");
    shell_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    shell_cmd->add_option("--radii", radii, "Comma separated radius multipliers")->delimiter(',');
    shell_cmd->add_option("--sigma-eval", sigma_eval, "Base noise level")->capture_default_str();
    shell_cmd->add_option("--n", n_eval, "Points per radius")->capture_default_str();

    auto* modes_cmd = app.add_subcommand("modes", "Assign samples to mixture modes");
    modes_cmd->add_option("--samples", samples_path, "CSV samples")->required();
    modes_cmd->add_option("--threshold", threshold, "Assignment distance threshold");

    auto* nn_cmd = app.add_subcommand("nn-check", "Nearest training rows of each sample");
    nn_cmd->add_option("--samples", samples_path, "CSV samples")->required();
    nn_cmd->add_option("--data", data_path, "CSV dataset (default: the run dataset)");
    nn_cmd->add_option("--k", k, "Neighbours per sample")->capture_default_str();

    auto* ood_cmd = app.add_subcommand("ood", "Denoising-residual outlier scores");
    ood_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    ood_cmd->add_option("--input", input, "CSV rows")->required();
    ood_cmd->add_option("--n-noise", n_noise, "Noise draws per row")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        return report(err, "usage error", std::string("cli: ") + e.what(), kExitUsage);
    }

    try {
        if (!g.isa.empty()) kernels::select(kernels::parse_isa(g.isa));

        if (*train_cmd) {
            const RunConfig config = resolve_config(g, nullptr);
            const fs::path dir = prepare_out(g);
            const json echo = to_json(config);
            write_json(dir / "config.json", echo);
            const auto start = std::chrono::steady_clock::now();

            const Tensor dataset = make_dataset(config);
            if (dataset.dim(1) != config.net.input_dim) {
                throw ConfigError(kModule, "dataset has " + std::to_string(dataset.dim(1)) +
                                               " columns, net.input_dim is " + std::to_string(config.net.input_dim));
            }
            EnergyNet net = EnergyNet::init(config.net);
            const TrainResult result = train(dataset, net, config.train, [&](std::size_t step, const EnergyNet& n) {
                save_checkpoint(dir / ("step_" + std::to_string(step)), n, step, echo);
            });
            save_checkpoint(dir / "final", net, config.train.steps, echo);

            std::vector<std::vector<double>> rows;
            rows.reserve(result.history.size());
            for (const auto& r : result.history) {
                rows.push_back({static_cast<double>(r.step), r.loss, r.mean_sq_residual});
            }
            write_table(dir / "loss.csv", {"step", "loss", "mean_sq_residual"}, rows);

            const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            write_json(dir / "metadata.json", {{"finished_at", timestamp_utc()},
                                               {"wall_seconds", seconds},
                                               {"isa", std::string(kernels::isa_name(kernels::active().isa))}});
            const double last = result.history.empty() ? 0.0 : result.history.back().loss;
            out << "trained " << config.train.steps << " steps, final loss " << format_double(last) << ", wrote "
                << (dir / "final").string() << '\n';
            return kExitOk;
        }

        if (*sample_cmd) {
            Loaded run = load_run(g, checkpoint);
            if (n_opt) run.config.sample.n = *n_opt;
            if (steps_opt) run.config.sample.steps = *steps_opt;
            const fs::path dir = prepare_out(g);
            Rng rng = Rng(run.config.seed).derive(kSampleStream);
            const SampleResult r =
                sample(run.checkpoint.net, run.config.sample.n, run.config.anneal(), rng, sample_options(run.config));
            export_samples(dir / "samples.csv", r.samples, run.config);
            write_trace(dir / "trace.csv", r.trace);
            write_json(dir / "sample_config.json", to_json(run.config));
            out << "wrote " << r.samples.dim(0) << " samples to " << (dir / "samples.csv").string() << '\n';
            return kExitOk;
        }

        if (*denoise_cmd) {
            Loaded run = load_run(g, checkpoint);
            Tensor x = load_rows(input);
            if (noise_std < 0.0) throw UsageError(kModule, "--noise-std must be >= 0");
            const fs::path dir = prepare_out(g);
            if (noise_std > 0.0) {
                Rng rng = Rng(run.config.seed).derive(kDenoiseStream);
                for (double& v : x.data()) v += noise_std * rng.normal();
                write_csv(dir / "noisy.csv", x);
            }
            const Tensor y = denoise_jump(run.checkpoint.net, x, run.config.noise.sigma0);
            export_samples(dir / "denoised.csv", y, run.config);
            out << "wrote " << (dir / "denoised.csv").string() << '\n';
            return kExitOk;
        }

        if (*inpaint_cmd) {
            Loaded run = load_run(g, checkpoint);
            if (steps_opt) run.config.sample.steps = *steps_opt;
            const Tensor known = load_rows(input);
            const std::vector<bool> mask = parse_mask(mask_text, known.dim(1));
            const fs::path dir = prepare_out(g);
            Rng rng = Rng(run.config.seed).derive(kInpaintStream);
            const SampleResult r =
                inpaint(run.checkpoint.net, known, mask, run.config.anneal(), rng, sample_options(run.config));
            export_samples(dir / "inpainted.csv", r.samples, run.config);
            write_trace(dir / "inpaint_trace.csv", r.trace);
            out << "wrote " << (dir / "inpainted.csv").string() << '\n';
            return kExitOk;
        }

        if (*logz_cmd) {
            if (checkpoint.empty() && !gaussian_scale) {
                throw UsageError(kModule, "logz needs --checkpoint or --gaussian-scale");
            }
            std::optional<Loaded> run;
            if (!checkpoint.empty()) run = load_run(g, checkpoint);
            RunConfig config = run ? run->config : resolve_config(g, nullptr);
            if (preset == "full") {
                config.ais = AisConfig::full();
                config.ais_preset = preset;
            } else if (preset == "desk") {
                config.ais = AisConfig{};
                config.ais_preset = preset;
            } else if (!preset.empty()) {
                throw UsageError(kModule, "unknown --preset '" + preset + "'");
            }
            std::optional<QuadraticEnergy> gaussian;
            if (gaussian_scale) gaussian.emplace(QuadraticEnergy::isotropic(dim, *gaussian_scale));
            const EnergyModel& model = run ? static_cast<const EnergyModel&>(run->checkpoint.net) : *gaussian;

            const fs::path dir = prepare_out(g);
            Rng rng = Rng(config.seed).derive(kLogzStream);
            AisResult r;
            if (reverse) {
                Tensor data;
                if (!data_path.empty()) {
                    data = load_rows(data_path);
                } else if (gaussian) {
                    Rng data_rng = Rng(config.seed).derive(1);
                    data = Tensor({config.ais.n_chains, dim});
                    data_rng.fill_normal(data.data(), 0.0, *gaussian_scale);
                } else {
                    data = make_dataset(config);
                }
                if (data.dim(0) > config.ais.n_chains) {
                    data = Tensor({config.ais.n_chains, data.dim(1)},
                                  std::vector<double>(data.data().begin(),
                                                      data.data().begin() + config.ais.n_chains * data.dim(1)));
                }
                r = reverse_ais_logz(model, data, config.ais, rng);
            } else {
                r = ais_logz(model, config.ais, rng);
            }
            json j = tagged("logz", config);
            j.update(ais_json(r, config.ais));
            if (gaussian) j["analytic_log_z"] = gaussian->log_partition();
            write_json(dir / "logz.json", j);
            out << j.dump(2) << '\n';
            return kExitOk;
        }

        if (*conc_cmd) {
            const RunConfig config = resolve_config(g, nullptr);
            shell.epsilon = shell_epsilon < 0.0 ? shell.sigma : shell_epsilon;
            Rng rng = Rng(config.seed).derive(kConcentrationStream);
            const ConcentrationStats s = concentration_stats(shell, n_eval, rng);
            json j = tagged("concentration", config);
            j.update({{"d", shell.d},
                      {"sigma", shell.sigma},
                      {"epsilon", shell.epsilon},
                      {"n", n_eval},
                      {"radius", shell.radius()},
                      {"mean_norm", s.mean_norm},
                      {"cv", s.cv},
                      {"mean_abs_cos", s.mean_abs_cos},
                      {"shell_fraction", s.shell_fraction}});
            const fs::path dir = prepare_out(g);
            write_json(dir / "concentration.json", j);
            out << j.dump(2) << '\n';
            return kExitOk;
        }

        if (*shell_cmd) {
            Loaded run = load_run(g, checkpoint);
            const GmmOracle oracle = data_oracle(run.config.data);
            Rng rng = Rng(run.config.seed).derive(kShellStream);
            const auto rows = shell_score_error(run.checkpoint.net, oracle, radii, sigma_eval,
                                                run.config.noise.sigma0, n_eval, rng);
            json j = tagged("shell-error", run.config);
            j["sigma_eval"] = sigma_eval;
            j["n"] = n_eval;
            json shells = json::array();
            for (const auto& s : rows) {
                shells.push_back({{"radius", s.radius},
                                  {"sigma_eff", s.sigma_eff},
                                  {"error", s.error},
                                  {"mse", s.mse},
                                  {"mean_cos", s.mean_cos}});
            }
            j["shells"] = shells;
            const fs::path dir = prepare_out(g);
            write_json(dir / "shell_error.json", j);
            out << j.dump(2) << '\n';
            return kExitOk;
        }

        if (*modes_cmd) {
            const RunConfig config = resolve_config(g, nullptr);
            const GmmOracle oracle = data_oracle(config.data);
            const Tensor samples = load_rows(samples_path);
            const double thr = threshold ? *threshold : default_mode_threshold(oracle, config.noise.sigma0);
            const ModeCoverage c = mode_coverage(samples, oracle, thr);
            json j = tagged("modes", config);
            j.update({{"threshold", thr},
                      {"n_samples", samples.dim(0)},
                      {"modes", oracle.modes()},
                      {"counts", c.counts},
                      {"unassigned", c.unassigned},
                      {"n_covered", c.n_covered},
                      {"min_share", c.min_share}});
            const fs::path dir = prepare_out(g);
            write_json(dir / "modes.json", j);
            out << j.dump(2) << '\n';
            return kExitOk;
        }

        if (*nn_cmd) {
            const RunConfig config = resolve_config(g, nullptr);
            const Tensor samples = load_rows(samples_path);
            const Tensor dataset = data_path.empty() ? make_dataset(config) : load_rows(data_path);
            const NeighborResult r = nn_check(samples, dataset, k);
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < r.indices.size(); ++i) {
                for (std::size_t j = 0; j < r.indices[i].size(); ++j) {
                    rows.push_back({static_cast<double>(i), static_cast<double>(j),
                                    static_cast<double>(r.indices[i][j]), r.distances[i][j]});
                }
            }
            const fs::path dir = prepare_out(g);
            write_table(dir / "nn_check.csv", {"sample", "rank", "index", "distance"}, rows);
            out << "wrote " << (dir / "nn_check.csv").string() << '\n';
            return kExitOk;
        }

        if (*ood_cmd) {
            Loaded run = load_run(g, checkpoint);
            const Tensor x = load_rows(input);
            Rng rng = Rng(run.config.seed).derive(kOodStream);
            const Tensor scores = ood_energy_score(run.checkpoint.net, x, run.config.noise.sigma0, rng, n_noise);
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < scores.numel(); ++i) rows.push_back({static_cast<double>(i), scores[i]});
            const fs::path dir = prepare_out(g);
            write_table(dir / "ood.csv", {"row", "score"}, rows);
            out << "wrote " << (dir / "ood.csv").string() << '\n';
            return kExitOk;
        }
    } catch (const UsageError& e) {
        return report(err, "usage error", e.what(), kExitUsage);
    } catch (const ConfigError& e) {
        return report(err, "config error", e.what(), kExitUsage);
    } catch (const FormatError& e) {
        return report(err, "format error", e.what(), kExitInput);
    } catch (const CorruptionError& e) {
        return report(err, "corruption error", e.what(), kExitInput);
    } catch (const CompatibilityError& e) {
        return report(err, "compatibility error", e.what(), kExitInput);
    } catch (const Error& e) {
        return report(err, "error", e.what(), kExitFailure);
    } catch (const std::exception& e) {
        return report(err, "error", std::string("cli: ") + e.what(), kExitFailure);
    }
    return kExitUsage;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace mdsm
