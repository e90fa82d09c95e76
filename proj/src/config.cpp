#include "mdsm/config.hpp"

#include <fstream>
#include <set>
#include <string>

#include "mdsm/dataset.hpp"
#include "mdsm/error.hpp"

namespace mdsm {

namespace {

constexpr const char* kModule = "config";
using nlohmann::json;

// Reads keys of one object, rejecting anything not consumed.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError(kModule, "section '" + name_ + "' must be an object");
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError(kModule, name_ + "." + key + " has the wrong type");
        }
    }

    void read_optional(const char* key, std::optional<double>& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) return;
        if (!it->is_number()) throw ConfigError(kModule, name_ + "." + key + " must be a number");
        out = it->get<double>();
    }

    [[nodiscard]] const json* child(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError(kModule, "unknown key '" + name_ + "." + key + "'");
        }
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

template <typename T>
void require_positive(T v, const char* what) {
    if (!(v > T{0})) throw ConfigError(kModule, std::string(what) + " must be positive");
}

Weighting parse_weighting(const std::string& s) {
    if (s == "inverse-variance") return Weighting::InverseVariance;
    if (s == "none") return Weighting::None;
    throw ConfigError(kModule, "unknown weighting '" + s + "'");
}

const char* weighting_name(Weighting w) { return w == Weighting::InverseVariance ? "inverse-variance" : "none"; }

}  // namespace

double RunConfig::t_end() const {
    if (sample.t_end) return *sample.t_end;
    const double ratio = noise.min() / noise.sigma0;
    return ratio * ratio;
}

AnnealSchedule RunConfig::anneal() const {
    return default_anneal(sample.steps, sample.t_start, t_end(), sample.step_size);
}

RunConfig parse_config(const json& j) {
    RunConfig c;
    Section root(j, "config");
    root.read("seed", c.seed);

    if (const json* d = root.child("data")) {
        Section s(*d, "data");
        s.read("kind", c.data.kind);
        s.read("path", c.data.path);
        s.read("n", c.data.n);
        s.read("dim", c.data.dim);
        s.read("modes", c.data.modes);
        s.read("radius", c.data.radius);
        s.read("std", c.data.std);
        s.read("center", c.data.center);
        s.finish();
    }
    const std::set<std::string> kinds{"ring", "gaussian", "point", "csv2d", "idx-images"};
    if (!kinds.count(c.data.kind)) throw ConfigError(kModule, "unknown data kind '" + c.data.kind + "'");
    if ((c.data.kind == "csv2d" || c.data.kind == "idx-images") && c.data.path.empty()) {
        throw ConfigError(kModule, "data.path is required for " + c.data.kind);
    }
    require_positive(c.data.n, "data.n");
    if (c.data.kind == "ring") {
        c.data.dim = 2;
        if (c.data.center.size() != 2) throw ConfigError(kModule, "ring center must have two coordinates");
    }
    if (c.data.kind == "gaussian" || c.data.kind == "point") {
        require_positive(c.data.dim, "data.dim");
        if (c.data.center.size() == 1 && c.data.dim > 1) c.data.center.assign(c.data.dim, c.data.center[0]);
        if (c.data.center.size() != c.data.dim) throw ConfigError(kModule, "data.center must have data.dim entries");
    }
    if (c.data.kind == "ring" || c.data.kind == "gaussian") {
        if (!(c.data.std >= 0.0)) throw ConfigError(kModule, "data.std must be >= 0");
    }

    if (const json* n = root.child("net")) {
        Section s(*n, "net");
        s.read("input_dim", c.net.input_dim);
        s.read("hidden_dims", c.net.hidden_dims);
        s.read("seed", c.net.seed);
        s.finish();
    }
    if (c.data.kind == "ring" || c.data.kind == "gaussian" || c.data.kind == "point") c.net.input_dim = c.data.dim;
    c.net.validate();

    double lo = 0.05, hi = 1.2, sigma0 = 0.1;
    std::size_t levels = 128;
    std::string spacing = "linear";
    if (const json* n = root.child("noise")) {
        Section s(*n, "noise");
        s.read("min", lo);
        s.read("max", hi);
        s.read("levels", levels);
        s.read("spacing", spacing);
        s.read("sigma0", sigma0);
        s.finish();
    }
    try {
        c.noise = make_schedule(lo, hi, levels, parse_spacing(spacing), sigma0);
    } catch (const Error& e) {
        throw ConfigError(kModule, e.what());
    }

    if (const json* t = root.child("train")) {
        Section s(*t, "train");
        std::string weighting = weighting_name(c.train.weighting);
        s.read("steps", c.train.steps);
        s.read("batch_size", c.train.batch_size);
        s.read("learning_rate", c.train.adam.learning_rate);
        s.read("beta1", c.train.adam.beta1);
        s.read("beta2", c.train.adam.beta2);
        s.read("eps", c.train.adam.eps);
        s.read("checkpoint_every", c.train.checkpoint_every);
        s.read("weighting", weighting);
        s.finish();
        c.train.weighting = parse_weighting(weighting);
    }
    c.train.schedule = c.noise;
    c.train.seed = c.seed;
    c.train.validate();

    if (const json* t = root.child("sample")) {
        Section s(*t, "sample");
        s.read("n", c.sample.n);
        s.read("steps", c.sample.steps);
        s.read("t_start", c.sample.t_start);
        s.read_optional("t_end", c.sample.t_end);
        s.read("step_size", c.sample.step_size);
        s.read("init_center", c.sample.init_center);
        s.finish();
    }
    require_positive(c.sample.n, "sample.n");
    (void)c.anneal();

    if (const json* a = root.child("ais")) {
        Section s(*a, "ais");
        s.read("preset", c.ais_preset);
        if (c.ais_preset == "full") {
            c.ais = AisConfig::full();
        } else if (c.ais_preset != "desk") {
            throw ConfigError(kModule, "unknown ais preset '" + c.ais_preset + "'");
        }
        std::string spacing_text(beta_spacing_name(c.ais.spacing));
        s.read("n_intermediates", c.ais.n_intermediates);
        s.read("hmc_steps_per_dist", c.ais.hmc_steps_per_dist);
        s.read("leapfrog_steps", c.ais.leapfrog_steps);
        s.read("leapfrog_eps", c.ais.leapfrog_eps);
        s.read("n_chains", c.ais.n_chains);
        s.read("spacing", spacing_text);
        s.read("beta_schedule", c.ais.beta_schedule);
        s.read("reference_std", c.ais.reference_std);
        s.read("bootstrap_resamples", c.ais.bootstrap_resamples);
        s.finish();
        c.ais.spacing = parse_beta_spacing(spacing_text);
    }
    c.ais.validate();
    root.finish();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError(kModule, "cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(kModule, path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["data"] = {{"kind", c.data.kind}, {"path", c.data.path},     {"n", c.data.n},
                 {"dim", c.data.dim},   {"modes", c.data.modes},   {"radius", c.data.radius},
                 {"std", c.data.std},   {"center", c.data.center}};
    j["net"] = {{"input_dim", c.net.input_dim}, {"hidden_dims", c.net.hidden_dims}, {"seed", c.net.seed}};
    j["noise"] = {{"min", c.noise.min()},
                  {"max", c.noise.max()},
                  {"levels", c.noise.size()},
                  {"spacing", std::string(spacing_name(c.noise.spacing))},
                  {"sigma0", c.noise.sigma0}};
    j["train"] = {{"steps", c.train.steps},
                  {"batch_size", c.train.batch_size},
                  {"learning_rate", c.train.adam.learning_rate},
                  {"beta1", c.train.adam.beta1},
                  {"beta2", c.train.adam.beta2},
                  {"eps", c.train.adam.eps},
                  {"checkpoint_every", c.train.checkpoint_every},
                  {"weighting", weighting_name(c.train.weighting)}};
    j["sample"] = {{"n", c.sample.n},
                   {"steps", c.sample.steps},
                   {"t_start", c.sample.t_start},
                   {"t_end", c.t_end()},
                   {"step_size", c.sample.step_size},
                   {"init_center", c.sample.init_center}};
    j["ais"] = {{"preset", c.ais_preset},
                {"n_intermediates", c.ais.n_intermediates},
                {"hmc_steps_per_dist", c.ais.hmc_steps_per_dist},
                {"leapfrog_steps", c.ais.leapfrog_steps},
                {"leapfrog_eps", c.ais.leapfrog_eps},
                {"n_chains", c.ais.n_chains},
                {"spacing", std::string(beta_spacing_name(c.ais.spacing))},
                {"beta_schedule", c.ais.beta_schedule},
                {"reference_std", c.ais.reference_std},
                {"bootstrap_resamples", c.ais.bootstrap_resamples}};
    return j;
}

GmmOracle data_oracle(const DataConfig& data) {
    if (data.kind == "ring") {
        return GmmOracle::ring(data.modes, data.radius, data.std, data.center[0], data.center[1]);
    }
    if (data.kind == "gaussian" || data.kind == "point") {
        Tensor mean({1, data.dim}, data.center);
        return GmmOracle(std::move(mean), data.kind == "point" ? 0.0 : data.std);
    }
    throw ConfigError(kModule, "data kind '" + data.kind + "' has no analytic density");
}

Tensor make_dataset(const RunConfig& config) {
    const DataConfig& d = config.data;
    if (d.kind == "csv2d") return load_dataset(d.path, DatasetKind::Csv2d);
    if (d.kind == "idx-images") return load_dataset(d.path, DatasetKind::IdxImages);
    Rng rng = Rng(config.seed).derive(1);
    return data_oracle(d).sample(d.n, rng);
}

}  // namespace mdsm
