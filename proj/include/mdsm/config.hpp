#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdsm/energy_net.hpp"
#include "mdsm/gmm_oracle.hpp"
#include "mdsm/likelihood.hpp"
#include "mdsm/noise.hpp"
#include "mdsm/sampler.hpp"
#include "mdsm/training.hpp"

namespace mdsm {

// Where training data comes from. Synthetic kinds are generated from the run
// seed; file kinds are read from path.
struct DataConfig {
    std::string kind = "ring";  // ring | gaussian | point | csv2d | idx-images
    std::string path;
    std::size_t n = 4096;
    std::size_t dim = 2;        // gaussian / point
    std::size_t modes = 8;      // ring
    double radius = 1.0;        // ring
    double std = 0.05;          // ring component std, gaussian std
    std::vector<double> center{0.0, 0.0};
};

struct SampleConfig {
    std::size_t n = 2000;
    std::size_t steps = 2700;
    double t_start = 100.0;
    std::optional<double> t_end;  // defaults to (sigma_1 / sigma0)^2
    double step_size = 0.02;
    double init_center = 0.5;
};

struct RunConfig {
    std::uint64_t seed = 0;
    DataConfig data;
    NetConfig net;  // input_dim is taken from the data
    NoiseSchedule noise = make_schedule(0.05, 1.2, 128, Spacing::Linear, 0.1);
    TrainConfig train;  // schedule and seed are filled from the sections above
    SampleConfig sample;
    AisConfig ais;
    std::string ais_preset = "desk";

    [[nodiscard]] AnnealSchedule anneal() const;
    [[nodiscard]] double t_end() const;
};

// Strict parse: unknown keys, wrong types and invalid values throw ConfigError.
// Missing keys take defaults.
[[nodiscard]] RunConfig parse_config(const nlohmann::json& j);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

// Fully resolved configuration; parse_config(to_json(c)) reproduces c.
[[nodiscard]] nlohmann::json to_json(const RunConfig& config);

// The training data described by config.data (synthetic kinds use a stream
// derived from config.seed).
[[nodiscard]] Tensor make_dataset(const RunConfig& config);

// The mixture behind synthetic data, for oracle-based analyses. Throws
// ConfigError for file-backed kinds.
[[nodiscard]] GmmOracle data_oracle(const DataConfig& data);

}  // namespace mdsm
