#include "mdsm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "mdsm/error.hpp"

namespace mdsm {

namespace {

constexpr const char* kModule = "cli-io";
constexpr char kMagic[] = {'M', 'D', 'S', 'M', '1'};

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> b, std::size_t at, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t{b[at + static_cast<std::size_t>(i)]} << (8 * i);
    return v;
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

nlohmann::json net_config_to_json(const NetConfig& config) {
    return {{"input_dim", config.input_dim}, {"hidden_dims", config.hidden_dims}, {"seed", config.seed}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
    NetConfig c;
    try {
        c.input_dim = j.at("input_dim").get<std::size_t>();
        c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
        c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(kModule, std::string("bad network description: ") + e.what());
    }
    c.validate();
    return c;
}

std::vector<std::uint8_t> encode_checkpoint(const EnergyNet& net, std::uint64_t step, const nlohmann::json& config) {
    nlohmann::json manifest = nlohmann::json::array();
    const auto names = EnergyNet::param_names(net.config());
    const auto params = net.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        manifest.push_back({{"name", names[i]}, {"shape", params[i].shape()}});
    }
    const nlohmann::json header = {
        {"config", config}, {"step", step}, {"net", net_config_to_json(net.config())}, {"manifest", manifest}};
    const std::string text = header.dump();

    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_le(out, text.size(), 4);
    out.insert(out.end(), text.begin(), text.end());
    const std::size_t payload_start = out.size();
    for (const Tensor& t : params) {
        for (double v : t.data()) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
    }
    const std::uint64_t sum =
        fnv1a64(std::span<const std::uint8_t>(out.data() + payload_start, out.size() - payload_start));
    put_le(out, sum, 8);
    return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof kMagic + 4 + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw FormatError(kModule, "not an MDSM1 checkpoint");
    }
    const std::size_t header_len = get_le(bytes, sizeof kMagic, 4);
    const std::size_t header_start = sizeof kMagic + 4;
    if (bytes.size() < header_start + header_len + 8) throw FormatError(kModule, "checkpoint header truncated");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(header_start),
                                       bytes.begin() + static_cast<std::ptrdiff_t>(header_start + header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(kModule, std::string("checkpoint header is not JSON: ") + e.what());
    }
    const std::size_t payload_start = header_start + header_len;
    const std::size_t payload_len = bytes.size() - payload_start - 8;
    if (payload_len % 8 != 0) throw FormatError(kModule, "checkpoint payload is not a whole number of doubles");
    const auto payload = bytes.subspan(payload_start, payload_len);
    if (fnv1a64(payload) != get_le(bytes, payload_start + payload_len, 8)) {
        throw CorruptionError(kModule, "checkpoint checksum mismatch");
    }

    NetConfig net_config;
    std::vector<std::pair<std::string, Shape>> manifest;
    std::uint64_t step = 0;
    try {
        net_config = net_config_from_json(header.at("net"));
        step = header.at("step").get<std::uint64_t>();
        for (const auto& entry : header.at("manifest")) {
            manifest.emplace_back(entry.at("name").get<std::string>(), entry.at("shape").get<Shape>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(kModule, std::string("checkpoint header incomplete: ") + e.what());
    }
    const auto names = EnergyNet::param_names(net_config);
    const auto shapes = EnergyNet::param_shapes(net_config);
    if (manifest.size() != names.size()) {
        throw CompatibilityError(kModule, "manifest lists " + std::to_string(manifest.size()) +
                                              " tensors, network needs " + std::to_string(names.size()));
    }
    std::size_t total = 0;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (manifest[i].first != names[i] || manifest[i].second != shapes[i]) {
            throw CompatibilityError(kModule, "manifest entry " + manifest[i].first + " " +
                                                  shape_string(manifest[i].second) + " does not match " + names[i] +
                                                  " " + shape_string(shapes[i]));
        }
        total += shape_numel(shapes[i]);
    }
    if (total * 8 != payload_len) throw FormatError(kModule, "checkpoint payload size disagrees with manifest");

    std::vector<Tensor> params;
    std::size_t at = payload_start;
    for (const Shape& s : shapes) {
        Tensor t(s);
        for (double& v : t.data()) {
            v = std::bit_cast<double>(get_le(bytes, at, 8));
            at += 8;
        }
        params.push_back(std::move(t));
    }
    return {EnergyNet(net_config, std::move(params)), step, header.value("config", nlohmann::json::object())};
}

void save_checkpoint(const std::filesystem::path& path, const EnergyNet& net, std::uint64_t step,
                     const nlohmann::json& config) {
    const auto bytes = encode_checkpoint(net, step, config);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError(kModule, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw UsageError(kModule, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError(kModule, "cannot open checkpoint " + path.string());
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_checkpoint(bytes);
}

}  // namespace mdsm
