#include "mdsm/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mdsm/error.hpp"

namespace mdsm {

namespace {

constexpr const char* kModule = "cli-io";

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError(kModule, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

DatasetKind parse_dataset_kind(std::string_view name) {
    if (name == "csv2d") return DatasetKind::Csv2d;
    if (name == "idx-images") return DatasetKind::IdxImages;
    throw ConfigError(kModule, "unknown dataset kind '" + std::string(name) + "'");
}

Tensor parse_csv(std::string_view text) {
    std::vector<double> values;
    std::size_t width = 0;
    std::size_t rows = 0;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty()) continue;
        std::size_t cols = 0;
        while (true) {
            const std::size_t comma = line.find(',');
            const std::string_view field = trim(line.substr(0, comma));
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
                throw FormatError(kModule, "line " + std::to_string(line_no) + ": bad number '" +
                                               std::string(field) + "'");
            }
            values.push_back(v);
            ++cols;
            if (comma == std::string_view::npos) break;
            line = line.substr(comma + 1);
        }
        if (rows == 0) width = cols;
        if (cols != width) {
            throw FormatError(kModule, "line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                                           " columns, found " + std::to_string(cols));
        }
        ++rows;
    }
    if (rows == 0) throw FormatError(kModule, "CSV holds no rows");
    return Tensor({rows, width}, std::move(values));
}

Tensor parse_idx_images(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16) throw FormatError(kModule, "IDX header truncated");
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != 2051) throw FormatError(kModule, "IDX magic " + std::to_string(magic) + " is not 2051");
    const std::size_t n = read_be32(bytes, 4);
    const std::size_t rows = read_be32(bytes, 8);
    const std::size_t cols = read_be32(bytes, 12);
    const std::size_t d = rows * cols;
    if (d == 0 || n == 0) throw FormatError(kModule, "IDX file declares an empty dataset");
    if ((bytes.size() - 16) / d < n) throw FormatError(kModule, "IDX payload truncated");
    if (bytes.size() - 16 != n * d) throw FormatError(kModule, "IDX payload has trailing bytes");
    Tensor out({n, d});
    for (std::size_t i = 0; i < n * d; ++i) out[i] = static_cast<double>(bytes[16 + i]) / 255.0;
    return out;
}

Tensor load_dataset(const std::filesystem::path& path, DatasetKind kind) {
    const std::vector<std::uint8_t> bytes = read_bytes(path);
    if (kind == DatasetKind::IdxImages) return parse_idx_images(bytes);
    const std::string text(bytes.begin(), bytes.end());
    return parse_csv(text);
}

void write_csv(const std::filesystem::path& path, const Tensor& rows) {
    if (rows.rank() != 2) throw DimensionError(kModule, "CSV output needs a [N,d] tensor");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError(kModule, "cannot write " + path.string());
    char buf[32];
    for (std::size_t r = 0; r < rows.shape()[0]; ++r) {
        for (std::size_t c = 0; c < rows.shape()[1]; ++c) {
            const int len = std::snprintf(buf, sizeof buf, "%.17g", rows.at(r, c));
            if (c) out.put(',');
            out.write(buf, len);
        }
        out.put('\n');
    }
    if (!out) throw UsageError(kModule, "failed writing " + path.string());
}

}  // namespace mdsm
