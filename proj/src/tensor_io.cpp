#include "rawmix/tensor_io.hpp"

#include "rawmix/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rawmix {
namespace {

constexpr char kMagic[8] = {'M', 'S', 'F', 'A', 'T', 'N', 'S', 'R'};

void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const unsigned char* p, int bytes)
{
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::string read_all(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::io, "cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_all(const std::filesystem::path& path, const std::string& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        fail(ErrorKind::io, "write failed for '" + path.string() + "'");
}

} // namespace

void write_tensor_file(const std::filesystem::path& path, nlohmann::json header,
                       std::span<const std::int64_t> shape, std::span<const double> values,
                       Dtype dtype)
{
    std::int64_t count = 1;
    for (auto d : shape)
        count *= d;
    if (count != static_cast<std::int64_t>(values.size()))
        fail(ErrorKind::structure, "tensor shape does not match value count");
    header["dtype"] = dtype == Dtype::f32 ? "f32" : "f64";
    header["shape"] = std::vector<std::int64_t>(shape.begin(), shape.end());
    const std::string text = header.dump();

    std::string bytes(kMagic, kMagic + 8);
    put_u32(bytes, static_cast<std::uint32_t>(text.size()));
    bytes += text;
    bytes.reserve(bytes.size() + values.size() * (dtype == Dtype::f32 ? 4 : 8));
    for (double v : values) {
        if (dtype == Dtype::f32)
            put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        else
            put_u64(bytes, std::bit_cast<std::uint64_t>(v));
    }
    write_all(path, bytes);
}

TensorFile read_tensor_file(const std::filesystem::path& path)
{
    const std::string bytes = read_all(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        fail(ErrorKind::data, "'" + path.string() + "' is not a tensor file");
    const std::size_t hlen = get_le(p + 8, 4);
    if (bytes.size() < 12 + hlen)
        fail(ErrorKind::data, "truncated tensor header in '" + path.string() + "'");

    TensorFile tf;
    try {
        tf.header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
        tf.shape = tf.header.at("shape").get<std::vector<std::int64_t>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, "bad tensor header in '" + path.string() + "': " + e.what());
    }
    const std::string dtype = tf.header.value("dtype", "");
    int width = 0;
    if (dtype == "f32")
        width = 4;
    else if (dtype == "f64")
        width = 8;
    else
        fail(ErrorKind::data, "unsupported dtype '" + dtype + "'");

    std::int64_t count = 1;
    for (auto d : tf.shape) {
        if (d < 0)
            fail(ErrorKind::data, "negative dimension in tensor header");
        count *= d;
    }
    const std::size_t offset = 12 + hlen;
    if (bytes.size() != offset + static_cast<std::size_t>(count) * width)
        fail(ErrorKind::data, "payload size mismatch in '" + path.string() + "'");
    tf.values.resize(count);
    for (std::int64_t i = 0; i < count; ++i) {
        const unsigned char* q = p + offset + i * width;
        if (width == 4)
            tf.values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(q, 4)));
        else
            tf.values[i] = std::bit_cast<double>(get_le(q, 8));
    }
    return tf;
}

nlohmann::json pattern_to_json(const MsfaPattern& pattern)
{
    return {{"msfa", pattern.id()},
            {"band_grid", std::vector<int>(pattern.band_grid().begin(), pattern.band_grid().end())},
            {"wavelengths",
             std::vector<double>(pattern.wavelengths().begin(), pattern.wavelengths().end())}};
}

MsfaPattern pattern_from_json(const nlohmann::json& j)
{
    try {
        const std::string id = j.value("msfa", "");
        if (!j.contains("band_grid")) {
            return MsfaPattern::by_id(id);
        }
        auto grid = j.at("band_grid").get<std::vector<int>>();
        auto wl = j.at("wavelengths").get<std::vector<double>>();
        const int b = static_cast<int>(std::lround(std::sqrt(static_cast<double>(grid.size()))));
        return MsfaPattern(id, b, std::move(grid), std::move(wl));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, std::string("bad MSFA description: ") + e.what());
    }
}

void save_raw(const RawImage& img, const std::filesystem::path& path)
{
    nlohmann::json h = pattern_to_json(img.pattern());
    h["kind"] = "raw";
    const std::int64_t shape[2] = {img.height(), img.width()};
    write_tensor_file(path, std::move(h), shape, img.data(), Dtype::f64);
}

RawImage load_raw(const std::filesystem::path& path)
{
    TensorFile tf = read_tensor_file(path);
    if (tf.shape.size() != 2)
        fail(ErrorKind::structure, "'" + path.string() + "' is not a 2-D raw image");
    return RawImage(pattern_from_json(tf.header), static_cast<int>(tf.shape[0]),
                    static_cast<int>(tf.shape[1]), std::move(tf.values));
}

void save_cube(const PlaneCube& cube, const std::filesystem::path& path)
{
    nlohmann::json h = pattern_to_json(cube.pattern());
    h["kind"] = "cube";
    const std::int64_t shape[3] = {cube.channels(), cube.height(), cube.width()};
    write_tensor_file(path, std::move(h), shape, cube.data(), Dtype::f64);
}

PlaneCube load_cube(const std::filesystem::path& path)
{
    TensorFile tf = read_tensor_file(path);
    if (tf.shape.size() != 3)
        fail(ErrorKind::structure, "'" + path.string() + "' is not a 3-D cube");
    return PlaneCube(pattern_from_json(tf.header), static_cast<int>(tf.shape[0]),
                     static_cast<int>(tf.shape[1]), static_cast<int>(tf.shape[2]),
                     std::move(tf.values));
}

void save_pgm16(const RawImage& img, const std::filesystem::path& path)
{
    std::string bytes = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
                        "\n65535\n";
    bytes.reserve(bytes.size() + img.data().size() * 2);
    for (double v : img.data()) {
        const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
        bytes.push_back(static_cast<char>(q >> 8));
        bytes.push_back(static_cast<char>(q & 0xFF));
    }
    write_all(path, bytes);
}

RawImage load_pgm16(const std::filesystem::path& path, const MsfaPattern& pattern)
{
    const std::string bytes = read_all(path);
    std::size_t pos = 0;
    auto next_token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n')
                    ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])))
            ++pos;
        return bytes.substr(start, pos - start);
    };
    if (next_token() != "P5")
        fail(ErrorKind::data, "'" + path.string() + "' is not a binary PGM");
    int width = 0, height = 0, maxval = 0;
    try {
        width = std::stoi(next_token());
        height = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        fail(ErrorKind::data, "malformed PGM header in '" + path.string() + "'");
    }
    ++pos; // single whitespace before raster
    if (maxval <= 0 || maxval > 65535)
        fail(ErrorKind::data, "unsupported PGM maxval");
    const int sample_bytes = maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(width) * height * sample_bytes;
    if (bytes.size() < pos + need)
        fail(ErrorKind::data, "truncated PGM raster in '" + path.string() + "'");
    std::vector<double> data(static_cast<std::size_t>(width) * height);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + pos;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const unsigned v = sample_bytes == 2 ? (p[2 * i] << 8) | p[2 * i + 1] : p[i];
        data[i] = static_cast<double>(v) / maxval;
    }
    return RawImage(pattern, height, width, std::move(data));
}

} // namespace rawmix
