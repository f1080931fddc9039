#include "rawmix/autodiff/checkpoint.hpp"

#include "rawmix/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rawmix::ad {
namespace {

constexpr char kMagic[8] = {'R', 'A', 'W', 'M', 'X', 'C', 'K', 'P'};

} // namespace

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const std::vector<NamedTensor>& tensors)
{
    nlohmann::json header{{"dtype", "f64"}, {"meta", meta}, {"tensors", nlohmann::json::array()}};
    for (const auto& t : tensors)
        header["tensors"].push_back({{"name", t.name}, {"shape", t.tensor.shape()}});
    const std::string text = header.dump();

    std::string bytes(kMagic, kMagic + 8);
    const auto len = static_cast<std::uint32_t>(text.size());
    for (int i = 0; i < 4; ++i)
        bytes.push_back(static_cast<char>((len >> (8 * i)) & 0xFF));
    bytes += text;
    for (const auto& t : tensors)
        for (double v : t.tensor.value()) {
            const auto u = std::bit_cast<std::uint64_t>(v);
            for (int i = 0; i < 8; ++i)
                bytes.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
        }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorKind::io, "cannot open checkpoint '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        fail(ErrorKind::io, "write failed for checkpoint '" + path.string() + "'");
}

const Tensor& Checkpoint::get(const std::string& name) const
{
    for (const auto& t : tensors)
        if (t.name == name)
            return t.tensor;
    fail(ErrorKind::structure, "checkpoint has no tensor named '" + name + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::io, "cannot open checkpoint '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        fail(ErrorKind::data, "'" + path.string() + "' is not a checkpoint");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t hlen = p[8] | (p[9] << 8) | (p[10] << 16) | (static_cast<std::size_t>(p[11]) << 24);
    if (bytes.size() < 12 + hlen)
        fail(ErrorKind::data, "truncated checkpoint header");

    Checkpoint ck;
    std::size_t offset = 12 + hlen;
    try {
        const auto header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
        if (header.value("dtype", "") != "f64")
            fail(ErrorKind::data, "checkpoint dtype must be f64");
        ck.meta = header.value("meta", nlohmann::json::object());
        for (const auto& t : header.at("tensors")) {
            Shape shape = t.at("shape").get<Shape>();
            const std::size_t n = shape_numel(shape);
            if (bytes.size() < offset + n * 8)
                fail(ErrorKind::data, "checkpoint payload truncated");
            std::vector<double> values(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::uint64_t u = 0;
                for (int b = 0; b < 8; ++b)
                    u |= static_cast<std::uint64_t>(p[offset + i * 8 + b]) << (8 * b);
                values[i] = std::bit_cast<double>(u);
            }
            offset += n * 8;
            ck.tensors.push_back({t.at("name").get<std::string>(), Tensor::from(std::move(shape), std::move(values))});
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, std::string("bad checkpoint header: ") + e.what());
    }
    if (offset != bytes.size())
        fail(ErrorKind::data, "checkpoint payload has trailing bytes");
    return ck;
}

} // namespace rawmix::ad
