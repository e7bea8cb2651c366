#include "cfdm/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cfdm {

namespace {

constexpr char kMagic[4] = {'C', 'F', 'W', '1'};

void put_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("checkpoint truncated: " + path);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParamsF& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write(kMagic, 4);
    put_u32(os, static_cast<std::uint32_t>(params.entries.size()));
    for (const auto& [name, t] : params.entries) {
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<std::uint32_t>(t.rank()));
        for (Index a = 0; a < t.rank(); ++a) put_u32(os, static_cast<std::uint32_t>(t.extent(a)));
        static_assert(sizeof(float) == 4);
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.size()) * 4);
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<std::pair<std::string, TensorF>> load_checkpoint_entries(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a CFW1 checkpoint: " + path);
    const std::uint32_t count = get_u32(is, path);
    std::vector<std::pair<std::string, TensorF>> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(is, path);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len))
            throw std::runtime_error("checkpoint truncated: " + path);
        const std::uint32_t rank = get_u32(is, path);
        if (rank > 8) throw std::runtime_error("checkpoint rank too large: " + path);
        Shape shape;
        for (std::uint32_t a = 0; a < rank; ++a)
            shape.push_back(static_cast<Index>(get_u32(is, path)));
        TensorF t(shape);
        if (!is.read(reinterpret_cast<char*>(t.data()),
                     static_cast<std::streamsize>(t.size()) * 4))
            throw std::runtime_error("checkpoint truncated: " + path);
        entries.emplace_back(std::move(name), std::move(t));
    }
    return entries;
}

ModelParamsF load_checkpoint(const std::string& path, const NetConfig& cfg) {
    auto entries = load_checkpoint_entries(path);
    ModelParamsF expected = build_unet<float>(cfg, 0);
    if (entries.size() != expected.entries.size())
        throw std::runtime_error("checkpoint does not match network: parameter count differs");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].first != expected.entries[i].first ||
            entries[i].second.shape() != expected.entries[i].second.shape())
            throw std::runtime_error("checkpoint does not match network at parameter '" +
                                     entries[i].first + "'");
    }
    ModelParamsF out;
    out.config = cfg;
    out.entries = std::move(entries);
    return out;
}

}  // namespace cfdm
