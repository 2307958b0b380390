#include "vlmd/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vlmd {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                   static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& is) {
    std::array<unsigned char, 4> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 4)) {
        throw std::runtime_error("checkpoint: truncated file");
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(std::ostream& os, const Transformer<float>& net) {
    const auto& c = net.config();
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_u32(os, kCheckpointVersion);
    for (int v : {c.vocab_size, c.d_model, c.n_heads, c.n_layers, c.d_ff, c.max_len}) {
        put_u32(os, static_cast<std::uint32_t>(v));
    }
    put_u32(os, static_cast<std::uint32_t>(net.layout().size()));
    for (float f : net.params()) {
        put_u32(os, std::bit_cast<std::uint32_t>(f));
    }
    if (!os) {
        throw std::runtime_error("checkpoint: write failed");
    }
}

void save_checkpoint(const std::filesystem::path& path, const Transformer<float>& net) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("checkpoint: cannot write " + path.string());
    }
    save_checkpoint(os, net);
}

Transformer<float> load_checkpoint(std::istream& is) {
    char magic[sizeof(kCheckpointMagic)];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("checkpoint: bad magic");
    }
    const auto version = get_u32(is);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    ModelConfig c;
    c.vocab_size = static_cast<int>(get_u32(is));
    c.d_model = static_cast<int>(get_u32(is));
    c.n_heads = static_cast<int>(get_u32(is));
    c.n_layers = static_cast<int>(get_u32(is));
    c.d_ff = static_cast<int>(get_u32(is));
    c.max_len = static_cast<int>(get_u32(is));
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("checkpoint: ") + e.what());
    }
    Transformer<float> net(c);
    if (get_u32(is) != net.layout().size()) {
        throw std::runtime_error("checkpoint: tensor count does not match hyperparameters");
    }
    for (auto& f : net.params()) {
        f = std::bit_cast<float>(get_u32(is));
    }
    if (is.peek() != std::char_traits<char>::eof()) {
        throw std::runtime_error("checkpoint: trailing bytes");
    }
    return net;
}

Transformer<float> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("checkpoint: cannot read " + path.string());
    }
    return load_checkpoint(is);
}

}  // namespace vlmd
