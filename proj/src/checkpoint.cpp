#include "shad/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace shad {
namespace {

void put_u16(std::ostream& os, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

bool get_u16(std::istream& is, uint16_t& v) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2)) return false;
    v = static_cast<uint16_t>(b[0] | (b[1] << 8));
    return true;
}

bool get_u32(std::istream& is, uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return true;
}

bool get_f64(std::istream& is, double& d) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    std::memcpy(&d, &v, 8);
    return true;
}

} // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Matrix*>>& entries) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    os.write("SHAD", 4);
    put_u16(os, kCheckpointVersion);
    for (const auto& [name, m] : entries) {
        put_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<uint32_t>(m->rows()));
        put_u32(os, static_cast<uint32_t>(m->cols()));
        for (int i = 0; i < m->size(); ++i) put_f64(os, m->at_flat(i));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

std::vector<std::pair<std::string, Matrix>> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "SHAD", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
    uint16_t version = 0;
    if (!get_u16(is, version)) throw std::runtime_error("checkpoint: truncated header in '" + path + "'");
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                                 " in '" + path + "'");

    std::vector<std::pair<std::string, Matrix>> out;
    uint32_t name_len = 0;
    while (get_u32(is, name_len)) {
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len))
            throw std::runtime_error("checkpoint: truncated entry name in '" + path + "'");
        uint32_t rows = 0, cols = 0;
        if (!get_u32(is, rows) || !get_u32(is, cols))
            throw std::runtime_error("checkpoint: truncated dims for '" + name + "'");
        Matrix m(static_cast<int>(rows), static_cast<int>(cols));
        for (int i = 0; i < m.size(); ++i) {
            double d;
            if (!get_f64(is, d))
                throw std::runtime_error("checkpoint: truncated payload for '" + name + "'");
            m.at_flat(i) = d;
        }
        out.emplace_back(std::move(name), std::move(m));
    }
    return out;
}

} // namespace shad
