#include "ingredients/framed_file.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "ingredients/errors.hpp"

namespace ingredients {

namespace {

template <typename U>
void append_le(std::vector<std::uint8_t>& out, U bits) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename U>
U read_le(const std::uint8_t* p) {
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(p[i]) << (8 * i);
    return bits;
}

}  // namespace

void append_f64(std::vector<std::uint8_t>& out, double v) { append_le(out, std::bit_cast<std::uint64_t>(v)); }
void append_f32(std::vector<std::uint8_t>& out, float v) { append_le(out, std::bit_cast<std::uint32_t>(v)); }
double read_f64(const std::uint8_t* p) { return std::bit_cast<double>(read_le<std::uint64_t>(p)); }
float read_f32(const std::uint8_t* p) { return std::bit_cast<float>(read_le<std::uint32_t>(p)); }

void write_framed(const std::string& path, const nlohmann::json& header, const std::vector<std::uint8_t>& payload) {
    const std::string text = header.dump();
    std::vector<std::uint8_t> prefix;
    append_le(prefix, static_cast<std::uint64_t>(text.size()));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(located(path, 0, "cannot write"));
    out.write(reinterpret_cast<const char*>(prefix.data()), static_cast<std::streamsize>(prefix.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) throw DataError(located(path, 0, "write failed"));
}

FramedFile read_framed(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(located(path, 0, "cannot open"));
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8) throw DataError(located(path, 0, "truncated: missing header length"));
    const std::uint64_t header_len = read_le<std::uint64_t>(bytes.data());
    if (header_len > bytes.size() - 8) throw DataError(located(path, 0, "truncated: header runs past end of file"));
    FramedFile f;
    try {
        f.header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(located(path, 0, std::string("malformed header: ") + e.what()));
    }
    f.payload.assign(bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len), bytes.end());
    return f;
}

}  // namespace ingredients
