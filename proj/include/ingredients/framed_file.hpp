#ifndef INGREDIENTS_FRAMED_FILE_HPP
#define INGREDIENTS_FRAMED_FILE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace ingredients {

// Shared on-disk framing for feature and checkpoint files:
//
//   u64 little-endian header length | JSON header (UTF-8) | payload
//
// Payload values are little-endian regardless of host byte order.

struct FramedFile {
    nlohmann::json header;
    std::vector<std::uint8_t> payload;
};

void write_framed(const std::string& path, const nlohmann::json& header, const std::vector<std::uint8_t>& payload);
/// Throws DataError on truncation or a malformed header.
FramedFile read_framed(const std::string& path);

void append_f64(std::vector<std::uint8_t>& out, double v);
void append_f32(std::vector<std::uint8_t>& out, float v);
double read_f64(const std::uint8_t* p);
float read_f32(const std::uint8_t* p);

}  // namespace ingredients

#endif  // INGREDIENTS_FRAMED_FILE_HPP
