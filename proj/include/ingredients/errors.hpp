#ifndef INGREDIENTS_ERRORS_HPP
#define INGREDIENTS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ingredients {

/// Malformed or inconsistent input data (files, corpora, checkpoints).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// "path:line: message", or "path: message" when line is 0.
inline std::string located(const std::string& path, std::size_t line, const std::string& message) {
    return line ? path + ":" + std::to_string(line) + ": " + message : path + ": " + message;
}

}  // namespace ingredients

#endif  // INGREDIENTS_ERRORS_HPP
