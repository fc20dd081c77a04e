#include "sqlagents/errors.hpp"

namespace sqlagents {

ParseError::ParseError(std::size_t record_index, const std::string& what)
    : Error("record " + std::to_string(record_index) + ": " + what), record_index_(record_index) {}

}  // namespace sqlagents
