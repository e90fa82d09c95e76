#include "mdsm/error.hpp"

namespace mdsm {

Error::Error(std::string module, const std::string& what)
    : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

}  // namespace mdsm
