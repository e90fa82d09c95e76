#pragma once

#include <stdexcept>
#include <string>

namespace mdsm {

// Every failure the library raises derives from Error so callers (the CLI in
// particular) can report a module-qualified message and pick an exit code.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what);
    [[nodiscard]] const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

#define MDSM_DECLARE_ERROR(Name)                                              \
    class Name : public Error {                                               \
    public:                                                                   \
        using Error::Error;                                                   \
    }

MDSM_DECLARE_ERROR(DimensionError);
MDSM_DECLARE_ERROR(DomainError);
MDSM_DECLARE_ERROR(GraphError);
MDSM_DECLARE_ERROR(NumericError);
MDSM_DECLARE_ERROR(ConfigError);
MDSM_DECLARE_ERROR(CapacityError);
MDSM_DECLARE_ERROR(FormatError);
MDSM_DECLARE_ERROR(CorruptionError);
MDSM_DECLARE_ERROR(CompatibilityError);
MDSM_DECLARE_ERROR(UsageError);

#undef MDSM_DECLARE_ERROR

}  // namespace mdsm
