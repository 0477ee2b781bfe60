#pragma once

#include <stdexcept>
#include <string>

namespace nedsim {

// All library failures throw Error. The message always starts with
// "<module>.<operation>:" so the CLI can report the failing site verbatim.
class Error : public std::runtime_error {
public:
    Error(std::string module, std::string op, const std::string& what)
        : std::runtime_error(module + "." + op + ": " + what),
          module_(std::move(module)),
          op_(std::move(op)) {}

    const std::string& module() const noexcept { return module_; }
    const std::string& op() const noexcept { return op_; }

private:
    std::string module_;
    std::string op_;
};

}  // namespace nedsim
