#pragma once

#include <stdexcept>
#include <string>

namespace copgof {

// Error taxonomy shared across the library. Every exception carries a stable
// machine-readable code (used by the CLI's --error-json output) next to the
// human-readable message.
class error : public std::runtime_error {
public:
    error(std::string code, const std::string& msg)
        : std::runtime_error(msg), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct invalid_parameters : error {
    explicit invalid_parameters(const std::string& msg) : error("invalid-parameters", msg) {}
};

struct domain_error : error {
    explicit domain_error(const std::string& msg) : error("domain-error", msg) {}
};

struct support_violation : error {
    explicit support_violation(const std::string& msg) : error("support-violation", msg) {}
};

struct non_convergence : error {
    explicit non_convergence(const std::string& msg) : error("non-convergence", msg) {}
};

struct degenerate_data : error {
    explicit degenerate_data(const std::string& msg) : error("degenerate-data", msg) {}
};

struct tie_error : error {
    explicit tie_error(const std::string& msg) : error("ties", msg) {}
};

struct numerical_singularity : error {
    explicit numerical_singularity(const std::string& msg) : error("numerical-singularity", msg) {}
};

struct singular_information : error {
    explicit singular_information(const std::string& msg) : error("singular-information", msg) {}
};

struct quadrature_failure : error {
    explicit quadrature_failure(const std::string& msg) : error("quadrature-failure", msg) {}
};

struct grid_mismatch : error {
    explicit grid_mismatch(const std::string& msg) : error("grid-mismatch", msg) {}
};

struct io_error : error {
    explicit io_error(const std::string& msg) : error("io-error", msg) {}
};

struct config_error : error {
    explicit config_error(const std::string& msg) : error("config-error", msg) {}
};

} // namespace copgof
