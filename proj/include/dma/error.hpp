#pragma once

#include <stdexcept>
#include <string>

namespace dma {

// Error codes are stable strings so reports and exit paths can match on them.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

inline void require(bool ok, const char* code, const std::string& what) {
    if (!ok) throw Error(code, what);
}

}  // namespace dma
