#pragma once

#include <string>
#include <vector>

namespace dma::cli {

enum ExitCode {
    kOk = 0,
    kConfigError = 1,
    kRegimeError = 2,
    kCheckFailed = 3,  // run not accepted or a threshold violated
    kModuleError = 4,
};

// args excludes the program name.
int run(const std::vector<std::string>& args);

std::string sha256_hex(const std::string& data);

}  // namespace dma::cli
