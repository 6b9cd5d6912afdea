#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace crossrec::cli {

// FNV-1a 64 over the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

// Entry point of the crossrec tool. Returns 0 on success, 2 for usage or
// configuration errors and 1 for runtime failures.
int run(int argc, char** argv);

}  // namespace crossrec::cli
