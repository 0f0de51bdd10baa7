#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace temp::cli {

// Every tunable with its default. Flags mirror these keys one to one:
// {"sampling": {"tau": 1.0}} is set with `--sampling.tau 0.5`.
nlohmann::json default_config();

// Entry point shared by the executable and the tests. Returns the process
// exit code; failures print one JSON line {"error", "message"} to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace temp::cli
