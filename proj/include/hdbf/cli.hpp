#pragma once

#include <string>
#include <vector>

namespace hdbf {

// Subcommands: test, simulate, qq, roc, resample-size.
// Returns 0 on success, 2 on usage errors, 1 on data/runtime errors.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace hdbf
