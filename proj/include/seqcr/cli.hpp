#pragma once

namespace seqcr {

/// Entry point for the `seqcr` tool. 0 on success, 2 on usage errors, 1 otherwise.
int run_cli(int argc, char** argv);

}  // namespace seqcr
