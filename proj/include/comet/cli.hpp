#pragma once

namespace comet {

/// Entry point behind the `comet` executable.
///
/// Exit codes: 0 on success, 1 on a domain error (one line on stderr of the
/// form "error: <Code>: <message>"), 2 on a usage error.
int run_cli(int argc, char** argv);

}  // namespace comet
