#pragma once

namespace detox::pipeline {

/// Entry point of the `detox` tool. Returns the process exit code; failures
/// print one JSON object {"error": {...}} on stderr.
int run_cli(int argc, char** argv);

}  // namespace detox::pipeline
