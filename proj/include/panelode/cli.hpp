#pragma once

namespace panelode::cli {

/// Parses argv and runs one subcommand. Returns the process exit code;
/// failures print one `error: <category>: <detail>` line to stderr.
int run(int argc, const char* const* argv);

}  // namespace panelode::cli
