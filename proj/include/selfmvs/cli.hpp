#pragma once

#include <iosfwd>

namespace selfmvs {

// Entry point of the `selfmvs` tool. Subcommands: synth, refine, check, fuse,
// viewsel, loss. Returns 0 on success, 1 on usage, contract or parse
// errors, 2 on I/O failures.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace selfmvs
