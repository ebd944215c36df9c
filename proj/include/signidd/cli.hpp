#pragma once

namespace signidd {

// Entry point behind the sign-idd binary; returns the process exit code.
// Errors print a single "error: ..." line on stderr and exit nonzero.
int cli_main(int argc, const char* const* argv);

}  // namespace signidd
