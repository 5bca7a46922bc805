#pragma once

#include <ostream>

namespace edngtm::cli {

/// Runs one subcommand (dcp, synth, train, infer, eval, augment, gradcheck).
/// Returns 0 on success, 2 on usage errors (text on `err`), 1 on runtime failure.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace edngtm::cli
