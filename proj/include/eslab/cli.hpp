#ifndef ESLAB_CLI_HPP
#define ESLAB_CLI_HPP

namespace eslab {

// Exit codes: 0 all checks pass, 1 a check failed, 2 invalid input or
// compute error.
int run_cli(int argc, const char* const* argv);

}  // namespace eslab

#endif
