#include "cli.hpp"

auto main(int argc, char** argv) -> int {
  return sean::cli::run_cli(argc, argv);
}
