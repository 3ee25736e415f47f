#include <string>
#include <vector>

#include "drbc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return drbc::cli::run_cli(std::move(args));
}
