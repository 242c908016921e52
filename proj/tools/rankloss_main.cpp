#include <string>
#include <vector>

#include "rankloss/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rankloss::cli::run_command(std::move(args));
}
