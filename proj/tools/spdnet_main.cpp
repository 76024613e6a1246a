#include <string>
#include <vector>

#include "spdnet/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return spdnet::run_cli(args);
}
