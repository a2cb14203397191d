#include <vector>

#include "rnls/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rnls::run_cli(args);
}
