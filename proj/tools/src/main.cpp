// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "distilkit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return distilkit::cli_main(args, std::cout, std::cerr);
}
