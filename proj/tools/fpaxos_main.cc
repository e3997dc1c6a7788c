#include <iostream>

#include "fpaxos/cli.h"

int main(int argc, char** argv) {
  return fpaxos::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
