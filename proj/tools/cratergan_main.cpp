#include <iostream>

#include "cratergan/pipeline.hpp"

int main(int argc, char** argv) {
  std::cout << std::unitbuf;
  return cratergan::run_cli(argc, argv, std::cout, std::cerr);
}
