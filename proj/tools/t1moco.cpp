#include <iostream>

#include "t1moco/cli.hpp"
#include "t1moco/runtime.hpp"

int main(int argc, char** argv) {
  t1moco::runtime::configure_allocator();
  return t1moco::cli::run(argc, argv, std::cout, std::cerr);
}
