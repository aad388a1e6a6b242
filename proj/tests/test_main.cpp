#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"
#include "t1moco/runtime.hpp"

int main(int argc, char** argv) {
  t1moco::runtime::configure_allocator();
  doctest::Context ctx;
  ctx.applyCommandLine(argc, argv);
  return ctx.run();
}
