#include "p2pi/cli/cli.hpp"

int main(int argc, char** argv) {
  return p2pi::cli::run({argv + 1, argv + argc});
}
