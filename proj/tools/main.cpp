#include <string>
#include <vector>

#include "cli/commands.hpp"

int main(int argc, char** argv) {
  return s2p2::cli::run(std::vector<std::string>(argv, argv + argc));
}
