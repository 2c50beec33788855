#include <string>
#include <vector>

#include "adamcb/cli.hpp"

int main(int argc, char** argv) {
  return adamcb::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}
