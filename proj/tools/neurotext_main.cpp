#include <ntx/cli.hpp>

int main(int argc, char** argv) {
  return ntx::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
