#include "slfm/cli.hpp"

int main(int argc, char** argv) { return slfm::run_cli(argc, argv); }
