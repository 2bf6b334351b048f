#include "fgfm/cli.hpp"

int main(int argc, char** argv) { return fgfm::run_cli(argc, argv); }
