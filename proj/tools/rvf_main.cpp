#include "rvf/cli.hpp"

int main(int argc, char** argv) { return rvf::cli_main(argc, argv); }
