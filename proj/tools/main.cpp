#include "csbp/cli.hpp"

int main(int argc, char** argv) { return csbp::cli_main(argc, argv); }
