#include "lsc/cli.hpp"

int main(int argc, char** argv) { return lsc::cli_main(argc, argv); }
