#include "nprt/cli.hpp"

int main(int argc, char** argv) { return nprt::cli_main(argc, argv); }
