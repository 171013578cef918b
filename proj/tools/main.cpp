#include "acipf/cli.hpp"

int main(int argc, char** argv) { return acipf::cli_main(argc, argv); }
