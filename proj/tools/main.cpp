#include "kgrobust/cli.hpp"

int main(int argc, char** argv) { return kgrobust::cli_main(argc, argv); }
