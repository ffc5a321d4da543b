#include "stpca/cli.hpp"

int main(int argc, char** argv) { return stpca::run_cli(argc, argv); }
