#include "gplasc/cli.hpp"

int main(int argc, char** argv) { return gplasc::run_cli(argc, argv); }
