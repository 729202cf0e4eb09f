#include "vfluct/cli.hpp"

int main(int argc, char** argv) { return vfluct::run_cli(argc, argv); }
