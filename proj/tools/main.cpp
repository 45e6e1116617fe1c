#include "gns/cli.hpp"

int main(int argc, char** argv) { return gns::run_cli(argc, argv); }
