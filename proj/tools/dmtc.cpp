#include "dmtc/cli.hpp"

int main(int argc, char** argv) { return dmtc::run_cli(argc, argv); }
