#include "defemo/cli.hpp"

int main(int argc, char** argv) { return defemo::run_cli(argc, argv); }
