#include "cli.hpp"

int main(int argc, char** argv) { return panoptix::cli_main(argc, argv); }
