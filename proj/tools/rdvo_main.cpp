#include "rdvo/cli.hpp"

int main(int argc, char** argv) { return rdvo::cli_main(argc, argv); }
