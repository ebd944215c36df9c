#include "signidd/cli.hpp"

int main(int argc, char** argv) { return signidd::cli_main(argc, argv); }
