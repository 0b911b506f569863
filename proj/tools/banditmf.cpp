// banditmf command-line tool.

#include "banditmf/cli.hpp"

int main(int argc, char** argv) { return banditmf::cli::run(argc, argv); }
