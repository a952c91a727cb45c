#include "cli.hpp"

int main(int argc, char** argv) { return ccml::cli::run(argc, argv); }
