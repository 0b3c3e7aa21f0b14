#include "cli.hpp"

int main(int argc, char** argv) { return idstr::cli::run(argc, argv); }
