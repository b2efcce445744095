#include "stwind/cli.hpp"

int main(int argc, char** argv) { return stwind::cli::run(argc, argv); }
