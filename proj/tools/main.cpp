#include "evolvex/cli.hpp"

int main(int argc, char** argv) { return evolvex::cli::run(argc, argv); }
