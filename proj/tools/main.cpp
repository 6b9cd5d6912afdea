#include "cli.hpp"

int main(int argc, char** argv) { return crossrec::cli::run(argc, argv); }
