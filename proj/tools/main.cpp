#include "cli.hpp"

int main(int argc, char** argv) { return monocurve::cli::run(argc, argv); }
