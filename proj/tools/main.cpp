#include "cli.hpp"

int main(int argc, char** argv) { return asymkit::cli::run(argc, argv); }
