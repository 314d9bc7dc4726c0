#include "cot/cli.hpp"

int main(int argc, char** argv) { return cot::cli::run(argc, argv); }
