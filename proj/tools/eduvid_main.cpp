#include "eduvid/cli.hpp"

int main(int argc, char** argv) { return eduvid::cli::run({argv + 1, argv + argc}); }
