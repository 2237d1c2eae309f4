// Regenerates the bundled synthetic corpus: make_corpus <output-dir>
#include <iostream>

#include "synth.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_corpus <output-dir>\n";
        return 1;
    }
    eduvid::testing::write_corpus(argv[1]);
    return 0;
}
