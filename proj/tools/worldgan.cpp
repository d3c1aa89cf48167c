#include "worldgan/cli.hpp"

int main(int argc, char** argv) { return worldgan::cli::run(argc, argv); }
