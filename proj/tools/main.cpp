#include "fundcat/cli.hpp"

int main(int argc, char** argv) { return fundcat::cli::run(argc, argv); }
