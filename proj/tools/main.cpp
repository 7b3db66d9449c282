#include "cli.hpp"

int main(int argc, char** argv) { return frnet::cli::run(argc, argv); }
