#include "cli.hpp"

int main(int argc, char** argv) { return dn::cli::run(argc, argv); }
