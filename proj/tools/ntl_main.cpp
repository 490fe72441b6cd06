#include "ntl/cli.hpp"

int main(int argc, char** argv) { return ntl::cli::run(argc, argv); }
