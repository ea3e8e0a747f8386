#include "geoflow/cli.hpp"

int main(int argc, char** argv) { return geoflow::run_cli(std::vector<std::string>(argv + 1, argv + argc)); }
