#include "geomap/evalcli.hpp"

int main(int argc, char** argv) { return geomap::evalcli::run_cli(argc, argv); }
