#include "pstn/app/commands.hpp"

int main(int argc, char** argv) { return pstn::app::run_cli(argc, argv); }
