#include "kickns_app/app.hpp"

#include <iostream>

int main(int argc, char** argv) { return kickns::app::main(argc, argv, std::cout, std::cerr); }
