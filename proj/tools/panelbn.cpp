#include <iostream>
#include <string>
#include <vector>

#include <panelbn/cli.hpp>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return panelbn::cli::run(args, std::cout, std::cerr);
}
