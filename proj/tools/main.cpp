#include <iostream>

#include "sunimodal/cli.hpp"

int main(int argc, char** argv)
{
    int code = 0;
    auto cfg = sunimodal::parse_args(argc, argv, code);
    if (!cfg) return code;
    sunimodal::RunResult r = sunimodal::run(*cfg);
    (r.status == 1 ? std::cerr : std::cout) << cfg->command << ": " << r.finding << '\n';
    return r.status;
}
