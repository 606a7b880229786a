// Writes the synthetic mini-city inputs and a config.ini.
//
//   make_mini_city <dir> [--seed N] [--bootstrap B] [--no-gwr]

#include "support/mini_city.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Write the mini-city fixture"};
    std::string dir;
    std::string diabetes = std::string(GREENEXP_SOURCE_DIR) + "/data/conditions/diabetes.csv";
    std::uint64_t seed = 1;
    greenexp::testing::MiniCityFiles opt;
    bool no_gwr = false;
    app.add_option("dir", dir, "output directory")->required();
    app.add_option("--seed", seed, "generator seed");
    app.add_option("--bootstrap", opt.bootstrap, "bootstrap replicates in the config");
    app.add_option("--run-seed", opt.seed, "pipeline seed in the config");
    app.add_option("--diabetes", diabetes, "diabetes BNF list")->check(CLI::ExistingFile);
    app.add_flag("--no-gwr", no_gwr, "disable GWR in the config");
    CLI11_PARSE(app, argc, argv);
    opt.gwr = !no_gwr;
    const auto city = greenexp::testing::make_mini_city(seed, greenexp::testing::diabetes_codes(diabetes));
    std::cout << greenexp::testing::write_mini_city(city, dir, diabetes, opt).string() << "\n";
    return 0;
}
