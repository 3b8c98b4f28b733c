#include <algorithm>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "cli_support.hpp"
#include "commands.hpp"
#include "ingredients/errors.hpp"
#include "ingredients/tensor.hpp"
#include "ingredients/train.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Multi-label ingredient recognition: vocabulary, data, training and analysis"};
    app.set_version_flag("--version", INGREDIENTS_VERSION);
    app.require_subcommand(1, 1);
    app.option_defaults()->always_capture_default();
    cli::Handlers handlers;
    cli::add_commands(app, handlers);

    try {
        std::vector<std::string> args = cli::expand_config({argv + 1, argv + argc}, app);
        std::reverse(args.begin(), args.end());
        try {
            app.parse(args);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? cli::kExitOk : cli::kExitUsage;
        }
        for (const CLI::App* sub : app.get_subcommands()) handlers.at(sub->get_name())();
        return cli::kExitOk;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return cli::kExitUsage;
    } catch (const ingredients::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
    } catch (const ingredients::ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
    } catch (const ingredients::TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "file error: " << e.what() << "\n";
    }
    return cli::kExitData;
}
