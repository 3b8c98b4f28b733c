#ifndef INGREDIENTS_TOOLS_COMMANDS_HPP
#define INGREDIENTS_TOOLS_COMMANDS_HPP

#include <functional>
#include <map>
#include <string>

#include <CLI11.hpp>

namespace cli {

/// Subcommand name -> action, run after a successful parse.
using Handlers = std::map<std::string, std::function<void()>>;

void add_commands(CLI::App& app, Handlers& handlers);

}  // namespace cli

#endif  // INGREDIENTS_TOOLS_COMMANDS_HPP
