// causal-ops <command> [scenario.json] [--seed N] [--trials N] [--out report.json] [--svg out.svg]

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "causal_ops/commands.hpp"

namespace {

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace causal_ops;
  CLI::App app{"Causal structure and measurement toolkit"};
  std::vector<std::string> positional;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string out_path, svg_path;
  app.add_option("args", positional, "command [subcommand] [scenario.json]")->required();
  app.add_option("--seed", seed, "random seed (default 1)");
  app.add_option("--trials", trials, "number of harness trials");
  app.add_option("--out", out_path, "write the JSON report here instead of stdout");
  app.add_option("--svg", svg_path, "write the rendered SVG here (render)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? exit_pass : exit_input;
  }

  std::string command = positional[0];
  std::size_t next = 1;
  if (command == "verify") {
    if (positional.size() < 2) {
      std::cerr << "error: verify needs one of bfr, hybrid, axioms, geometry\n";
      return exit_input;
    }
    command += " " + positional[1];
    next = 2;
  }
  if (positional.size() > next + 1) {
    std::cerr << "error: unexpected argument '" << positional[next + 1] << "'\n";
    return exit_input;
  }

  try {
    std::optional<Scenario> scenario;
    if (positional.size() == next + 1) scenario = load_scenario(positional[next]);
    CommandResult res = run_command(command, scenario, RunOptions{seed, trials});
    std::string report = res.report.dump(2) + "\n";
    if (out_path.empty() && !(command == "render" && svg_path.empty())) std::cout << report;
    if (!out_path.empty() && !write_file(out_path, report)) {
      std::cerr << "error: cannot write '" << out_path << "'\n";
      return exit_input;
    }
    if (command == "render") {
      if (svg_path.empty()) std::cout << res.svg;
      else if (!write_file(svg_path, res.svg)) {
        std::cerr << "error: cannot write '" << svg_path << "'\n";
        return exit_input;
      }
    }
    return res.exit_code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_input;
  }
}
