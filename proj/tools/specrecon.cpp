// specrecon <command> --config <path> [--set key=value]... [--out dir]

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "specrecon/experiment.hpp"

int main(int argc, char** argv) {
  using namespace specrecon;
  CLI::App app{"Sample-to-population covariance spectrum experiments"};
  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  app.add_option("command", command, "simulate | reconstruct | validate | scaling | mp-compare | insert")
      ->required();
  app.add_option("--config", config_path, "flat key = value config file (defaults when omitted)");
  app.add_option("--set", overrides, "override one config key, key=value")->take_all();
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code::kConfig;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw Error(ErrorKind::Io, "cannot read config " + config_path);
      std::ostringstream text;
      text << in.rdbuf();
      cfg = parse_config(text.str());
    }
    cfg.command = parse_command(command);
    for (const auto& o : overrides) apply_override(cfg, o);
    if (!out_dir.empty()) cfg.output_dir = out_dir;

    const auto result = run_experiment(cfg);
    std::cout << result.summary["result"].dump(2) << '\n';
    for (const auto& f : result.files) std::cerr << "wrote " << (result.output_dir / f).string() << '\n';
    return result.exit_code;
  } catch (const Error& e) {
    std::cerr << "specrecon: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "specrecon: " << e.what() << '\n';
    return exit_code::kNumeric;
  }
}
