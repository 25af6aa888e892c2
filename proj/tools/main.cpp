#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "rwcre_runner.hpp"

namespace lab = rwcre::lab;

int main(int argc, char** argv) {
  CLI::App app{"Monte-Carlo lab for random walks in cooling random environments"};
  app.require_subcommand(1);

  std::string config_path;
  unsigned workers = 0;
  std::string out_dir = ".";
  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "config JSON file")->required();
  run->add_option("--workers", workers, "worker threads (default: RWCRE_WORKERS or all cores)");
  run->add_option("--out", out_dir, "output directory");

  std::string preset_name;
  bool emit = false;
  std::string emit_path;
  auto* preset = app.add_subcommand("preset", "emit a built-in scenario as a config");
  preset->add_option("name", preset_name, "preset name, e.g. poly(2,1.5)")->required();
  preset->add_flag("--emit", emit, "print the config JSON");
  preset->add_option("--out", emit_path, "write the config to this file instead of stdout");

  auto* presets = app.add_subcommand("presets", "list built-in presets");
  auto* version = app.add_subcommand("version", "print the library version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : lab::kConfigError;
  }

  if (*version) {
    std::cout << lab::kVersion << '\n';
    return lab::kOk;
  }
  if (*presets) {
    for (const auto& p : lab::list_presets()) std::cout << p.name << "\t" << p.description << '\n';
    return lab::kOk;
  }
  if (*preset) {
    lab::json cfg;
    try {
      cfg = lab::preset_config(preset_name);
    } catch (const rwcre::ConfigError& e) {
      std::cerr << "config error at " << e.what() << '\n';
      return lab::kConfigError;
    }
    if (!emit && emit_path.empty()) {
      std::cerr << "nothing to do: pass --emit or --out FILE\n";
      return lab::kConfigError;
    }
    if (!emit_path.empty()) {
      std::ofstream out(emit_path);
      out << cfg.dump(2) << '\n';
      if (!out) {
        std::cerr << "cannot write " << emit_path << '\n';
        return lab::kRuntimeError;
      }
    } else {
      std::cout << cfg.dump(2) << '\n';
    }
    return lab::kOk;
  }
  const auto outcome = lab::run_config_file(config_path, workers, out_dir);
  if (outcome.code != lab::kOk) {
    std::cerr << outcome.message << '\n';
    return outcome.code;
  }
  for (const auto& f : outcome.files) std::cout << f.string() << '\n';
  return lab::kOk;
}
