#include <CLI11.hpp>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wcto/config.hpp"
#include "wcto/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"worst-case robust topology optimization"};
  std::string config_path, preset, sweep_spec, continuation_spec, out_dir, seed;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--preset", preset, "benchmark preset (cantilever)");
  app.add_option("--set", sets, "override one config key, e.g. --set V=0.4")
      ->take_all();
  app.add_option("--sweep", sweep_spec, "budget sweep, e.g. D=0.03,0.06,0.10");
  app.add_option("--continuation", continuation_spec,
                 "RAMP continuation steps, e.g. steps=10");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "seed echoed into run metadata");
  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<std::string> overrides;
    if (!preset.empty()) overrides.push_back("preset=" + preset);
    for (const std::string& kv : sets) overrides.push_back(kv);
    if (!sweep_spec.empty()) {
      std::string v = sweep_spec;
      if (v.rfind("D=", 0) == 0) v = v.substr(2);
      overrides.push_back("sweep=" + v);
    }
    if (!continuation_spec.empty()) {
      std::string v = continuation_spec;
      if (v.rfind("steps=", 0) == 0) v = v.substr(6);
      overrides.push_back("continuation_steps=" + v);
    }
    if (!out_dir.empty()) overrides.push_back("out_dir=" + out_dir);
    if (!seed.empty()) overrides.push_back("seed=" + seed);

    const wcto::RunConfig cfg =
        config_path.empty() ? wcto::parse_config("", overrides)
                            : wcto::parse_config_file(config_path, overrides);
    return wcto::run(cfg);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}
