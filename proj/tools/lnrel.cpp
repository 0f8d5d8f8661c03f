#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>

#include "lnrel/pipeline.h"

using namespace lnrel;

namespace {

int exit_code(const std::string& category) {
  static const std::map<std::string, int> codes{{"usage", 64}, {"config", 2}, {"io", 3}, {"dependency", 4}, {"data", 5}};
  const auto it = codes.find(category);
  return it == codes.end() ? 1 : it->second;
}

int fail(const std::string& category, const std::string& message) {
  std::string line = message;
  for (char& c : line) {
    if (c == '\n') c = ' ';
  }
  std::cerr << "error " << category << ": " << line << '\n';
  return exit_code(category);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lymph-node candidate classification pipeline on synthetic phantoms"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::vector<std::string> variants;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Key-value config file (default: desk profile)");
    cmd->add_option("--seed", seed, "Override phantom, split and training seeds");
    cmd->add_option("--out", out_dir, "Place dataset, checkpoints and results under this directory");
  };
  CLI::App* generate = app.add_subcommand("generate", "Generate the phantom dataset and split");
  CLI::App* train = app.add_subcommand("train", "Train one variant");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate variants on the test split");
  CLI::App* report = app.add_subcommand("report", "Print the evaluation summary table");
  CLI::App* config_cmd = app.add_subcommand("config", "Print the effective config");
  for (CLI::App* cmd : {generate, train, eval, report, config_cmd}) add_common(cmd);
  train->add_option("--variant", variants, "cnn, cnn_sp, cnn_gnn_b or cnn_gnn_p")->required()->expected(1);
  eval->add_option("--variant", variants, "Variants to evaluate (default: all four)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    PipelineConfig config = config_path.empty() ? PipelineConfig::desk() : load_config(config_path);
    if (seed != 0) override_seed(config, seed);
    if (!out_dir.empty()) override_out(config, out_dir);
    config.validate();
    const LogSink log = [](const std::string& line) { std::cout << line << std::endl; };

    if (generate->parsed()) {
      cmd_generate(config, log);
    } else if (train->parsed()) {
      cmd_train(config, parse_variant(variants.front()), log);
    } else if (eval->parsed()) {
      std::vector<Variant> list;
      for (const auto& v : variants) list.push_back(parse_variant(v));
      if (list.empty()) list = {Variant::cnn, Variant::cnn_sp, Variant::cnn_gnn_b, Variant::cnn_gnn_p};
      cmd_eval(config, list, log);
    } else if (report->parsed()) {
      std::cout << cmd_report(config);
    } else {
      std::cout << format_config(config);
    }
  } catch (const PipelineError& e) {
    return fail(e.category(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
