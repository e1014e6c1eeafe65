// csip: generate channels, train, ablate, benchmark and report.

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "csip/csip.h"

namespace {

struct ConfigDeleter {
  void operator()(csip_config* c) const { csip_config_free(c); }
};
using ConfigPtr = std::unique_ptr<csip_config, ConfigDeleter>;

void print_line(const char* text, void*) { std::fprintf(stderr, "%s\n", text); }
void print_out(const char* text, void*) { std::fputs(text, stdout); }
void print_file(const char* text, void*) { std::printf("wrote %s\n", text); }

bool check(csip_status s, const char* what) {
  if (s == CSIP_OK) return true;
  std::fprintf(stderr, "csip: %s failed (%s): %s\n", what, csip_status_name(s), csip_last_error());
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSI predictor: channel simulation, training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", csip_version());

  std::string profile = "desk";
  std::string config_path;
  std::string out_dir;
  std::string variants;
  std::size_t seeds = 0;
  app.add_option("--profile", profile, "Base hyperparameter profile")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  app.add_option("--config", config_path, "JSON config applied on top of the profile")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seeds", seeds, "Number of training seeds")->check(CLI::PositiveNumber);
  app.add_option("--variant", variants, "Comma-separated variant names");

  auto* gen = app.add_subcommand("generate", "Simulate and store channel trajectories");
  auto* train = app.add_subcommand("train", "Train the configured variants and evaluate on test scenarios");
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every ablation variant");
  auto* bench = app.add_subcommand("bench", "Measure parameters, GFLOPs and throughput");
  auto* report = app.add_subcommand("report", "Merge run reports into report.csv and summary.csv");
  app.add_subcommand("variants", "List registered variants");
  bool show_config = false;
  app.add_flag("--show-config", show_config, "Print the effective config and continue");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors share the config-error exit code; --help and --version exit 0.
    return app.exit(e) == 0 ? 0 : 2;
  }

  csip_config* raw = nullptr;
  if (!check(csip_config_from_profile(profile.c_str(), &raw), "loading profile")) return 2;
  ConfigPtr cfg(raw);
  if (!config_path.empty()) {
    if (!check(csip_config_load(config_path.c_str(), cfg.get(), &raw), "loading config")) return 2;
    cfg.reset(raw);
  }
  if (!out_dir.empty() && !check(csip_config_set_out_dir(cfg.get(), out_dir.c_str()), "--out")) return 2;
  if (seeds > 0 && !check(csip_config_set_seeds(cfg.get(), seeds), "--seeds")) return 2;
  if (!variants.empty() && !check(csip_config_set_variants(cfg.get(), variants.c_str()), "--variant")) return 2;
  if (!check(csip_config_validate(cfg.get()), "validating config")) return 2;

  if (show_config) {
    std::size_t needed = 0;
    csip_config_render(cfg.get(), nullptr, 0, &needed);
    std::string text(needed, '\0');
    if (!check(csip_config_render(cfg.get(), text.data(), text.size(), &needed), "rendering config")) return 2;
    std::fputs(text.c_str(), stderr);
  }

  if (app.got_subcommand("variants")) {
    for (std::size_t i = 0; i < csip_variant_count(); ++i) std::printf("%s\n", csip_variant_name(i));
    return 0;
  }

  csip_status s = CSIP_OK;
  const char* what = "";
  if (gen->parsed()) {
    what = "generate";
    s = csip_cmd_generate(cfg.get(), print_line, print_file, nullptr);
  } else if (train->parsed()) {
    what = "train";
    s = csip_cmd_train(cfg.get(), print_line, print_file, nullptr);
  } else if (ablate->parsed()) {
    what = "ablate";
    s = csip_cmd_ablate(cfg.get(), print_line, print_file, nullptr);
  } else if (bench->parsed()) {
    what = "bench";
    s = csip_cmd_bench(cfg.get(), print_line, print_file, nullptr);
  } else if (report->parsed()) {
    what = "report";
    s = csip_cmd_report(cfg.get(), print_line, print_out, nullptr);
  }
  return check(s, what) ? 0 : 1;
}
