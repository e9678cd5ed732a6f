// Command-line front end; talks to the library only through qtube.h.

#include <qtube/qtube.h>

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::string out = "qtube-out";
  long seed = -1;
  int threads = 0;
};

struct GammaFlags {
  std::string family;
  int dim = 0;
  std::vector<std::string> eps;
};

int report(qtube_status st) {
  if (st != QTUBE_OK) std::fprintf(stderr, "error: %s\n", qtube_last_error());
  return qtube_exit_code(st);
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Config file");
  sub->add_option("--preset", c.preset, "Named preset (see `qtube presets`)");
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--seed", c.seed, "RNG seed")->check(CLI::NonNegativeNumber);
  sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
}

int run(const std::string& command, const Common& c, const GammaFlags* g) {
  if (!c.config.empty() && !c.preset.empty()) {
    std::fprintf(stderr, "error: --config and --preset are mutually exclusive\n");
    return 1;
  }
  qtube_config* cfg = nullptr;
  qtube_status st = !c.config.empty()   ? qtube_config_from_file(c.config.c_str(), &cfg)
                    : !c.preset.empty() ? qtube_config_from_preset(c.preset.c_str(), &cfg)
                                        : qtube_config_from_text("", &cfg);
  if (st != QTUBE_OK) return report(st);

  auto set = [&](const char* key, const std::string& value) {
    if (st == QTUBE_OK) st = qtube_config_set(cfg, key, value.c_str());
  };
  if (c.seed >= 0) set("study.seed", std::to_string(c.seed));
  if (c.threads > 0) set("study.threads", std::to_string(c.threads));
  if (g) {
    if (!g->family.empty()) set("gamma.family", g->family);
    if (g->dim > 0) set("gamma.dim", std::to_string(g->dim));
    if (!g->eps.empty()) {
      std::string joined;
      for (const auto& e : g->eps) joined += (joined.empty() ? "" : " ") + e;
      set("gamma.eps_list", joined);
    }
  }
  if (st == QTUBE_OK) {
    char summary[512] = {0};
    st = qtube_run(command.c_str(), cfg, c.out.c_str(), summary, sizeof summary);
    if (st == QTUBE_OK) std::printf("%s\nwrote %s\n", summary, c.out.c_str());
  }
  qtube_config_free(cfg);
  return report(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thin-tube and broken-line spectral studies"};
  app.set_version_flag("--version", std::string(qtube_version()));
  app.require_subcommand(1);

  struct Entry {
    const char* name;
    const char* help;
    Common common;
  };
  std::vector<Entry> entries = {
      {"cross-section", "Dirichlet modes and C_n of the cross section", {}},
      {"effective", "Effective 1D potential and its spectrum", {}},
      {"tube", "Thin-tube confinement or leak study", {}},
      {"broken-line", "Resonance, vertex condition and delta -> 0 scattering", {}},
      {"gamma-lab", "Finite-dimensional form-convergence checks", {}},
      {"invariants", "Structural invariants", {}},
      {"run", "Run the command named by study.command", {}},
  };
  GammaFlags gamma;
  std::vector<CLI::App*> subs;
  for (auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, e.common);
    if (std::string(e.name) == "gamma-lab") {
      sub->add_option("--family", gamma.family, "perturbation | penalization | oscillation");
      sub->add_option("--dim", gamma.dim, "Dimension")->check(CLI::PositiveNumber);
      sub->add_option("--eps-list", gamma.eps, "Decreasing eps values")->delimiter(',');
    }
    subs.push_back(sub);
  }
  auto* presets = app.add_subcommand("presets", "List named presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (presets->parsed()) {
    for (size_t i = 0; i < qtube_preset_count(); ++i) std::printf("%s\n", qtube_preset_name(i));
    return 0;
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    const std::string name = entries[i].name;
    return run(name == "run" ? "" : name, entries[i].common, name == "gamma-lab" ? &gamma : nullptr);
  }
  return 1;
}
