#include <cstdio>
#include <cstring>

#include "ifyot.h"

namespace {

int usage(std::FILE* out) {
  std::fprintf(
      out,
      "usage: ifyot <command> [args]\n"
      "\n"
      "commands:\n"
      "  run <config.json>               run an experiment config; writes\n"
      "                                  results.csv, summary.json and optional\n"
      "                                  plots/*.svg under the config's output_dir\n"
      "  validate <config.json>          check a config without running it\n"
      "  plot <results.csv> <spec.json>  render one SVG from a results table\n"
      "\n"
      "exit codes: 0 success, 2 invalid configuration, 3 I/O failure\n"
      "environment: IFYOT_THREADS caps worker threads\n");
  return out == stdout ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) return usage(stderr);
  const char* cmd = argv[1];
  if (!std::strcmp(cmd, "-h") || !std::strcmp(cmd, "--help") ||
      !std::strcmp(cmd, "help"))
    return usage(stdout);

  int code;
  if (!std::strcmp(cmd, "run") && argc == 3) {
    code = ifyot_run_config(argv[2]);
  } else if (!std::strcmp(cmd, "validate") && argc == 3) {
    code = ifyot_validate_config(argv[2]);
  } else if (!std::strcmp(cmd, "plot") && argc == 4) {
    code = ifyot_plot(argv[2], argv[3]);
  } else {
    return usage(stderr);
  }
  if (code != 0) std::fprintf(stderr, "ifyot: %s\n", ifyot_last_error());
  return code;
}
