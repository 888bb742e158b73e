// mopo: sweep | analyze | fit

#include "mopo/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("MOPO_OUT_DIR");
  return env && *env ? env : ".";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mirrorless OPO entanglement simulator and estimator pipeline"};
  app.require_subcommand(1);

  const std::map<std::string, mopo::RecordFormat> formats{{"json", mopo::RecordFormat::Json},
                                                          {"csv", mopo::RecordFormat::Csv}};
  const std::map<std::string, mopo::GainModel> fit_models{{"half_cosh", mopo::GainModel::HalfCosh},
                                                          {"plain_cosh", mopo::GainModel::PlainCosh}};

  mopo::SweepOptions sweep;
  sweep.out_dir = default_out_dir();
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  auto* sw = app.add_subcommand("sweep", "Simulate a pump sweep and write fig2-5 tables plus summary.json");
  sw->add_option("--config", sweep.config_path, "JSON run configuration")->required();
  sw->add_option("--out-dir", sweep.out_dir, "Output directory (default $MOPO_OUT_DIR or .)");
  auto* seed_opt = sw->add_option("--seed", seed, "Override run.seed");
  auto* threads_opt = sw->add_option("--threads", threads, "Worker threads for cycle sampling");
  sw->add_option("--format", sweep.format, "Format of saved cycle records")
      ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));
  sw->add_flag("--save-records", sweep.save_records, "Also write records and vacuum cycle datasets");

  mopo::AnalyzeOptions analyze;
  analyze.out_dir = default_out_dir();
  auto* an = app.add_subcommand("analyze", "Re-run the estimators on stored cycle datasets");
  an->add_option("--records", analyze.records_path, "Signal cycles (.ndjson or .csv)")->required();
  an->add_option("--vacuum", analyze.vacuum_path, "Vacuum calibration cycles (.ndjson or .csv)")->required();
  an->add_option("--out-dir", analyze.out_dir, "Output directory (default $MOPO_OUT_DIR or .)");
  an->add_option("--seed", analyze.seed, "Bootstrap seed");
  an->add_option("--bootstrap", analyze.bootstrap_resamples, "Bootstrap resamples");

  mopo::FitOptions fit;
  fit.out_dir = default_out_dir();
  auto* ft = app.add_subcommand("fit", "Fit the gain curve to a fig2 table");
  ft->add_option("fig2", fit.fig2_path, "fig2.csv")->required();
  ft->add_option("--out-dir", fit.out_dir, "Output directory (default $MOPO_OUT_DIR or .)");
  ft->add_option("--model", fit.model, "Gain model")->transform(CLI::CheckedTransformer(fit_models, CLI::ignore_case));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mopo::kExitInput;
  }

  if (*sw) {
    if (*seed_opt) sweep.seed = seed;
    if (*threads_opt) sweep.threads = threads;
    return mopo::cmd_sweep(sweep, std::cerr);
  }
  if (*an) return mopo::cmd_analyze(analyze, std::cerr);
  return mopo::cmd_fit(fit, std::cerr);
}
