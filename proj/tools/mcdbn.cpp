#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mcdbn/checkpoint.hpp"
#include "mcdbn/config.hpp"
#include "mcdbn/eval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(const std::string& category) {
  if (category == "usage" || category == "config") return 1;
  if (category == "numeric") return 3;
  return 2;  // data, shape, domain, checkpoint
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw mcdbn::DataError("cannot open '" + path.string() + "' for writing");
  file << text;
  if (!file) throw mcdbn::DataError("failed writing '" + path.string() + "'");
}

json metrics_to_json(const mcdbn::Metrics& m) {
  return json{{"rmse", m.rmse},
              {"mape", m.mape},
              {"mape_excluded", m.mape_excluded},
              {"f1", m.f1},
              {"accuracy", m.accuracy},
              {"completion_rmse", m.completion_rmse},
              {"n_samples", m.n_samples},
              {"seed", m.seed},
              {"config_hash", m.config_hash}};
}

std::string csv_num(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

void append_metrics_csv_rows(std::ostringstream& out, const std::string& label,
                             const mcdbn::MethodResult& result) {
  for (std::size_t i = 0; i < result.per_instrument.size(); ++i) {
    const mcdbn::Metrics& m = result.per_instrument[i];
    out << label << ',' << i << ',' << csv_num(m.rmse) << ',' << csv_num(m.mape) << ','
        << m.mape_excluded << ',' << csv_num(m.f1) << ',' << csv_num(m.accuracy) << ','
        << csv_num(m.completion_rmse) << ',' << m.n_samples << '\n';
  }
  const mcdbn::Metrics& m = result.mean;
  out << label << ",mean," << csv_num(m.rmse) << ',' << csv_num(m.mape) << ','
      << m.mape_excluded << ',' << csv_num(m.f1) << ',' << csv_num(m.accuracy) << ','
      << csv_num(m.completion_rmse) << ',' << m.n_samples << '\n';
}

json method_to_json(const mcdbn::MethodResult& result) {
  json per = json::array();
  for (const mcdbn::Metrics& m : result.per_instrument) per.push_back(metrics_to_json(m));
  return json{{"method", result.method}, {"mean", metrics_to_json(result.mean)},
              {"per_instrument", per}};
}

// Config sources: explicit CSV paths win; otherwise instrument 0 of the
// synthetic corpus with the configured gaps, exactly as the benchmark sees it.
void source_datasets(const mcdbn::Config& cfg, mcdbn::AlignedDataset& observed,
                     mcdbn::AlignedDataset& truth) {
  if (!cfg.x_csv.empty()) {
    observed = mcdbn::load_dataset(cfg.x_csv, cfg.y_csv);
    if (!cfg.labels_csv.empty()) {
      observed.labels_onehot =
          mcdbn::load_labels_csv(cfg.labels_csv, cfg.train.shape.classes);
    }
    truth = observed;  // no held-back values: recovery error reads as 0
    return;
  }
  std::vector<mcdbn::AlignedDataset> all = mcdbn::synth_generate(cfg.synth);
  truth = all.front();
  mcdbn::Rng miss_rng(
      mcdbn::derive_seed(cfg.missing.seed, mcdbn::rng_stream::kMissingnessBase));
  observed = mcdbn::apply_missingness(truth, cfg.missing, miss_rng);
}

int run_synth(const std::string& config_path, const std::string& out_dir,
              long long seed_flag) {
  mcdbn::Config cfg = mcdbn::load_config(config_path);
  mcdbn::resolve_seed(cfg, seed_flag);
  fs::create_directories(out_dir);

  const std::vector<mcdbn::AlignedDataset> datasets = mcdbn::synth_generate(cfg.synth);
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const std::string n = std::to_string(i);
    mcdbn::Rng miss_rng(mcdbn::derive_seed(
        cfg.missing.seed, mcdbn::rng_stream::kMissingnessBase + i));
    const mcdbn::AlignedDataset observed =
        mcdbn::apply_missingness(datasets[i], cfg.missing, miss_rng);
    const fs::path dir(out_dir);
    mcdbn::save_modalities_csv((dir / ("x_" + n + ".csv")).string(),
                               (dir / ("y_" + n + ".csv")).string(), observed);
    mcdbn::save_modalities_csv((dir / ("x_truth_" + n + ".csv")).string(),
                               (dir / ("y_truth_" + n + ".csv")).string(), datasets[i]);
    mcdbn::save_labels_csv((dir / ("labels_" + n + ".csv")).string(), datasets[i]);
  }
  std::cout << "wrote " << datasets.size() << " instruments to " << out_dir << "\n";
  return 0;
}

int run_impute(const std::string& in_dir, const std::string& out_dir,
               const std::string& method, const std::string& model_path,
               long long seed_flag) {
  if (method.empty() == model_path.empty())
    throw mcdbn::UsageError("impute needs exactly one of --method or --model");
  mcdbn::Config seeds;  // defaults; only the seed matters here
  mcdbn::resolve_seed(seeds, seed_flag);
  fs::create_directories(out_dir);

  mcdbn::McdbnModel model;
  if (!model_path.empty()) model = mcdbn::load_checkpoint(model_path);

  int written = 0;
  for (int i = 0;; ++i) {
    const std::string n = std::to_string(i);
    const fs::path x_path = fs::path(in_dir) / ("x_" + n + ".csv");
    const fs::path y_path = fs::path(in_dir) / ("y_" + n + ".csv");
    if (!fs::exists(x_path)) break;
    if (!fs::exists(y_path))
      throw mcdbn::DataError("found " + x_path.string() + " without matching y_" + n +
                             ".csv");
    const mcdbn::AlignedDataset data =
        mcdbn::load_dataset(x_path.string(), y_path.string());
    mcdbn::AlignedDataset completed;
    if (!model_path.empty()) {
      completed = mcdbn::complete_with_model(model, data, seeds.train.seed);
    } else {
      mcdbn::ImputeResult result =
          mcdbn::impute_baseline(data, mcdbn::impute_method_from_string(method));
      for (const std::string& warning : result.warnings)
        std::cerr << "warning: " << warning << "\n";
      completed = std::move(result.data);
    }
    mcdbn::save_modalities_csv((fs::path(out_dir) / ("x_" + n + ".csv")).string(),
                               (fs::path(out_dir) / ("y_" + n + ".csv")).string(),
                               completed);
    ++written;
  }
  if (written == 0)
    throw mcdbn::DataError("no x_0.csv in '" + in_dir + "'; nothing to impute");
  std::cout << "imputed " << written << " dataset(s) into " << out_dir << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& out_dir,
              long long seed_flag) {
  mcdbn::Config cfg = mcdbn::load_config(config_path);
  mcdbn::resolve_seed(cfg, seed_flag);
  fs::create_directories(out_dir);

  mcdbn::AlignedDataset observed, truth;
  source_datasets(cfg, observed, truth);

  std::vector<mcdbn::TraceRow> trace;
  const mcdbn::McdbnModel model = mcdbn::train_on_dataset(observed, cfg.train, &trace);
  for (const mcdbn::TraceRow& row : trace) {
    std::cout << "epoch " << row.epoch << " total " << csv_num(row.total) << " modal_x "
              << csv_num(row.modal_x) << " modal_y " << csv_num(row.modal_y) << " task "
              << csv_num(row.task) << "\n";
  }

  const fs::path dir(out_dir);
  mcdbn::save_checkpoint((dir / "model.ckpt").string(), model);
  mcdbn::write_trace_csv((dir / "trace.csv").string(), trace);
  std::cout << "saved " << (dir / "model.ckpt").string() << "\n";
  return 0;
}

int run_evaluate(const std::string& config_path, const std::string& out_dir,
                 const std::string& model_path, int threads, long long seed_flag) {
  mcdbn::Config cfg = mcdbn::load_config(config_path);
  mcdbn::resolve_seed(cfg, seed_flag);
  fs::create_directories(out_dir);

  mcdbn::BenchmarkTable table;
  if (!model_path.empty()) {
    const mcdbn::McdbnModel model = mcdbn::load_checkpoint(model_path);
    mcdbn::AlignedDataset observed, truth;
    source_datasets(cfg, observed, truth);
    const mcdbn::AlignedDataset completed =
        mcdbn::complete_with_model(model, observed, cfg.train.seed);
    const mcdbn::Metrics m = mcdbn::score_completed_dataset(completed, truth, observed,
                                                            cfg.train, cfg.config_hash);
    table.methods.push_back(mcdbn::MethodResult{"mcdbn", {m}, m});
  } else {
    table = mcdbn::benchmark_run(cfg.methods, cfg.synth, cfg.train, cfg.missing, threads,
                                 cfg.config_hash);
  }

  json doc{{"seed", cfg.train.seed}, {"config_hash", cfg.config_hash}};
  doc["methods"] = json::array();
  std::ostringstream csv;
  csv << "method,instrument,rmse,mape,mape_excluded,f1,accuracy,completion_rmse,"
         "n_samples\n";
  for (const mcdbn::MethodResult& result : table.methods) {
    doc["methods"].push_back(method_to_json(result));
    append_metrics_csv_rows(csv, result.method, result);
  }
  const fs::path dir(out_dir);
  write_text(dir / "metrics.json", doc.dump(2) + "\n");
  write_text(dir / "metrics.csv", csv.str());

  for (const mcdbn::MethodResult& result : table.methods) {
    std::cout << result.method << " rmse " << csv_num(result.mean.rmse) << " mape "
              << csv_num(result.mean.mape) << " f1 " << csv_num(result.mean.f1)
              << " accuracy " << csv_num(result.mean.accuracy) << " completion_rmse "
              << csv_num(result.mean.completion_rmse) << "\n";
  }
  std::cout << "wrote " << (dir / "metrics.json").string() << "\n";
  return 0;
}

int run_ablate(const std::string& config_path, const std::string& out_dir,
               const std::string& which, int threads, long long seed_flag) {
  mcdbn::Config cfg = mcdbn::load_config(config_path);
  mcdbn::resolve_seed(cfg, seed_flag);
  fs::create_directories(out_dir);

  struct Row {
    std::string label;
    mcdbn::TrainConfig train;
  };
  std::vector<Row> rows;
  if (which == "loss") {
    mcdbn::TrainConfig both = cfg.train, only_x = cfg.train, only_y = cfg.train;
    both.switches = {true, true};
    only_x.switches = {true, false};
    only_y.switches = {false, true};
    rows = {{"modal_x+modal_y", both}, {"only_modal_x", only_x},
            {"only_modal_y", only_y}};
  } else {
    auto with_decoders = [&](mcdbn::DecoderKind x, mcdbn::DecoderKind y) {
      mcdbn::TrainConfig tc = cfg.train;
      tc.shape.decoder_x = x;
      tc.shape.decoder_y = y;
      return tc;
    };
    rows = {{"Both Linear",
             with_decoders(mcdbn::DecoderKind::kLinear, mcdbn::DecoderKind::kLinear)},
            {"Only Transformer", with_decoders(mcdbn::DecoderKind::kTransformer,
                                               mcdbn::DecoderKind::kTransformer)},
            {"Only LSTM",
             with_decoders(mcdbn::DecoderKind::kLstm, mcdbn::DecoderKind::kLstm)},
            {"LSTM + Transformer", with_decoders(mcdbn::DecoderKind::kTransformer,
                                                 mcdbn::DecoderKind::kLstm)}};
  }

  json doc{{"seed", cfg.train.seed}, {"config_hash", cfg.config_hash}, {"which", which}};
  doc["rows"] = json::array();
  std::ostringstream csv;
  csv << "label,instrument,rmse,mape,mape_excluded,f1,accuracy,completion_rmse,"
         "n_samples\n";
  for (const Row& row : rows) {
    const mcdbn::BenchmarkTable table = mcdbn::benchmark_run(
        {"mcdbn"}, cfg.synth, row.train, cfg.missing, threads, cfg.config_hash);
    const mcdbn::MethodResult& result = table.methods.front();
    json entry = method_to_json(result);
    entry.erase("method");
    entry["label"] = row.label;
    doc["rows"].push_back(entry);
    append_metrics_csv_rows(csv, row.label, result);
    std::cout << row.label << " completion_rmse " << csv_num(result.mean.completion_rmse)
              << " rmse " << csv_num(result.mean.rmse) << " f1 "
              << csv_num(result.mean.f1) << "\n";
  }
  const fs::path dir(out_dir);
  write_text(dir / "ablation.json", doc.dump(2) + "\n");
  write_text(dir / "ablation.csv", csv.str());
  std::cout << "wrote " << (dir / "ablation.json").string() << "\n";
  return 0;
}

int run_gradcheck(long long seed_flag) {
  mcdbn::Config seeds;
  mcdbn::resolve_seed(seeds, seed_flag);
  const std::vector<mcdbn::GradientReport> reports =
      mcdbn::gradient_suite(seeds.train.seed);
  double worst = 0.0;
  for (const mcdbn::GradientReport& report : reports) {
    std::cout << std::left << std::setw(24) << report.name << std::scientific
              << std::setprecision(3) << report.max_rel_error << "\n";
    worst = std::max(worst, report.max_rel_error);
  }
  std::cout << std::left << std::setw(24) << "max" << std::scientific
            << std::setprecision(3) << worst << "\n";
  if (worst > 1e-4) {
    std::cerr << "ERROR:numeric:gradient check failed, max relative error " << worst
              << " > 1e-4\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal completion pipeline: latent-code imputation, decoding, "
               "fusion, and benchmark reporting"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", in_dir, method, model_path, which;
  long long seed_flag = -1;
  int threads = 1;

  CLI::App* synth = app.add_subcommand("synth", "Generate synthetic benchmark CSVs");
  synth->add_option("--config", config_path, "JSON config file")->required();
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--seed", seed_flag, "Override the config seed");

  CLI::App* impute = app.add_subcommand("impute", "Fill gaps in CSV datasets");
  impute->add_option("--in", in_dir, "Directory with x_<i>.csv / y_<i>.csv")->required();
  impute->add_option("--out", out_dir, "Output directory")->required();
  impute->add_option("--method", method, "zero|locf|nocb|mean|interp|rolling");
  impute->add_option("--model", model_path, "Trained checkpoint to impute with");
  impute->add_option("--seed", seed_flag, "Seed for model-based completion");

  CLI::App* train = app.add_subcommand("train", "Pretrain + fine-tune one model");
  train->add_option("--config", config_path, "JSON config file")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--seed", seed_flag, "Override the config seed");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Run the benchmark table");
  evaluate->add_option("--config", config_path, "JSON config file")->required();
  evaluate->add_option("--out", out_dir, "Output directory")->required();
  evaluate->add_option("--model", model_path, "Score this checkpoint instead");
  evaluate->add_option("--threads", threads, "Instrument-level workers")
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", seed_flag, "Override the config seed");

  CLI::App* ablate = app.add_subcommand("ablate", "Loss / decoder ablation grids");
  ablate->add_option("--config", config_path, "JSON config file")->required();
  ablate->add_option("--out", out_dir, "Output directory")->required();
  ablate->add_option("--which", which, "loss|decoder")
      ->required()
      ->check(CLI::IsMember({"loss", "decoder"}));
  ablate->add_option("--threads", threads, "Instrument-level workers")
      ->check(CLI::PositiveNumber);
  ablate->add_option("--seed", seed_flag, "Override the config seed");

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference audit of all gradients");
  gradcheck->add_option("--seed", seed_flag, "Override the default seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR:usage:" << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (synth->parsed()) return run_synth(config_path, out_dir, seed_flag);
    if (impute->parsed())
      return run_impute(in_dir, out_dir, method, model_path, seed_flag);
    if (train->parsed()) return run_train(config_path, out_dir, seed_flag);
    if (evaluate->parsed())
      return run_evaluate(config_path, out_dir, model_path, threads, seed_flag);
    if (ablate->parsed())
      return run_ablate(config_path, out_dir, which, threads, seed_flag);
    if (gradcheck->parsed()) return run_gradcheck(seed_flag);
    std::cerr << "ERROR:usage:no subcommand\n" << app.help();
    return 1;
  } catch (const mcdbn::Error& e) {
    std::cerr << "ERROR:" << e.category() << ":" << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "ERROR:internal:" << e.what() << "\n";
    return 2;
  }
}
