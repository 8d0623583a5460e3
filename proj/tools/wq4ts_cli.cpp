// Command-line front end. Talks to the library only through the C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "wq4ts/wq4ts.h"

namespace {

// 1 config / argument, 2 data / io / format, 3 numeric, 4 internal.
int exit_code(wq4ts_status s) {
  switch (s) {
    case WQ4TS_OK: return 0;
    case WQ4TS_INVALID_ARGUMENT:
    case WQ4TS_CONFIG: return 1;
    case WQ4TS_IO:
    case WQ4TS_FORMAT:
    case WQ4TS_DATA: return 2;
    case WQ4TS_NUMERIC: return 3;
    case WQ4TS_INTERNAL: return 4;
  }
  return 4;
}

int report(const std::string& type, const std::string& message, int code) {
  nlohmann::json err = {{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}};
  std::cerr << err.dump() << std::endl;
  return code;
}

int report_status(wq4ts_status s) {
  return report(wq4ts_last_error_type(), wq4ts_last_error(), exit_code(s));
}

struct WavebookFree {
  void operator()(wq4ts_wavebook* b) const { wq4ts_wavebook_free(b); }
};
using WavebookHandle = std::unique_ptr<wq4ts_wavebook, WavebookFree>;

int build_wavebook(const std::string& filter, int m, int lambda, const std::string& out) {
  wq4ts_wavebook* raw = nullptr;
  if (auto s = wq4ts_wavebook_build(filter.c_str(), m, lambda, &raw); s != WQ4TS_OK) return report_status(s);
  WavebookHandle book(raw);
  if (auto s = wq4ts_wavebook_save(book.get(), out.c_str()); s != WQ4TS_OK) return report_status(s);
  wq4ts_wavebook_info info{};
  wq4ts_wavebook_info_get(book.get(), &info);
  nlohmann::json summary = {{"out", out},
                            {"filter", filter},
                            {"m", info.m},
                            {"lambda", info.lambda},
                            {"f_c", info.f_c},
                            {"max_basis_length", info.max_basis_length}};
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

int tokenize(const std::string& wavebook, const std::string& input, const std::string& out,
             const std::string& format, bool fft) {
  wq4ts_wavebook* raw = nullptr;
  if (auto s = wq4ts_wavebook_load(wavebook.c_str(), &raw); s != WQ4TS_OK) return report_status(s);
  WavebookHandle book(raw);
  double* values = nullptr;
  size_t n = 0;
  if (auto s = wq4ts_read_series_csv(input.c_str(), &values, &n); s != WQ4TS_OK) return report_status(s);
  const auto s = wq4ts_tokenize_to_file(book.get(), values, n, fft ? 1 : 0, format.c_str(), out.c_str());
  wq4ts_free(values);
  if (s != WQ4TS_OK) return report_status(s);
  wq4ts_wavebook_info info{};
  wq4ts_wavebook_info_get(book.get(), &info);
  nlohmann::json summary = {{"out", out}, {"format", format}, {"lambda", info.lambda}, {"length", n}};
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

int run(const std::string& command, const std::string& config, std::vector<std::string> sets, bool dry_run) {
  std::vector<const char*> ptrs;
  for (const auto& s : sets) ptrs.push_back(s.c_str());
  char* summary = nullptr;
  const auto s = wq4ts_run(command.c_str(), config.empty() ? nullptr : config.c_str(), ptrs.data(), ptrs.size(),
                           dry_run ? 1 : 0, &summary);
  if (s != WQ4TS_OK) return report_status(s);
  std::cout << summary << std::endl;
  wq4ts_string_free(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wave-quantized time-series tokenization and transformer training"};
  app.set_version_flag("--version", std::string(wq4ts_version()));
  app.require_subcommand(1);

  std::string filter = "db2", wb_out;
  int m = 8, lambda = 100;
  auto* build = app.add_subcommand("build-wavebook", "Build a wavelet basis set and save it");
  build->add_option("--filter", filter, "haar, db2 or file:<path>")->capture_default_str();
  build->add_option("--m", m, "Cascade depth; the mother wavelet has 2^m points")->capture_default_str();
  build->add_option("--lambda", lambda, "Number of bases")->capture_default_str();
  build->add_option("--out", wb_out, "Output .wqbk path")->required();

  std::string tk_book, tk_input, tk_out, tk_format = "binary";
  bool tk_fft = false;
  auto* tok = app.add_subcommand("tokenize", "Tokenize a single-column CSV series");
  tok->add_option("--wavebook", tk_book, "Wavebook file")->required();
  tok->add_option("--input", tk_input, "Single-column CSV")->required();
  tok->add_option("--out", tk_out, "Output path")->required();
  tok->add_option("--format", tk_format, "binary or csv")
      ->check(CLI::IsMember({"binary", "csv"}))
      ->capture_default_str();
  tok->add_flag("--fft", tk_fft, "Convolve in the frequency domain");

  struct RunArgs {
    std::string config;
    std::vector<std::string> sets;
    bool dry_run = false;
  };
  RunArgs pre, fin, eva;
  double fewshot = 0.0;
  auto add_run = [&](const char* name, const char* help, RunArgs& args) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", args.config, "JSON run config");
    sub->add_option("--set", args.sets, "Override, key.path=value (repeatable)")->allow_extra_args(false);
    sub->add_flag("--dry-run", args.dry_run, "Validate and print the plan without touching files");
    return sub;
  };
  auto* pretrain = add_run("pretrain", "Train on one or more domains", pre);
  auto* finetune = add_run("finetune", "Fine-tune a checkpoint on a target domain", fin);
  finetune->add_option("--fewshot", fewshot, "Fraction of the target train split to use");
  auto* evaluate = add_run("evaluate", "Evaluate a checkpoint on the test split (no updates)", eva);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("ArgumentError", e.what(), 1);
  }

  if (build->parsed()) return build_wavebook(filter, m, lambda, wb_out);
  if (tok->parsed()) return tokenize(tk_book, tk_input, tk_out, tk_format, tk_fft);
  if (pretrain->parsed()) return run("pretrain", pre.config, pre.sets, pre.dry_run);
  if (finetune->parsed()) {
    if (finetune->count("--fewshot") > 0) {
      if (!(fewshot > 0.0 && fewshot <= 1.0)) return report("ConfigError", "--fewshot must be in (0, 1]", 1);
      char buf[64];
      std::snprintf(buf, sizeof buf, "train.fewshot_fraction=%.17g", fewshot);
      fin.sets.emplace_back(buf);
    }
    return run("finetune", fin.config, fin.sets, fin.dry_run);
  }
  if (evaluate->parsed()) return run("evaluate", eva.config, eva.sets, eva.dry_run);
  return report("ArgumentError", "no subcommand", 1);
}
