#include "wq4ts/wq4ts.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "error.hpp"
#include "model.hpp"
#include "runner.hpp"
#include "tokenizer.hpp"
#include "wavebook.hpp"

struct wq4ts_wavebook {
  wq4ts::Wavebook book;
};

struct wq4ts_model {
  wq4ts::ModelParams params;
  std::optional<wq4ts::Wavebook> book;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_error_type;

wq4ts_status fail(wq4ts_status status, std::string type, std::string message) {
  g_error_type = std::move(type);
  g_error = std::move(message);
  return status;
}

template <class Fn>
wq4ts_status guarded(Fn&& fn) {
  try {
    fn();
    return WQ4TS_OK;
  } catch (const wq4ts::Error& e) {
    return fail(static_cast<wq4ts_status>(e.kind()), e.name(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(WQ4TS_CONFIG, "ConfigError", e.what());
  } catch (const std::bad_alloc&) {
    return fail(WQ4TS_INTERNAL, "InternalError", "out of memory");
  } catch (const std::exception& e) {
    return fail(WQ4TS_INTERNAL, "InternalError", e.what());
  } catch (...) {
    return fail(WQ4TS_INTERNAL, "InternalError", "unknown failure");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw wq4ts::PreconditionError(what);
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

wq4ts::TokenGrid grid_of(const wq4ts_wavebook* book, const double* x, size_t n, int use_fft) {
  require(book && x && n > 0, "tokenize: null wavebook or empty input");
  std::span<const double> xs(x, n);
  return use_fft ? wq4ts::tokenize_fft(xs, book->book) : wq4ts::tokenize(xs, book->book);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

}  // namespace

extern "C" {

const char* wq4ts_version(void) { return wq4ts::version_string(); }
const char* wq4ts_last_error(void) { return g_error.c_str(); }
const char* wq4ts_last_error_type(void) { return g_error_type.c_str(); }

wq4ts_status wq4ts_wavebook_build(const char* filter, int m, int lambda, wq4ts_wavebook** out) {
  return guarded([&] {
    require(filter && out, "wavebook_build: null argument");
    *out = nullptr;
    const auto fp = wq4ts::build_filter_pair(wq4ts::named_lowpass(filter));
    auto wb = std::make_unique<wq4ts_wavebook>();
    wb->book = wq4ts::build_wavebook(wq4ts::cascade_mother(fp, m, filter), lambda);
    *out = wb.release();
  });
}

wq4ts_status wq4ts_wavebook_load(const char* path, wq4ts_wavebook** out) {
  return guarded([&] {
    require(path && out, "wavebook_load: null argument");
    *out = nullptr;
    auto wb = std::make_unique<wq4ts_wavebook>();
    wb->book = wq4ts::load_wavebook(path);
    *out = wb.release();
  });
}

wq4ts_status wq4ts_wavebook_save(const wq4ts_wavebook* book, const char* path) {
  return guarded([&] {
    require(book && path, "wavebook_save: null argument");
    wq4ts::save_wavebook(book->book, path);
  });
}

wq4ts_status wq4ts_wavebook_info_get(const wq4ts_wavebook* book, wq4ts_wavebook_info* info) {
  return guarded([&] {
    require(book && info, "wavebook_info: null argument");
    info->lambda = book->book.lambda;
    info->m = book->book.m;
    info->f_c = book->book.f_c;
    info->max_basis_length = book->book.max_basis_length();
  });
}

wq4ts_status wq4ts_wavebook_basis_length(const wq4ts_wavebook* book, int index, size_t* length) {
  return guarded([&] {
    require(book && length, "wavebook_basis_length: null argument");
    require(index >= 0 && index < book->book.lambda, "wavebook_basis_length: index out of range");
    *length = book->book.bases[index].size();
  });
}

void wq4ts_wavebook_free(wq4ts_wavebook* book) { delete book; }

wq4ts_status wq4ts_filter_unitarity(const char* filter, int grid_points, double* deviation) {
  return guarded([&] {
    require(filter && deviation, "filter_unitarity: null argument");
    require(grid_points > 0, "filter_unitarity: grid_points must be positive");
    *deviation = wq4ts::verify_unitary(wq4ts::build_filter_pair(wq4ts::named_lowpass(filter)), grid_points);
  });
}

wq4ts_status wq4ts_tokenize(const wq4ts_wavebook* book, const double* x, size_t n, int use_fft, double* tokens) {
  return guarded([&] {
    require(tokens != nullptr, "tokenize: null output");
    const auto grid = grid_of(book, x, n, use_fft);
    std::copy(grid.values.begin(), grid.values.end(), tokens);
  });
}

wq4ts_status wq4ts_tokenize_to_file(const wq4ts_wavebook* book, const double* x, size_t n, int use_fft,
                                    const char* format, const char* path) {
  return guarded([&] {
    require(format && path, "tokenize_to_file: null argument");
    const std::string fmt = format;
    if (fmt != "binary" && fmt != "csv") throw wq4ts::ConfigError("format must be 'binary' or 'csv', got '" + fmt + "'");
    const auto grid = grid_of(book, x, n, use_fft);
    if (fmt == "csv") wq4ts::save_token_grid_csv(grid, path);
    else wq4ts::save_token_grid(grid, path);
  });
}

wq4ts_status wq4ts_read_series_csv(const char* path, double** values, size_t* n) {
  return guarded([&] {
    require(path && values && n, "read_series_csv: null argument");
    *values = nullptr;
    *n = 0;
    std::ifstream in(path);
    if (!in) throw wq4ts::IoError("cannot open '" + std::string(path) + "'");
    std::vector<double> out;
    std::string line;
    std::size_t line_no = 0;
    bool header_allowed = true;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string field = trim(line);
      if (field.empty()) continue;
      if (field.find_first_of(",;\t") != std::string::npos)
        throw wq4ts::ParseError(std::string(path) + ":" + std::to_string(line_no) + ": expected a single column");
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end != field.c_str() + field.size()) {
        if (header_allowed) {
          header_allowed = false;
          continue;
        }
        throw wq4ts::ParseError(std::string(path) + ":" + std::to_string(line_no) + ": '" + field +
                                "' is not a number");
      }
      header_allowed = false;
      out.push_back(v);
    }
    if (out.empty()) throw wq4ts::ParseError("'" + std::string(path) + "' holds no values");
    double* buf = static_cast<double*>(std::malloc(out.size() * sizeof(double)));
    if (!buf) throw std::bad_alloc();
    std::copy(out.begin(), out.end(), buf);
    *values = buf;
    *n = out.size();
  });
}

wq4ts_status wq4ts_model_load(const char* checkpoint, wq4ts_model** out) {
  return guarded([&] {
    require(checkpoint && out, "model_load: null argument");
    *out = nullptr;
    auto model = std::make_unique<wq4ts_model>();
    wq4ts::CheckpointMeta meta;
    model->params = wq4ts::load_checkpoint(checkpoint, &meta);
    if (model->params.config.tokenizer == wq4ts::TokenizerKind::kWave) {
      std::string book = meta.wavebook_path;
      if (book.empty()) throw wq4ts::FormatError("checkpoint does not name its wavebook");
      if (book.front() != '/') {
        const std::string ck = checkpoint;
        const auto slash = ck.find_last_of('/');
        if (slash != std::string::npos) book = ck.substr(0, slash + 1) + book;
      }
      model->book = wq4ts::load_wavebook(book);
    }
    *out = model.release();
  });
}

wq4ts_status wq4ts_model_shape(const wq4ts_model* model, int head, size_t* window, size_t* outputs) {
  return guarded([&] {
    require(model && window && outputs, "model_shape: null argument");
    require(head >= 0 && head < static_cast<int>(model->params.heads.size()), "model_shape: head out of range");
    *window = static_cast<size_t>(model->params.config.length);
    *outputs = static_cast<size_t>(model->params.heads[head].spec.outputs);
  });
}

wq4ts_status wq4ts_model_predict(const wq4ts_model* model, const double* x, size_t n, int head, double* out,
                                 size_t out_len) {
  return guarded([&] {
    require(model && x && out, "model_predict: null argument");
    require(head >= 0 && head < static_cast<int>(model->params.heads.size()), "model_predict: head out of range");
    const auto cache = wq4ts::model_forward(std::span<const double>(x, n), model->book ? &*model->book : nullptr,
                                            model->params, head);
    if (static_cast<size_t>(cache.output.size()) != out_len)
      throw wq4ts::ShapeError("model_predict: output buffer holds " + std::to_string(out_len) + ", head produces " +
                              std::to_string(cache.output.size()));
    std::copy(cache.output.data(), cache.output.data() + out_len, out);
  });
}

void wq4ts_model_free(wq4ts_model* model) { delete model; }

wq4ts_status wq4ts_run(const char* command, const char* config_path, const char* const* overrides,
                       size_t n_overrides, int dry_run, char** summary) {
  return guarded([&] {
    require(command && summary, "run: null argument");
    require(n_overrides == 0 || overrides, "run: null overrides");
    *summary = nullptr;
    const wq4ts::Command cmd = wq4ts::parse_command(command);
    std::vector<std::string> sets(overrides, overrides + n_overrides);
    const auto cfg = wq4ts::load_config(config_path ? config_path : "", sets);
    const auto result = dry_run ? wq4ts::plan_run(cmd, cfg) : wq4ts::execute_run(cmd, cfg);
    *summary = copy_string(result.dump(2));
  });
}

void wq4ts_string_free(char* s) { std::free(s); }
void wq4ts_free(void* p) { std::free(p); }

}  // extern "C"
