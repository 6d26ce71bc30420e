#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "mcq/mcq.hpp"
#ifdef MCQ_HAVE_PNG
#include "mcq/png_io.hpp"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitDiverged = 2;

bool is_png(const fs::path& p) {
  auto ext = p.extension().string();
  return ext == ".png" || ext == ".PNG";
}

mcq::Image load_image(const fs::path& p) {
  if (is_png(p)) {
#ifdef MCQ_HAVE_PNG
    return mcq::read_png(p);
#else
    mcq::fail(mcq::ErrorCode::kInvalidArgument, "built without PNG support; use .ppm/.pgm");
#endif
  }
  return mcq::read_pnm(p);
}

void save_image(const fs::path& p, const mcq::Image& img) {
  if (is_png(p)) {
#ifdef MCQ_HAVE_PNG
    mcq::write_png(p, img);
    return;
#else
    mcq::fail(mcq::ErrorCode::kInvalidArgument, "built without PNG support; use .ppm/.pgm");
#endif
  }
  mcq::write_pnm(p, img);
}

void write_text(const fs::path& p, const std::string& text) {
  mcq::write_file_atomic(p, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// Text goes to --out when given, stdout otherwise.
void emit(const std::string& out, const std::string& text) {
  if (out.empty())
    std::cout << text << std::flush;
  else
    write_text(out, text);
}

json quality_json(const mcq::QualityReport& q) {
  return {{"bpp", q.bpp},
          {"psnr_db", q.psnr_db},
          {"msssim", q.msssim},
          {"msssim_db", q.msssim_db},
          {"msssim_scales", q.msssim_scales}};
}

mcq::LoadedCodebook codebook_for(const std::string& codebook, const std::string& spec) {
  if (!codebook.empty()) return mcq::load_codebook(codebook);
  mcq::require(!spec.empty(), mcq::ErrorCode::kInvalidArgument, "need --codebook or --spec");
  auto s = mcq::load_model_spec(spec);
  mcq::require(!s.codebook.empty(), mcq::ErrorCode::kInvalidArgument, "spec names no codebook");
  return mcq::load_codebook(s.codebook);
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("mcq");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("MCQ_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

struct Globals {
  std::uint64_t seed = 1;
  std::size_t threads = 0;
};

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string corpus, spec, out, trace, warm_start;
  std::string algorithm = "gumbel-st", init = "kmeans++";
  mcq::TrainConfig cfg;
};

int cmd_train(const TrainArgs& a, const Globals& g) {
  auto spec = mcq::load_model_spec(a.spec);
  fs::path out = a.out.empty() ? spec.codebook : fs::path(a.out);
  mcq::require(!out.empty(), mcq::ErrorCode::kInvalidArgument, "need --out or a codebook path in the model spec");
  fs::path trace = a.trace.empty() ? fs::path(out.string() + ".trace.csv") : fs::path(a.trace);

  auto cfg = a.cfg;
  cfg.groups = spec.groups;
  cfg.codewords = spec.codewords;
  cfg.seed = g.seed;
  if (a.algorithm == "gumbel-st") cfg.algorithm = mcq::TrainAlgorithm::kGumbelSt;
  else if (a.algorithm == "kmeans") cfg.algorithm = mcq::TrainAlgorithm::kKmeans;
  else mcq::fail(mcq::ErrorCode::kInvalidArgument, "unknown algorithm " + a.algorithm);
  if (a.init == "kmeans++") cfg.init = mcq::InitStrategy::kKmeansPlusPlus;
  else if (a.init == "random") cfg.init = mcq::InitStrategy::kRandomSample;
  else mcq::fail(mcq::ErrorCode::kInvalidArgument, "unknown init " + a.init);

  if (!a.warm_start.empty()) cfg.warm_start = mcq::load_codebook(a.warm_start).books;
  auto corpus = mcq::load_corpus(a.corpus, spec.transform);
  spdlog::info("training {} on {} grids ({} levels, M={})", spec.name, corpus.size(), spec.levels, spec.groups);
  auto result = mcq::train(corpus, cfg);

  std::string csv = std::string("# schema=") + mcq::kTraceSchema + "\nlevel,epoch,loss,temperature,lr\n";
  for (const auto& r : result.trace)
    csv += std::to_string(r.level) + ',' + std::to_string(r.epoch) + ',' + mcq::detail::fmt_double(r.loss) + ',' +
           mcq::detail::fmt_double(r.temperature) + ',' + mcq::detail::fmt_double(r.lr) + '\n';

  if (result.diverged) {
    spdlog::error("training diverged; nothing written");
    return kExitDiverged;
  }
  for (const auto& d : result.duplicates)
    spdlog::warn("duplicate codewords level {} group {} rows {}/{} were perturbed", d.level, d.group, d.first, d.second);
  mcq::save_codebook(out, result.books);
  write_text(trace, csv);
  spdlog::info("wrote {} and {}", out.string(), trace.string());
  std::cout << json{{"schema", "mcq-train/1"},
                    {"codebook", out.string()},
                    {"trace", trace.string()},
                    {"final_loss", result.trace.empty() ? 0.0 : result.trace.back().loss},
                    {"duplicates_perturbed", result.duplicates.size()}}
                   .dump()
            << '\n';
  return 0;
}

struct CompressArgs {
  std::string input, spec, codebook, out;
  bool sample = false;
  double temperature = 1.0;
  bool report = false;
};

int cmd_compress(const CompressArgs& a, const Globals& g) {
  auto spec = mcq::load_model_spec(a.spec);
  auto cb = mcq::load_codebook(a.codebook.empty() ? spec.codebook : fs::path(a.codebook));
  auto img = load_image(a.input);
  mcq::SamplerConfig sampler;
  if (a.sample) {
    sampler.mode = mcq::SamplerMode::kGumbel;
    sampler.temperature = a.temperature;
    sampler.seed = g.seed;
  }
  auto enc = mcq::compress_image(img, spec, cb, sampler);
  mcq::write_file_atomic(a.out, enc.bytes);
  std::vector<mcq::GridShape> shapes = mcq::stream_level_shapes(enc.stream.header);
  json j{{"schema", "mcq-compress/1"},
         {"model", spec.name},
         {"bytes", enc.bytes.size()},
         {"payload_bytes", mcq::payload_bytes(enc.stream.payload)},
         {"bpp", mcq::actual_bpp(enc.bytes.size(), img.width, img.height)},
         {"payload_bpp", mcq::actual_bpp(mcq::payload_bytes(enc.stream.payload), img.width, img.height)},
         {"sup_bpp", mcq::sup_bpp_for_shapes(spec.groups, spec.codewords, shapes, img.width, img.height)}};
  if (a.report) {
    auto dec = mcq::decompress_codes(enc.stream.header, enc.codes, cb.books);
    j["quality"] = quality_json(mcq::measure(img, dec, enc.bytes.size()));
  }
  std::cout << j.dump() << '\n';
  return 0;
}

struct DecompressArgs {
  std::string input, spec, codebook, out, reference;
  std::size_t levels_decode = 0;
};

int cmd_decompress(const DecompressArgs& a, const Globals&) {
  auto cb = codebook_for(a.codebook, a.spec);
  auto bytes = mcq::read_file(a.input);
  auto img = mcq::decompress_stream(bytes, cb, a.levels_decode);
  save_image(a.out, img);
  if (!a.reference.empty()) {
    auto ref = load_image(a.reference);
    std::cout << json{{"schema", "mcq-decompress/1"},
                      {"levels_decoded", a.levels_decode},
                      {"quality", quality_json(mcq::measure(ref, img, bytes.size()))}}
                     .dump()
              << '\n';
  }
  return 0;
}

struct SweepArgs {
  std::vector<std::string> images, specs;
  std::string out;
};

int cmd_sweep(const SweepArgs& a, const Globals&) {
  std::vector<mcq::SweepModel> models;
  for (const auto& s : a.specs) {
    auto spec = mcq::load_model_spec(s);
    models.push_back({spec, mcq::load_codebook(spec.codebook)});
  }
  std::vector<mcq::SweepImage> images;
  for (const auto& p : a.images) images.push_back({fs::path(p).filename().string(), load_image(p)});
  emit(a.out, mcq::sweep_csv(mcq::run_sweep(images, models)));
  return 0;
}

struct PerturbArgs {
  std::string input, spec, codebook, reference, out;
  double fraction = 0.15;
};

int cmd_perturb(const PerturbArgs& a, const Globals& g) {
  auto cb = codebook_for(a.codebook, a.spec);
  auto bytes = mcq::read_file(a.input);
  auto ref = load_image(a.reference);
  auto rep = mcq::perturb_stream(bytes, cb, ref, a.fraction, g.seed);
  if (!a.out.empty()) mcq::write_file_atomic(a.out, rep.stream);
  std::cout << json{{"schema", "mcq-perturb/1"},
                    {"fraction", a.fraction},
                    {"seed", g.seed},
                    {"selected", rep.selected},
                    {"changed", rep.changed},
                    {"before", quality_json(rep.before)},
                    {"after", quality_json(rep.after)},
                    {"delta_bpp", rep.after.bpp - rep.before.bpp},
                    {"delta_bpp_rel", (rep.after.bpp - rep.before.bpp) / rep.before.bpp},
                    {"delta_psnr_db", rep.after.psnr_db - rep.before.psnr_db},
                    {"delta_msssim", rep.after.msssim - rep.before.msssim},
                    {"delta_msssim_db", rep.after.msssim_db - rep.before.msssim_db}}
                   .dump()
            << '\n';
  return 0;
}

struct BenchArgs {
  std::vector<std::size_t> groups{2, 8};
  std::vector<std::size_t> codewords{64, 128, 256, 512, 1024, 2048, 4096, 8192};
  mcq::BenchConfig cfg;
  std::string out;
};

int cmd_bench(const BenchArgs& a, const Globals& g) {
  auto cfg = a.cfg;
  cfg.seed = g.seed;
  std::vector<mcq::BenchRow> rows;
  for (auto m : a.groups)
    for (auto k : a.codewords) {
      rows.push_back(mcq::bench_codebook(m, k, cfg));
      spdlog::info("M={} K={} enc {:.3f} ms dec {:.3f} ms", m, k, rows.back().encode_ms, rows.back().decode_ms);
    }
  emit(a.out, mcq::bench_csv(rows));
  return 0;
}

int cmd_inspect(const std::string& input) {
  auto bytes = mcq::read_file(input);
  auto s = mcq::read_stream(bytes);
  const auto& h = s.header;
  json levels = json::array();
  auto shapes = mcq::stream_level_shapes(h);
  for (std::size_t l = 0; l < h.levels; ++l) {
    std::size_t payload = 0;
    for (std::size_t m = 0; m < h.groups; ++m) payload += s.payload.at(l * h.groups + m).size();
    levels.push_back({{"K", h.codewords[l]}, {"grid_h", shapes[l].h}, {"grid_w", shapes[l].w}, {"payload_bytes", payload}});
  }
  std::cout << json{{"schema", "mcq-inspect/1"},
                    {"version", mcq::kStreamVersion},
                    {"width", h.width},
                    {"height", h.height},
                    {"channels", h.channels},
                    {"transform", mcq::to_string(h.transform.kind)},
                    {"patch", h.transform.patch},
                    {"latent_channels", h.transform.latent_channels()},
                    {"levels", h.levels},
                    {"groups", h.groups},
                    {"codebook_sha256", mcq::to_hex(h.codebook_digest)},
                    {"sampled", h.sampled},
                    {"level_info", levels},
                    {"total_bytes", bytes.size()},
                    {"bpp", mcq::actual_bpp(bytes.size(), h.width, h.height)},
                    {"sup_bpp", mcq::sup_bpp_for_shapes(h.groups, h.codewords_sz(), shapes, h.width, h.height)}}
                   .dump(2)
            << '\n';
  return 0;
}

struct SynthArgs {
  std::string out;
  std::size_t count = 16;
  std::uint32_t width = 192, height = 192, channels = 3;
};

int cmd_synth(const SynthArgs& a, const Globals& g) {
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < a.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "leaves_%03zu.%s", i, a.channels == 3 ? "ppm" : "pgm");
    mcq::write_pnm(fs::path(a.out) / name, mcq::dead_leaves(a.width, a.height, a.channels, g.seed * 1000003 + i));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"mcq: multi-codebook vector quantization image codec"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "RNG seed (sampling, training, perturbation)");
  app.add_option("--threads", g.threads, "worker thread cap; 1 gives bit-reproducible runs")->check(CLI::PositiveNumber);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a codebook from a corpus directory");
  train->add_option("--corpus", ta.corpus, "directory of .ppm/.pgm/.mcql files")->required();
  train->add_option("--spec", ta.spec, "model spec file")->required();
  train->add_option("--out", ta.out, "codebook path (default: the codebook named by --spec)");
  train->add_option("--trace", ta.trace, "loss trace CSV (default: <out>.trace.csv)");
  train->add_option("--algorithm", ta.algorithm, "gumbel-st or kmeans")->capture_default_str();
  train->add_option("--init", ta.init, "kmeans++ or random")->capture_default_str();
  train->add_option("--warm-start", ta.warm_start, "start from this codebook instead of seeding");
  train->add_option("--epochs", ta.cfg.epochs)->capture_default_str();
  train->add_option("--batch", ta.cfg.batch_size)->capture_default_str();
  train->add_option("--lr", ta.cfg.lr_initial)->capture_default_str();
  train->add_option("--lr-final", ta.cfg.lr_final)->capture_default_str();
  train->add_option("--tau", ta.cfg.temperature_initial)->capture_default_str();
  train->add_option("--tau-final", ta.cfg.temperature_final)->capture_default_str();

  CompressArgs ca;
  auto* compress = app.add_subcommand("compress", "encode an image to a .mcq stream");
  compress->add_option("input", ca.input)->required();
  compress->add_option("--spec", ca.spec)->required();
  compress->add_option("--codebook", ca.codebook, "override the codebook named by --spec");
  compress->add_option("--out", ca.out)->required();
  compress->add_flag("--sample", ca.sample, "draw codes with the Gumbel sampler instead of argmin");
  compress->add_option("--temperature", ca.temperature)->capture_default_str();
  compress->add_flag("--report", ca.report, "add PSNR / MS-SSIM against the input");

  DecompressArgs da;
  auto* decompress = app.add_subcommand("decompress", "decode a .mcq stream");
  decompress->add_option("input", da.input)->required();
  decompress->add_option("--codebook", da.codebook);
  decompress->add_option("--spec", da.spec, "take the codebook path from a spec");
  decompress->add_option("--out", da.out)->required();
  decompress->add_option("--levels-decode", da.levels_decode, "decode only the coarsest N levels (0 = all)");
  decompress->add_option("--reference", da.reference, "report quality against this image");

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "R-D sweep over images and models");
  sweep->add_option("images", sa.images)->required();
  sweep->add_option("--spec", sa.specs, "model spec (repeatable)")->required();
  sweep->add_option("--out", sa.out, "CSV path (default stdout)");

  PerturbArgs pa;
  auto* perturb = app.add_subcommand("perturb", "randomly change a fraction of the codes");
  perturb->add_option("input", pa.input)->required();
  perturb->add_option("--codebook", pa.codebook);
  perturb->add_option("--spec", pa.spec);
  perturb->add_option("--reference", pa.reference, "original image")->required();
  perturb->add_option("--fraction", pa.fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  perturb->add_option("--out", pa.out, "write the perturbed stream");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "encode/decode latency vs codebook size");
  bench->add_option("--groups", ba.groups)->delimiter(',')->capture_default_str();
  bench->add_option("--codewords", ba.codewords)->delimiter(',')->capture_default_str();
  bench->add_option("--channels", ba.cfg.channels)->capture_default_str();
  bench->add_option("--grid", ba.cfg.grid_h, "latent grid side")->capture_default_str();
  bench->add_option("--warmup", ba.cfg.warmup)->capture_default_str();
  bench->add_option("--runs", ba.cfg.runs)->capture_default_str();
  bench->add_option("--out", ba.out, "CSV path (default stdout)");

  std::string inspect_in;
  auto* inspect = app.add_subcommand("inspect", "dump a stream header as JSON");
  inspect->add_option("input", inspect_in)->required();

  SynthArgs ya;
  auto* synth = app.add_subcommand("synth", "write a synthetic dead-leaves image corpus");
  synth->add_option("--out", ya.out, "output directory")->required();
  synth->add_option("--count", ya.count)->capture_default_str();
  synth->add_option("--width", ya.width)->capture_default_str();
  synth->add_option("--height", ya.height)->capture_default_str();
  synth->add_option("--channels", ya.channels)->check(CLI::IsMember({1, 3}))->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  if (g.threads > 0) mcq::set_thread_limit(g.threads);
  ba.cfg.grid_w = ba.cfg.grid_h;

  try {
    if (*train) return cmd_train(ta, g);
    if (*compress) return cmd_compress(ca, g);
    if (*decompress) return cmd_decompress(da, g);
    if (*sweep) return cmd_sweep(sa, g);
    if (*perturb) return cmd_perturb(pa, g);
    if (*bench) return cmd_bench(ba, g);
    if (*inspect) return cmd_inspect(inspect_in);
    if (*synth) return cmd_synth(ya, g);
  } catch (const std::exception& e) {
    std::cerr << "mcq: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
