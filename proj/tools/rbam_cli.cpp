// rbam: command-line driver for degradation, training, inference,
// evaluation, dataset partitioning, gradient checks and ablation sweeps.
//
// Exit codes: 0 success, 1 verification or runtime failure, 2 usage or
// configuration error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rbam/rbam.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kVerificationFailure = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

// --config file, then --set key=value overrides in order.
rbam::RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  rbam::RunConfig cfg;
  if (!path.empty()) cfg = rbam::load_config(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    try {
      rbam::set_config_value(cfg, rbam::detail::trim(kv.substr(0, eq)), rbam::detail::trim(kv.substr(eq + 1)));
    } catch (const rbam::ConfigError& e) {
      throw rbam::ConfigError("--set " + kv + ": " + e.what());
    }
  }
  return cfg;
}

std::vector<rbam::GrayImage> load_split(const rbam::Manifest& m, rbam::Split s) {
  std::vector<rbam::GrayImage> out;
  for (const auto& r : m.with_split(s)) out.push_back(rbam::read_pgm(r.path));
  return out;
}

// ---------------------------------------------------------------------------

struct DegradeArgs {
  std::string in, out;
  std::size_t scale = 2;
};

int cmd_degrade(const DegradeArgs& a) {
  if (a.scale != 2 && a.scale != 4) throw UsageError("--scale must be 2 or 4");
  rbam::write_pgm(a.out, rbam::downsample(rbam::read_pgm(a.in), a.scale));
  return 0;
}

struct TrainArgs {
  std::string config, manifest, out, resume;
  std::vector<std::string> set;
  std::size_t epochs = 0;
};

int cmd_train(const TrainArgs& a) {
  auto cfg = resolve_config(a.config, a.set);
  if (!a.manifest.empty()) cfg.manifest = a.manifest;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (!a.resume.empty()) cfg.checkpoint = a.resume;
  if (a.epochs) cfg.train.epochs = a.epochs;
  if (cfg.manifest.empty()) throw UsageError("train: a manifest is required (--manifest or manifest = ...)");
  if (cfg.out_dir.empty()) throw UsageError("train: an output directory is required (--out or out_dir = ...)");

  rbam::Checkpoint<float> ck;
  if (!cfg.checkpoint.empty()) {
    ck = rbam::load_checkpoint<float>(cfg.checkpoint);
    cfg.model = ck.config;
    cfg.train.scale = ck.config.scale;
  }
  cfg.validate();
  if (cfg.checkpoint.empty()) ck = {cfg.model, rbam::build<float>(cfg.model, cfg.train.seed), {}, 0};

  fs::create_directories(cfg.out_dir);
  const std::string resolved = rbam::serialize_config(cfg);
  std::cout << resolved << std::flush;
  std::ofstream(fs::path(cfg.out_dir) / "resolved_config.txt") << resolved;

  const auto manifest = rbam::read_manifest(cfg.manifest);
  const auto images = load_split(manifest, rbam::Split::train);
  rbam::TrainOptions opt;
  opt.checkpoint_dir = cfg.out_dir;
  opt.warn = warn;
  opt.on_epoch = [](const rbam::EpochRecord& r) { std::cout << rbam::format_log_line(r) << std::endl; };
  const auto result = rbam::train(ck, images, cfg.train, opt);
  for (const auto& p : result.checkpoints) std::cout << "checkpoint " << p << '\n';
  return 0;
}

struct InferArgs {
  std::string checkpoint, in, out;
};

int cmd_infer(const InferArgs& a) {
  const auto ck = rbam::load_checkpoint<float>(a.checkpoint);
  const auto lr = rbam::read_pgm(a.in);
  const auto x = rbam::to_tensor<float>(lr);
  rbam::NoGradGuard no_grad;
  const auto t0 = std::chrono::steady_clock::now();
  const auto y = rbam::forward(ck.params, ck.config, x);
  const auto t1 = std::chrono::steady_clock::now();
  auto sr = rbam::from_tensor(y);
  rbam::clamp_in_place(sr);
  rbam::write_pgm(a.out, sr);
  std::printf("forward_seconds %.6f\n", std::chrono::duration<double>(t1 - t0).count());
  return 0;
}

struct EvalArgs {
  std::string checkpoint, baseline, manifest, partition = "all", out;
  std::size_t scale = 2;
};

int cmd_eval(const EvalArgs& a) {
  if (a.checkpoint.empty() == a.baseline.empty()) throw UsageError("eval: give exactly one of --checkpoint, --baseline");
  if (!a.baseline.empty() && a.baseline != "bicubic") throw UsageError("eval: the only baseline is 'bicubic'");
  if (a.partition != "all" && a.partition != "rich") throw UsageError("eval: --partition must be rich or all");

  rbam::Upscaler upscaler;
  std::size_t scale = a.scale;
  rbam::Checkpoint<float> ck;
  if (!a.checkpoint.empty()) {
    ck = rbam::load_checkpoint<float>(a.checkpoint);
    scale = ck.config.scale;
    upscaler = [&ck](const rbam::GrayImage& lr) {
      rbam::NoGradGuard no_grad;
      return rbam::from_tensor(rbam::forward(ck.params, ck.config, rbam::to_tensor<float>(lr)));
    };
  } else {
    if (scale != 2 && scale != 4) throw UsageError("--scale must be 2 or 4");
    upscaler = rbam::bicubic_upscaler(scale);
  }

  const auto manifest = rbam::read_manifest(a.manifest);
  std::vector<rbam::EvalItem> items;
  for (const auto& r : manifest.with_split(rbam::Split::test)) {
    if (a.partition == "rich") {
      if (r.partition == rbam::Partition::unassigned) {
        throw UsageError("eval: '" + r.image_id + "' has no partition label; run 'rbam partition' on the manifest first");
      }
      if (r.partition != rbam::Partition::rich) continue;
    }
    items.push_back({r.image_id, rbam::read_pgm(r.path)});
  }
  if (items.empty()) warn("no test images selected; the report is empty");
  const auto report = rbam::evaluate(upscaler, items, scale);
  for (const auto& w : report.warnings) warn(w);
  rbam::write_report(std::cout, report);
  if (!a.out.empty()) {
    std::ofstream os(a.out);
    rbam::write_report(os, report);
  }
  return 0;
}

struct PartitionArgs {
  std::string manifest, out, report;
  std::size_t scale = 2;
};

int cmd_partition(const PartitionArgs& a) {
  if (a.scale != 2 && a.scale != 4) throw UsageError("--scale must be 2 or 4");
  const auto manifest = rbam::read_manifest(a.manifest);
  const auto report = rbam::partition_by_texture(manifest, a.scale);
  for (const auto& w : report.warnings) warn(w);
  rbam::write_partition_report(std::cout, report);
  if (!a.report.empty()) {
    std::ofstream os(a.report);
    rbam::write_partition_report(os, report);
  }
  rbam::save_manifest(a.out.empty() ? a.manifest : a.out, rbam::apply_partition(manifest, report));
  return 0;
}

struct SplitArgs {
  std::string manifest, out;
  double fraction = 0.8;
  std::uint64_t seed = 0;
};

int cmd_split(const SplitArgs& a) {
  const auto m = rbam::split(rbam::read_manifest(a.manifest), a.fraction, a.seed);
  rbam::save_manifest(a.out.empty() ? a.manifest : a.out, m);
  std::cout << "train " << m.with_split(rbam::Split::train).size() << " test "
            << m.with_split(rbam::Split::test).size() << '\n';
  return 0;
}

struct ManifestArgs {
  std::vector<std::string> images;
  std::string out;
};

// One train/unassigned record per image; the id is the file stem.
int cmd_manifest(const ManifestArgs& a) {
  rbam::Manifest m;
  for (const auto& p : a.images) m.records.push_back({fs::path(p).stem().string(), p});
  m.check_unique_ids();
  rbam::save_manifest(a.out, m);
  return 0;
}

struct SynthArgs {
  std::string out, kinds = "textures";
  std::size_t count = 50, size = 96;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
  using rbam::synth::Kind;
  std::vector<Kind> kinds;
  if (a.kinds == "textures") kinds = rbam::synth::texture_kinds();
  else if (a.kinds == "partition") kinds = {Kind::gradient, Kind::checkerboard};
  else throw UsageError("--kinds must be textures or partition");
  fs::create_directories(a.out);
  rbam::Manifest m;
  for (const auto& s : rbam::synth::corpus(kinds, a.count, a.size, a.size, a.seed)) {
    const auto path = (fs::path(a.out) / (s.image_id + ".pgm")).string();
    rbam::write_pgm(path, s.image);
    m.records.push_back({s.image_id, path});
  }
  rbam::save_manifest((fs::path(a.out) / "manifest.tsv").string(), m);
  std::cout << "wrote " << m.records.size() << " images and " << (fs::path(a.out) / "manifest.tsv").string() << '\n';
  return 0;
}

struct GradcheckArgs {
  std::string config;
  std::vector<std::string> set;
  std::uint64_t seed = 0;
  bool corrupt = false;
  bool corners = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  auto cfg = resolve_config(a.config, a.set);
  if (a.config.empty() && a.set.empty()) {
    cfg.model.blocks = 1;
    cfg.model.channels = 4;
  }
  cfg.model.validate();
  if (cfg.model.channels > 8) throw UsageError("gradcheck: use a toy model (channels <= 8)");
  rbam::GradcheckOptions opt;
  opt.seed = a.seed;
  opt.height = opt.width = std::max<std::size_t>(8, cfg.model.sa_pool);
  if (opt.height > 16) throw UsageError("gradcheck: toy extents are limited to 16x16");

  std::vector<rbam::NamedConfig> runs = a.corners ? rbam::gradcheck_corners(cfg.model)
                                                  : std::vector<rbam::NamedConfig>{{"config", cfg.model}};
  rbam::FaultInjection::sigmoid_backward = a.corrupt;
  int status = 0;
  for (const auto& run : runs) {
    const auto r = rbam::gradcheck(run.config, opt);
    const auto& worst = r.worst();
    std::printf("%s: %zu groups, worst %s rel_error %.3e\n", run.name.c_str(), r.groups.size(), worst.name.c_str(),
                worst.rel_error);
    for (const auto& g : r.groups) {
      if (!(g.rel_error < opt.tolerance)) {
        std::printf("FAIL %s %s rel_error %.3e\n", run.name.c_str(), g.name.c_str(), g.rel_error);
        status = kVerificationFailure;
      }
    }
  }
  rbam::FaultInjection::sigmoid_backward = false;
  return status;
}

struct AblateArgs {
  std::string config, manifest, out;
  std::vector<std::string> set;
  std::size_t epochs = 0;
};

int cmd_ablate(const AblateArgs& a) {
  auto cfg = resolve_config(a.config, a.set);
  if (!a.manifest.empty()) cfg.manifest = a.manifest;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (a.epochs) cfg.train.epochs = a.epochs;
  if (cfg.manifest.empty() || cfg.out_dir.empty()) throw UsageError("ablate: --manifest and --out are required");
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  std::ofstream(fs::path(cfg.out_dir) / "resolved_config.txt") << rbam::serialize_config(cfg);

  const auto images = load_split(rbam::read_manifest(cfg.manifest), rbam::Split::train);
  rbam::TrainOptions opt;
  opt.checkpoint_dir = cfg.out_dir;
  opt.warn = warn;
  const auto rows = rbam::run_ablation<float>(cfg.model, images, cfg.train, opt);
  rbam::write_ablation_table(std::cout, rows);
  std::ofstream table(fs::path(cfg.out_dir) / "ablation.csv");
  rbam::write_ablation_table(table, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RBAM single-image super-resolution toolkit"};
  app.require_subcommand(1);

  DegradeArgs degrade;
  auto* c_degrade = app.add_subcommand("degrade", "Bicubic-downsample a PGM by 2 or 4");
  c_degrade->add_option("--in", degrade.in, "Input PGM")->required();
  c_degrade->add_option("--out", degrade.out, "Output PGM")->required();
  c_degrade->add_option("--scale", degrade.scale, "Downscale factor (2 or 4)")->required();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a model on the train split of a manifest");
  c_train->add_option("--config", train.config, "key = value config file");
  c_train->add_option("--manifest", train.manifest, "Dataset manifest");
  c_train->add_option("--out", train.out, "Output directory for checkpoints and the log");
  c_train->add_option("--resume", train.resume, "Checkpoint to resume from");
  c_train->add_option("--epochs", train.epochs, "Total epochs (overrides config)");
  c_train->add_option("--set", train.set, "Config override key=value (repeatable)");

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "Super-resolve one PGM");
  c_infer->add_option("--checkpoint", infer.checkpoint)->required();
  c_infer->add_option("--in", infer.in)->required();
  c_infer->add_option("--out", infer.out)->required();

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "PSNR/SSIM report over the test split");
  c_eval->add_option("--checkpoint", eval.checkpoint);
  c_eval->add_option("--baseline", eval.baseline, "bicubic");
  c_eval->add_option("--manifest", eval.manifest)->required();
  c_eval->add_option("--scale", eval.scale, "Scale for the baseline (a checkpoint carries its own)");
  c_eval->add_option("--partition", eval.partition, "rich or all");
  c_eval->add_option("--out", eval.out, "Also write the report here");

  PartitionArgs part;
  auto* c_part = app.add_subcommand("partition", "Label test images texture-rich or texture-poor");
  c_part->add_option("--manifest", part.manifest)->required();
  c_part->add_option("--scale", part.scale);
  c_part->add_option("--out", part.out, "Labelled manifest (default: overwrite input)");
  c_part->add_option("--report", part.report, "Write the score table here");

  SplitArgs split;
  auto* c_split = app.add_subcommand("split", "Seeded random train/test split");
  c_split->add_option("--manifest", split.manifest)->required();
  c_split->add_option("--fraction", split.fraction, "Train fraction");
  c_split->add_option("--seed", split.seed);
  c_split->add_option("--out", split.out, "Output manifest (default: overwrite input)");

  ManifestArgs manifest;
  auto* c_manifest = app.add_subcommand("manifest", "Build a manifest from PGM files");
  c_manifest->add_option("images", manifest.images)->required();
  c_manifest->add_option("--out", manifest.out)->required();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a procedural image corpus and its manifest");
  c_synth->add_option("--out", synth.out)->required();
  c_synth->add_option("--count", synth.count);
  c_synth->add_option("--size", synth.size);
  c_synth->add_option("--kinds", synth.kinds, "textures or partition");
  c_synth->add_option("--seed", synth.seed);

  GradcheckArgs grad;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
  c_grad->add_option("--config", grad.config);
  c_grad->add_option("--set", grad.set, "Config override key=value (repeatable)");
  c_grad->add_option("--seed", grad.seed);
  c_grad->add_flag("--corners", grad.corners, "Check every attention ablation corner");
  c_grad->add_flag("--corrupt-grad", grad.corrupt, "Perturb the sigmoid backward rule (negative control)");

  AblateArgs ablate;
  auto* c_ablate = app.add_subcommand("ablate", "Train the six-variant attention ablation grid");
  c_ablate->add_option("--config", ablate.config);
  c_ablate->add_option("--manifest", ablate.manifest);
  c_ablate->add_option("--out", ablate.out);
  c_ablate->add_option("--epochs", ablate.epochs);
  c_ablate->add_option("--set", ablate.set, "Config override key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*c_degrade) return cmd_degrade(degrade);
    if (*c_train) return cmd_train(train);
    if (*c_infer) return cmd_infer(infer);
    if (*c_eval) return cmd_eval(eval);
    if (*c_part) return cmd_partition(part);
    if (*c_split) return cmd_split(split);
    if (*c_manifest) return cmd_manifest(manifest);
    if (*c_synth) return cmd_synth(synth);
    if (*c_grad) return cmd_gradcheck(grad);
    if (*c_ablate) return cmd_ablate(ablate);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const rbam::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const rbam::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kUsageError;
  } catch (const rbam::ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const rbam::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kVerificationFailure;
  }
  return kUsageError;
}
