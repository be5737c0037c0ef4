#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <memory>
#include <stdexcept>

#include "wtl/chain.hpp"
#include "wtl/dataset.hpp"
#include "wtl/eval.hpp"
#include "wtl/image_io.hpp"
#include "wtl/log.hpp"
#include "wtl/predictor.hpp"
#include "wtl/tracer.hpp"

namespace wtl::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json coord(PixelCoord p) { return json::array({p.row, p.col}); }

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string need(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required option ") + flag);
  return value;
}

InputStack load_stack(const RunConfig& rc) {
  const auto image = io::read_rgb(need(rc.image, "--image"));
  const auto softmap = io::read_gray(need(rc.softmap, "--softmap"));
  return stack_inputs(image, softmap);
}

std::string resolved_predictor(const RunConfig& rc) {
  if (!rc.predictor.empty()) return rc.predictor;
  return rc.weights.empty() ? "ridge" : "cnn";
}

std::unique_ptr<DirectionPredictor> make_predictor(const RunConfig& rc) {
  const auto kind = resolved_predictor(rc);
  if (kind == "cnn") {
    if (rc.weights.empty()) throw UsageError("--predictor cnn requires --weights");
    return std::make_unique<CnnPredictor>(cnn::load_weights(rc.weights), rc.train.label_scale, rc.threads);
  }
  if (kind == "oracle") {
    if (rc.gt_contour.empty()) throw UsageError("--predictor oracle requires --gt-contour");
    return std::make_unique<OraclePredictor>(trace_gt_chain(io::read_mask(rc.gt_contour)));
  }
  if (kind == "ridge") return std::make_unique<RidgePredictor>();
  throw UsageError("unknown predictor '" + kind + "'");
}

RgbImage overlay_heat(const RgbImage& image, const Raster2D& heat) {
  RgbImage out = image;
  for (std::size_t i = 0; i < heat.size(); ++i) {
    const float v = heat.data()[i];
    out.channels[0].data()[i] = (1 - v) * image.channels[0].data()[i] + v;
    out.channels[1].data()[i] = (1 - v) * image.channels[1].data()[i];
    out.channels[2].data()[i] = (1 - v) * image.channels[2].data()[i];
  }
  return out;
}

RgbImage overlay_mask(const RgbImage& image, const BinaryMask& m) {
  Raster2D heat(m.height(), m.width());
  for (std::size_t i = 0; i < m.size(); ++i) heat.data()[i] = m.data()[i] ? 1.0f : 0.0f;
  return overlay_heat(image, heat);
}

json pass_json(const PassReport& p) {
  json culls = json::object();
  for (std::size_t k = 0; k < kCullNames.size(); ++k) culls[kCullNames[k]] = p.culls[k];
  return {{"n0", p.n0}, {"iterations", p.iterations}, {"max_batch", p.max_batch},
          {"path_pixels", p.path_pixels}, {"culls", culls}};
}

json completion_json(const CompletionResult& r, const std::string& predictor) {
  return {{"predictor", predictor},
          {"passes", json::array({pass_json(r.passes[0]), pass_json(r.passes[1])})},
          {"paths", r.paths.size()},
          {"max_count", r.map.max_count()}};
}

json binarize_json(const BinarizeResult& b) {
  return {{"line", {{"a", coord(b.line.a)}, {"b", coord(b.line.b)}, {"rho", b.line.rho}, {"theta", b.line.theta},
                    {"length", b.line.length}, {"votes", b.line.votes}}},
          {"cut_col", b.cut.cut_col},
          {"cut_rows", json::array({b.cut.zero_begin, b.cut.zero_end})},
          {"pixel1", coord(b.cut.pixel1)},
          {"pixel2", coord(b.cut.pixel2)},
          {"threshold", b.closing.th},
          {"iterations", b.closing.iterations},
          {"contour_pixels", count_foreground(b.contour)}};
}

json metric_json(const MetricReport& m) {
  return {{"image", m.image}, {"precision", m.precision}, {"recall", m.recall}, {"iou", m.iou},
          {"empty_mask", m.empty_mask}};
}

void write_table(const fs::path& out, const ReportTable& t) {
  write_text(out / "metrics.csv", t.csv());
  write_text(out / "metrics.txt", t.text());
}

// ---- commands --------------------------------------------------------------

void cmd_synth(const RunConfig& rc, json& report, json&) {
  require(rc.count >= 1, "--count must be positive");
  json scenes = json::array();
  for (int i = 0; i < rc.count; ++i) {
    const auto seed = rc.seed + static_cast<std::uint64_t>(i);
    const auto s = gen_scene(rc.synth, seed);
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03d", i);
    const fs::path dir = fs::path(rc.out) / name;
    fs::create_directories(dir);
    io::write_rgb(dir / "image.png", s.image);
    io::write_mask(dir / "contour.png", s.gt_contour);
    io::write_mask(dir / "mask.png", s.gt_mask);
    io::write_gray(dir / "softmap.png", s.softmap);
    json params = {{"seed", seed},
                   {"attempt", s.attempt},
                   {"height", s.params.height},
                   {"width", s.params.width},
                   {"complexity", s.params.complexity},
                   {"antennas", s.params.antennas},
                   {"noise", s.params.noise},
                   {"gaps", s.params.gaps},
                   {"gap_level", s.params.gap_level},
                   {"peak", s.params.peak},
                   {"waterline", {{"row", s.waterline_row}, {"begin", s.waterline_begin}, {"end", s.waterline_end}}}};
    write_json(dir / "params.json", params);
    scenes.push_back({{"dir", name}, {"seed", seed}, {"contour_pixels", count_foreground(s.gt_contour)}});
    log::info("synth: wrote ", dir.string());
  }
  report["scenes"] = scenes;
}

void cmd_gen_labels(const RunConfig& rc, json& report, json&) {
  const fs::path root = need(rc.scenes, "--scenes");
  if (!fs::is_directory(root)) fail(ErrorKind::io, "cannot open scene directory '" + root.string() + "'");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "contour.png")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) fail(ErrorKind::io, "no scene directories with contour.png under '" + root.string() + "'");
  std::vector<LabelScene> scenes;
  for (const auto& d : dirs) {
    scenes.push_back({stack_inputs(io::read_rgb(d / "image.png"), io::read_gray(d / "softmap.png")),
                      io::read_mask(d / "contour.png")});
  }
  LabelGenConfig cfg = rc.labels;
  cfg.seed = rc.seed;
  cfg.threads = rc.threads;
  const auto ds = generate_dataset(scenes, cfg);
  json failures = json::array();
  for (const auto& f : ds.failures) {
    failures.push_back({{"scene", dirs[f.image_id].filename().string()}, {"error", f.message}});
    log::warn("gen-labels: ", dirs[f.image_id].string(), ": ", f.message);
  }
  if (ds.failures.size() == scenes.size()) fail(ErrorKind::invalid_ground_truth, "no scene has a valid ground truth");
  save_dataset(ds.split, fs::path(rc.out) / "dataset.bin");
  json names = json::array();
  for (const auto& d : dirs) names.push_back(d.filename().string());
  report["scenes"] = names;
  report["train_records"] = ds.split.train.size();
  report["validation_records"] = ds.split.validation.size();
  report["failures"] = failures;
}

void cmd_train(const RunConfig& rc, json& report, json&) {
  const auto data = load_dataset(need(rc.dataset, "--dataset"));
  cnn::TrainConfig cfg = rc.train;
  cfg.seed = rc.seed;
  std::string curve = "epoch,train_loss,val_loss\n";
  const auto result = cnn::train(data, cfg, [&](const cnn::EpochLoss& e) {
    log::info("train: epoch ", e.epoch, " train ", e.train_loss, " val ", e.val_loss);
  });
  for (const auto& e : result.curve) {
    char line[96];
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g\n", e.epoch, e.train_loss, e.val_loss);
    curve += line;
  }
  cnn::save_weights(result.weights, fs::path(rc.out) / "weights.bin");
  write_text(fs::path(rc.out) / "loss.csv", curve);
  report["train_records"] = data.train.size();
  report["validation_records"] = data.validation.size();
  report["best_epoch"] = result.best_epoch;
  report["first_val_loss"] = result.curve.front().val_loss;
  report["best_val_loss"] = result.curve[static_cast<std::size_t>(result.best_epoch - 1)].val_loss;
}

void cmd_trace(const RunConfig& rc, json& report, json&) {
  const auto stack = load_stack(rc);
  if (rc.start_row < 0 || rc.start_col < 0) throw UsageError("trace requires --start-row and --start-col");
  const auto pred = make_predictor(rc);
  const TracerState start{{rc.start_row, rc.start_col}, wrap_angle(rc.start_angle)};
  const auto path = walk(stack, start, rc.steps, *pred, constant_step(rc.step_size));
  std::string csv = "index,row,col\n";
  for (std::size_t i = 0; i < path.pixels.size(); ++i) {
    csv += std::to_string(i) + "," + std::to_string(path.pixels[i].row) + "," + std::to_string(path.pixels[i].col) + "\n";
  }
  write_text(fs::path(rc.out) / "path.csv", csv);
  BinaryMask m(stack.height(), stack.width());
  for (auto p : path.pixels) m[p] = 1;
  io::write_rgb(fs::path(rc.out) / "overlay.png",
                overlay_mask(RgbImage{{stack.channel(0), stack.channel(1), stack.channel(2)}}, m));
  report["predictor"] = pred->kind();
  report["pixels"] = path.pixels.size();
  report["left_image"] = path.left_image;
  report["end"] = coord(path.pixels.back());
}

CompletionResult complete_stage(const RunConfig& rc, const InputStack& stack, json& report, json& timings) {
  const auto pred = make_predictor(rc);
  CompletionConfig cfg = rc.completion;
  cfg.seed = rc.seed;
  cfg.threads = rc.threads;
  auto res = run_completion(stack, *pred, cfg);
  report["completion"] = completion_json(res, pred->kind());
  timings["completion_pass_seconds"] = json::array({res.seconds[0], res.seconds[1]});
  log::info("complete: ", res.paths.size(), " paths, max count ", res.map.max_count());
  return res;
}

void cmd_complete(const RunConfig& rc, json& report, json& timings) {
  const auto stack = load_stack(rc);
  const auto res = complete_stage(rc, stack, report, timings);
  const auto norm = res.map.normalized();
  io::write_gray(fs::path(rc.out) / "wtl.png", norm);
  io::write_rgb(fs::path(rc.out) / "overlay.png",
                overlay_heat(RgbImage{{stack.channel(0), stack.channel(1), stack.channel(2)}}, norm));
}

void cmd_binarize(const RunConfig& rc, json& report, json&) {
  const auto wtl_map = io::read_gray(need(rc.wtl, "--wtl"));
  const auto b = binarize_pipeline(wtl_map, rc.binarize);
  io::write_mask(fs::path(rc.out) / "contour.png", b.contour);
  report["binarize"] = binarize_json(b);
}

void cmd_eval(const RunConfig& rc, json& report, json&) {
  const auto gt = io::read_mask(need(rc.gt_mask, "--gt-mask"));
  BinaryMask mask;
  if (!rc.mask.empty()) {
    mask = io::read_mask(rc.mask);
  } else {
    mask = fill_closed_contour(io::read_mask(need(rc.contour, "--mask or --contour")));
  }
  const auto m = metrics(mask, gt, rc.name.empty() ? "image" : rc.name);
  const auto table = report_table({m});
  write_table(rc.out, table);
  report["metrics"] = metric_json(m);
}

void cmd_pipeline(const RunConfig& rc, json& report, json& timings) {
  const fs::path out = rc.out;
  const auto stack = load_stack(rc);
  const RgbImage image{{stack.channel(0), stack.channel(1), stack.channel(2)}};
  Stopwatch clock;
  const auto res = complete_stage(rc, stack, report, timings);
  const auto norm = res.map.normalized();
  io::write_gray(out / "wtl.png", norm);
  io::write_rgb(out / "overlay_wtl.png", overlay_heat(image, norm));
  clock.lap();

  BinarizeResult b;
  try {
    b = binarize_pipeline(norm, rc.binarize);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("pipeline/") + e.what());
  }
  timings["binarize_seconds"] = clock.lap();
  report["binarize"] = binarize_json(b);
  io::write_mask(out / "contour.png", b.contour);
  io::write_rgb(out / "overlay_contour.png", overlay_mask(image, b.contour));
  const auto mask = fill_closed_contour(b.contour);
  io::write_mask(out / "mask.png", mask);

  if (!rc.gt_mask.empty()) {
    const auto m = metrics(mask, io::read_mask(rc.gt_mask), rc.name.empty() ? "image" : rc.name);
    write_table(out, report_table({m}));
    report["metrics"] = metric_json(m);
  }
}

using Command = std::function<void(const RunConfig&, json&, json&)>;

struct CommandSpec {
  const char* name;
  const char* help;
  Command fn;
  std::vector<std::string> flags;  // registry keys exposed as --flags
};

std::string flag_of(const std::string& key) {
  std::string f = "--" + key;
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return kInvalidArgument;
    case ErrorKind::io: return kIo;
    case ErrorKind::format: return kFormat;
    case ErrorKind::numeric: return kNumeric;
    case ErrorKind::no_line: return kNoLine;
    case ErrorKind::cut_failure: return kCutFailure;
    case ErrorKind::no_closure: return kNoClosure;
    case ErrorKind::not_closed: return kNotClosed;
    case ErrorKind::fill_failure: return kFillFailure;
    case ErrorKind::invalid_ground_truth: return kInvalidGroundTruth;
    case ErrorKind::empty_result: return kEmptyResult;
  }
  return kInternal;
}

void RunConfig::bind_all(Registry& r) {
  r.add("image", &image);
  r.add("softmap", &softmap);
  r.add("weights", &weights);
  r.add("predictor", &predictor);
  r.add("gt_contour", &gt_contour);
  r.add("gt_mask", &gt_mask);
  r.add("mask", &mask);
  r.add("contour", &contour);
  r.add("wtl", &wtl);
  r.add("dataset", &dataset);
  r.add("scenes", &scenes);
  r.add("name", &name);
  r.add("seed", &seed);
  r.add("threads", &threads);
  r.add("count", &count);
  r.add("start_row", &start_row);
  r.add("start_col", &start_col);
  r.add("start_angle", &start_angle);
  r.add("steps", &steps);
  r.add("step_size", &step_size);
  bind(r, completion);
  bind(r, binarize);
  bind(r, train);
  bind(r, labels);
  bind(r, synth);
}

int run(const std::vector<std::string>& args) {
  const std::vector<std::string> stage_inputs{"image", "softmap", "weights", "predictor", "gt_contour"};
  auto with = [](std::vector<std::string> a, std::initializer_list<std::string> b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  const std::vector<CommandSpec> specs{
      {"synth", "Generate synthetic scenes", cmd_synth, {"count"}},
      {"gen-labels", "Generate a training dataset from scene directories", cmd_gen_labels, {"scenes"}},
      {"train", "Train the direction CNN", cmd_train, {"dataset"}},
      {"trace", "Run a single tracer", cmd_trace,
       with(stage_inputs, {"start_row", "start_col", "start_angle", "steps", "step_size"})},
      {"complete", "Contour completion with a tracer swarm", cmd_complete, stage_inputs},
      {"binarize", "Binarize an accumulated contour map", cmd_binarize, {"wtl"}},
      {"eval", "Precision, recall and IoU of a mask", cmd_eval, {"mask", "contour", "gt_mask", "name"}},
      {"pipeline", "complete, binarize and optionally eval", cmd_pipeline, with(stage_inputs, {"gt_mask", "name"})},
  };

  const std::map<std::string, std::string> flag_help{
      {"seed", "Random seed (default 1)"},
      {"threads", "Worker threads; results do not depend on it (default 1)"},
      {"count", "Number of scenes to generate"},
      {"scenes", "Directory of scene_* subdirectories"},
      {"dataset", "dataset.bin written by gen-labels"},
      {"image", "RGB input image (PNG)"},
      {"softmap", "Soft contour probability map (grayscale PNG)"},
      {"weights", "weights.bin written by train (required for --predictor cnn)"},
      {"predictor", "Direction predictor"},
      {"gt_contour", "Ground-truth contour PNG (required for --predictor oracle)"},
      {"gt_mask", "Ground-truth region mask PNG; enables metrics"},
      {"name", "Image name used in the metrics table"},
      {"wtl", "Accumulated contour map (grayscale PNG)"},
      {"mask", "Predicted region mask PNG"},
      {"contour", "Predicted closed contour PNG; filled before scoring"},
      {"start_row", "Start pixel row"},
      {"start_col", "Start pixel column"},
      {"start_angle", "Start heading in degrees, clockwise from east"},
      {"steps", "Number of tracer steps"},
      {"step_size", "Step size in pixels (1, 2 or 3)"},
  };
  auto help_of = [&flag_help](const std::string& key) {
    const auto it = flag_help.find(key);
    return it == flag_help.end() ? std::string() : it->second;
  };

  CLI::App app{"Contour completion with learned tracers", "wtl"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_options;
  const CommandSpec* chosen = nullptr;

  for (const auto& spec : specs) {
    auto* sub = app.add_subcommand(spec.name, spec.help);
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--out", out_dir, "Output directory (default: current directory)");
    sub->add_option("--set", overrides, "Override any configuration key (key=value)");
    for (const std::string key : {"seed", "threads"}) {
      flag_options[std::string(spec.name) + key] = sub->add_option(flag_of(key), flag_values[key], help_of(key));
    }
    for (const auto& key : spec.flags) {
      auto* opt = sub->add_option(flag_of(key), flag_values[key], help_of(key));
      if (key == "predictor") opt->check(CLI::IsMember({"cnn", "oracle", "ridge"}));
      flag_options[std::string(spec.name) + key] = opt;
    }
    sub->callback([&chosen, &spec] { chosen = &spec; });
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  RunConfig rc;
  json timings = json::object();
  json report = json::object();
  try {
    rc.command = chosen->name;
    Registry reg;
    rc.bind_all(reg);
    if (!config_path.empty()) reg.apply(read_key_values(config_path));
    for (const auto& [id, opt] : flag_options) {
      if (id.rfind(chosen->name, 0) == 0 && opt->count() > 0) {
        const auto key = id.substr(std::string(chosen->name).size());
        reg.set(key, flag_values[key]);
      }
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      reg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    if (!out_dir.empty()) rc.out = out_dir;
    rc.threads = resolve_threads(rc.threads);
    const auto& f = chosen->flags;
    if (std::find(f.begin(), f.end(), "predictor") != f.end() && resolved_predictor(rc) == "cnn" && rc.weights.empty()) {
      throw UsageError("--predictor cnn requires --weights");
    }

    std::error_code ec;
    fs::create_directories(rc.out, ec);
    if (ec) fail(ErrorKind::io, "cannot create output directory '" + rc.out + "': " + ec.message());
    write_text(fs::path(rc.out) / "run_config.txt", reg.dump());
    log::info(rc.command, ": output in ", rc.out);

    Stopwatch total;
    report["command"] = rc.command;
    report["seed"] = rc.seed;
    chosen->fn(rc, report, timings);
    timings["total_seconds"] = total.lap();
    report["status"] = "ok";
    write_json(fs::path(rc.out) / "report.json", report);
    write_json(fs::path(rc.out) / "timings.json", timings);
    return kOk;
  } catch (const UsageError& e) {
    log::error("usage: ", e.what());
    return kUsage;
  } catch (const Error& e) {
    log::error(to_string(e.kind()), ": ", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    log::error("internal: ", e.what());
    return kInternal;
  }
}

}  // namespace wtl::cli
