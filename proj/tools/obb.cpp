// Command-line front end: dataset splitting, detection post-processing,
// evaluation, center-ness rendering and the toy trainer.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "obb/data.hpp"
#include "obb/errors.hpp"
#include "obb/eval.hpp"
#include "obb/postprocess.hpp"
#include "obb/raster.hpp"
#include "obb/textio.hpp"
#include "obb/toytrain.hpp"

namespace fs = std::filesystem;
using namespace obb;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kFormat = 3, kNumeric = 4 };

CategoryList load_categories(const std::string& path) {
  if (path.empty()) return CategoryList::dota_v1();
  std::vector<std::string> names;
  for (std::string_view line : split_lines(read_file(path))) {
    const auto tokens = tokenize(line);
    if (!tokens.empty()) names.emplace_back(tokens[0].text);
  }
  return CategoryList(std::move(names));
}

// Annotation files of a directory, sorted by name; the stem is the image id.
std::vector<fs::path> annotation_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

AnnotationSet load_annotations(const fs::path& path, const CategoryList& categories) {
  try {
    return parse_annotations(read_file(path.string()), categories, path.stem().string());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line(), e.column());
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const std::uint64_t a = std::stoull(item.substr(0, dash)), b = std::stoull(item.substr(dash + 1));
      if (b < a) throw InvalidParams("empty seed range '" + item + "'");
      for (std::uint64_t s = a; s <= b; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(std::stoull(item));
    }
  }
  if (seeds.empty()) throw InvalidParams("no seeds given");
  return seeds;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<StrategyKind> parse_strategy_list(const std::string& text) {
  if (text == "all") {
    const auto all = all_strategies();
    return {all.begin(), all.end()};
  }
  std::vector<StrategyKind> out;
  for (const std::string& s : split_list(text)) out.push_back(parse_strategy(s));
  return out;
}

std::vector<CenternessMode> parse_mode_list(const std::string& text) {
  if (text == "all") {
    const auto all = all_centerness_modes();
    return {all.begin(), all.end()};
  }
  std::vector<CenternessMode> out;
  for (const std::string& s : split_list(text)) out.push_back(parse_centerness_mode(s));
  return out;
}

void write_or_print(const std::string& path, const std::string& contents) {
  if (path.empty() || path == "-") {
    std::cout << contents;
  } else {
    write_file(path, contents);
  }
}

std::string mode_slug(CenternessMode m) { return m == CenternessMode::AxisAligned ? "axis" : std::string(to_string(m)); }

// ---------------------------------------------------------------------------

struct SplitArgs {
  std::string ann_dir, out_dir, manifest, images, classes;
  int size = 1024;
  int overlap = 200;
};

int cmd_split(const SplitArgs& a) {
  const CategoryList categories = load_categories(a.classes);
  fs::create_directories(a.out_dir);
  std::vector<ManifestRecord> manifest;
  for (const fs::path& file : annotation_files(a.ann_dir)) {
    AnnotationSet set = load_annotations(file, categories);
    std::optional<Raster> image;
    if (!a.images.empty()) {
      const fs::path img = fs::path(a.images) / (set.image_id + ".pnm");
      if (fs::exists(img)) {
        image = decode_pnm(read_file(img.string()));
        set.width = image->width;
        set.height = image->height;
      }
    }
    if (set.width <= 0 || set.height <= 0) {
      throw InvalidImage(file.string() + ": image size unknown (add an 'imagesize: W H' header or pass --images)");
    }
    for (const PatchSpec& p : split_patches(set.width, set.height, a.size, a.overlap)) {
      const AnnotationSet patch = remap_annotations(set, p);
      write_file((fs::path(a.out_dir) / (patch.image_id + ".txt")).string(), write_annotations(patch, categories));
      if (image) {
        write_file((fs::path(a.out_dir) / (patch.image_id + ".pnm")).string(),
                   encode_pnm(crop(*image, p.x, p.y, p.width, p.height)));
      }
      manifest.push_back({set.image_id, p.x, p.y, p.size});
    }
  }
  const std::string manifest_path = a.manifest.empty() ? (fs::path(a.out_dir) / "manifest.txt").string() : a.manifest;
  write_file(manifest_path, write_manifest(manifest));
  std::cout << manifest.size() << " patches\n";
  return kOk;
}

struct RemapArgs {
  std::string dets, manifest, out, classes;
  double nms = 0.1;
};

// Patch-level detections back to source images, merged with rotated NMS.
int cmd_remap(const RemapArgs& a) {
  const CategoryList categories = load_categories(a.classes);
  const auto records = parse_manifest(read_file(a.manifest));
  const auto dets = parse_detections(read_file(a.dets), categories);
  std::map<std::string, std::size_t> by_patch;
  for (std::size_t i = 0; i < records.size(); ++i) {
    by_patch[patch_id(records[i].image_id, records[i].size, records[i].x, records[i].y)] = i;
  }
  // Source image -> (patches, detections per patch), in manifest order.
  std::map<std::string, std::pair<std::vector<PatchSpec>, std::vector<std::vector<Detection>>>> groups;
  std::map<std::size_t, std::size_t> slot;  // manifest row -> index within its group
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& g = groups[records[i].image_id];
    slot[i] = g.first.size();
    g.first.push_back({records[i].x, records[i].y, records[i].size, 0, records[i].size, records[i].size});
    g.second.emplace_back();
  }
  for (const DetectionRecord& r : dets) {
    const auto it = by_patch.find(r.image_id);
    if (it == by_patch.end()) throw ParseError("patch '" + r.image_id + "' is not in the manifest", 0, 0);
    groups[records[it->second].image_id].second[slot[it->second]].push_back(r.det);
  }
  std::vector<DetectionRecord> out;
  for (const auto& [image_id, g] : groups) {
    for (const Detection& d : merge_patch_detections(g.second, g.first, a.nms)) out.push_back({image_id, d});
  }
  write_or_print(a.out, write_detections(out, categories));
  return kOk;
}

struct EvalArgs {
  std::string dets, gt, heatmap, classes;
  double iou = 0.5;
};

Evaluator evaluate_files(const EvalArgs& a, const CategoryList& categories) {
  std::map<std::string, std::vector<Detection>> per_image;
  for (DetectionRecord& r : parse_detections(read_file(a.dets), categories)) {
    per_image[r.image_id].push_back(r.det);
  }
  Evaluator evaluator(categories.size(), a.iou);
  std::map<std::string, bool> seen;
  for (const fs::path& file : annotation_files(a.gt)) {
    const AnnotationSet gt = load_annotations(file, categories);
    const auto it = per_image.find(gt.image_id);
    const std::vector<Detection> none;
    evaluator.add_image(it == per_image.end() ? none : it->second, gt.objects);
    seen[gt.image_id] = true;
  }
  for (const auto& [id, _] : per_image) {
    if (!seen.count(id)) throw ParseError("detections for image '" + id + "' which has no ground truth", 0, 0);
  }
  return evaluator;
}

int cmd_eval(const EvalArgs& a) {
  const CategoryList categories = load_categories(a.classes);
  const Evaluator evaluator = evaluate_files(a, categories);
  std::cout << ap_table_csv(evaluator, categories);
  if (!a.heatmap.empty()) {
    fs::create_directories(a.heatmap);
    for (const auto& [c, grid] : collect_class_heatmaps(evaluator.true_positives())) {
      const fs::path base = fs::path(a.heatmap) / categories.name(c);
      write_file(base.string() + ".pgm", heatmap_to_pgm(grid));
      write_file(base.string() + ".txt", heatmap_to_text(grid));
    }
  }
  return kOk;
}

int cmd_heatmap(const EvalArgs& a, const std::string& out, int bins) {
  const CategoryList categories = load_categories(a.classes);
  const Evaluator evaluator = evaluate_files(a, categories);
  const HeatmapGrid grid = collect_heatmap(evaluator.true_positives(), bins, bins);
  write_file(out + ".pgm", heatmap_to_pgm(grid));
  write_file(out + ".txt", heatmap_to_text(grid));
  std::cout << grid.total() << " true positives\n";
  return kOk;
}

struct NmsArgs {
  std::string dets, out, classes;
  PostprocessConfig config;
};

int cmd_nms(const NmsArgs& a) {
  const CategoryList categories = load_categories(a.classes);
  std::map<std::string, std::vector<Detection>> per_image;
  std::vector<std::string> order;
  for (DetectionRecord& r : parse_detections(read_file(a.dets), categories)) {
    if (!per_image.count(r.image_id)) order.push_back(r.image_id);
    per_image[r.image_id].push_back(r.det);
  }
  std::vector<DetectionRecord> out;
  for (const std::string& id : order) {
    for (const Detection& d : postprocess(per_image[id], a.config)) out.push_back({id, d});
  }
  write_or_print(a.out, write_detections(out, categories));
  return kOk;
}

struct RenderArgs {
  std::vector<double> quad;
  double alpha = 4.0;
  std::string mode = "oriented";
  std::string out, values;
  int margin = 1;
};

int cmd_render(const RenderArgs& a) {
  if (a.quad.size() != 8) throw InvalidParams("--quad needs 8 numbers");
  Quad::Vertices v;
  for (int i = 0; i < 4; ++i) v[i] = {a.quad[2 * i], a.quad[2 * i + 1]};
  const Quad quad = Quad::canonicalize(v);
  CenternessFunction fn;
  if (a.mode == "oriented") {
    fn = CenternessFunction::Oriented;
  } else if (a.mode == "axis" || a.mode == "axis-aligned") {
    fn = CenternessFunction::AxisAligned;
  } else {
    throw InvalidParams("--mode must be 'oriented' or 'axis'");
  }
  const ValueGrid grid = render_centerness(quad, fn, a.alpha, a.margin);
  write_file(a.out, encode_pnm(to_greymap(grid)));
  if (!a.values.empty()) {
    std::string text;
    for (int y = 0; y < grid.height; ++y) {
      for (int x = 0; x < grid.width; ++x) {
        if (x) text += ' ';
        text += format_real(grid.at(x, y));
      }
      text += '\n';
    }
    write_file(a.values, text);
  }
  return kOk;
}

struct ToyArgs {
  std::string seeds = "0";
  std::string strategies = "direct";
  std::string modes = "oriented";
  long iterations = 6000;
  double alpha = 4.0;
  int tower_layers = 1;
  int hidden = 64;
  long validation_interval = 2000;
  int validation_scenes = 50;
  std::string log, metrics, checkpoint, csv, summary, heatmaps, depths = "1,2,3,4,5,6,7,8";
  bool quiet = false;
};

TrainConfig base_config(const ToyArgs& a) {
  TrainConfig c;
  c.iterations = a.iterations;
  c.alpha = a.alpha;
  c.tower_layers = a.tower_layers;
  c.hidden = a.hidden;
  c.validation_interval = a.validation_interval;
  c.validation_scenes = a.validation_scenes;
  return c;
}

ProgressFn progress_fn(const ToyArgs& a) {
  if (a.quiet) return {};
  return [](const std::string& line) { std::cerr << line << std::endl; };
}

int cmd_toytrain(const ToyArgs& a) {
  const auto seeds = parse_seed_list(a.seeds);
  const auto strategies = parse_strategy_list(a.strategies);
  const auto modes = parse_mode_list(a.modes);
  TrainConfig base = base_config(a);
  std::cout << "# toytrain seeds=" << a.seeds << " iterations=" << base.iterations << " alpha=" << format_real(base.alpha)
            << " tower_layers=" << base.tower_layers << "\n";

  if (seeds.size() == 1 && strategies.size() == 1 && modes.size() == 1) {
    base.seed = seeds[0];
    base.strategy = strategies[0];
    base.centerness = modes[0];
    const TrainResult r = train(base);
    if (!a.log.empty()) write_file(a.log, iteration_log_csv(r.log));
    if (!a.metrics.empty()) write_file(a.metrics, validation_csv(r.validation));
    if (!a.checkpoint.empty()) write_file(a.checkpoint, encode_checkpoint(r.model));
    std::cout << validation_csv(r.validation);
    return kOk;
  }
  const ComparisonReport report = run_comparison(strategies, modes, seeds, base, progress_fn(a));
  write_or_print(a.csv, comparison_csv(report));
  const std::string summary = comparison_summary_csv(report);
  if (a.summary.empty()) {
    std::cout << summary;
  } else {
    write_file(a.summary, summary);
  }
  if (!a.heatmaps.empty()) {
    fs::create_directories(a.heatmaps);
    for (const auto& [key, grid] : report.heatmaps) {
      const fs::path base_path =
          fs::path(a.heatmaps) / (std::string(to_string(key.first)) + "_" + mode_slug(key.second));
      write_file(base_path.string() + ".pgm", heatmap_to_pgm(grid));
      write_file(base_path.string() + ".txt", heatmap_to_text(grid));
    }
  }
  return kOk;
}

int cmd_capacity(const ToyArgs& a) {
  const auto seeds = parse_seed_list(a.seeds);
  std::vector<int> depths;
  for (const std::string& d : split_list(a.depths)) depths.push_back(std::stoi(d));
  TrainConfig base = base_config(a);
  base.centerness = parse_mode_list(a.modes).at(0);
  std::cout << "# capacity-sweep seeds=" << a.seeds << " iterations=" << base.iterations << "\n";
  write_or_print(a.csv, capacity_csv(capacity_sweep(depths, seeds, base, progress_fn(a))));
  return kOk;
}

void add_toy_flags(CLI::App* cmd, ToyArgs& a) {
  cmd->add_option("--seed,--seeds", a.seeds, "Seed, list (0,3,5) or range (0-9)")->capture_default_str();
  cmd->add_option("--iterations", a.iterations, "SGD iterations per run")->capture_default_str();
  cmd->add_option("--alpha", a.alpha, "Center-ness exponent")->capture_default_str();
  cmd->add_option("--hidden", a.hidden, "Feature width F")->capture_default_str();
  cmd->add_option("--validation-interval", a.validation_interval, "Iterations between validations (0: end only)")
      ->capture_default_str();
  cmd->add_option("--validation-scenes", a.validation_scenes, "Held-out scenes")->capture_default_str();
  cmd->add_option("--csv", a.csv, "Per-run CSV (default stdout)");
  cmd->add_flag("--quiet", a.quiet, "No progress on stderr");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oriented bounding box detection toolkit"};
  app.require_subcommand(1);

  SplitArgs split;
  auto* c_split = app.add_subcommand("split", "Cut annotated images into overlapping patches");
  c_split->add_option("--ann", split.ann_dir, "Annotation directory")->required();
  c_split->add_option("--out", split.out_dir, "Output directory for patch annotations")->required();
  c_split->add_option("--images", split.images, "Directory of <id>.pnm images to crop alongside");
  c_split->add_option("--size", split.size, "Patch size")->capture_default_str();
  c_split->add_option("--overlap", split.overlap, "Overlap between patches")->capture_default_str();
  c_split->add_option("--manifest", split.manifest, "Manifest path (default <out>/manifest.txt)");
  c_split->add_option("--classes", split.classes, "Category list, one per line (default DOTA v1.0)");

  RemapArgs remap;
  auto* c_remap = app.add_subcommand("remap", "Map patch detections back to source images and merge them");
  c_remap->add_option("--dets", remap.dets, "Patch-level detections")->required();
  c_remap->add_option("--manifest", remap.manifest, "Patch manifest from split")->required();
  c_remap->add_option("--nms", remap.nms, "NMS IoU threshold for the merge")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_remap->add_option("--out", remap.out, "Output file (default stdout)");
  c_remap->add_option("--classes", remap.classes, "Category list");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Per-class AP and mAP");
  c_eval->add_option("--dets", eval.dets, "Detections")->required();
  c_eval->add_option("--gt", eval.gt, "Ground-truth annotation directory")->required();
  c_eval->add_option("--iou", eval.iou, "Match threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_eval->add_option("--heatmap", eval.heatmap, "Directory for per-class confidence/IoU heatmaps");
  c_eval->add_option("--classes", eval.classes, "Category list");

  EvalArgs hm;
  std::string hm_out;
  int hm_bins = 50;
  auto* c_heat = app.add_subcommand("heatmap", "Confidence vs IoU heatmap of all true positives");
  c_heat->add_option("--dets", hm.dets, "Detections")->required();
  c_heat->add_option("--gt", hm.gt, "Ground-truth annotation directory")->required();
  c_heat->add_option("--iou", hm.iou, "Match threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_heat->add_option("--out", hm_out, "Output path prefix (.pgm and .txt are appended)")->required();
  c_heat->add_option("--bins", hm_bins, "Bins per axis")->capture_default_str();
  c_heat->add_option("--classes", hm.classes, "Category list");

  NmsArgs nms;
  auto* c_nms = app.add_subcommand("nms", "Threshold, top-k and rotated NMS per image");
  c_nms->add_option("--dets", nms.dets, "Detections")->required();
  c_nms->add_option("--threshold", nms.config.confidence_threshold, "Confidence threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_nms->add_option("--top-k", nms.config.top_k, "Candidates kept before NMS")->capture_default_str();
  c_nms->add_option("--nms", nms.config.nms_threshold, "NMS IoU threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_nms->add_option("--out", nms.out, "Output file (default stdout)");
  c_nms->add_option("--classes", nms.classes, "Category list");

  RenderArgs render;
  auto* c_render = app.add_subcommand("centerness-render", "Render center-ness over a quad's hull as a greymap");
  c_render->add_option("--quad", render.quad, "x1 y1 x2 y2 x3 y3 x4 y4")->required()->expected(8);
  c_render->add_option("--alpha", render.alpha, "Exponent of the oriented form")->capture_default_str();
  c_render->add_option("--mode", render.mode, "oriented | axis")->capture_default_str();
  c_render->add_option("--out", render.out, "Output PGM")->required();
  c_render->add_option("--values", render.values, "Also write the raw values as text");
  c_render->add_option("--margin", render.margin, "Pixels around the hull")->capture_default_str();

  ToyArgs toy;
  auto* c_toy = app.add_subcommand("toytrain", "Train the toy detector; several runs produce a comparison");
  add_toy_flags(c_toy, toy);
  c_toy->add_option("--strategies", toy.strategies, "direct,offset,iterative,center-to-corner or all")
      ->capture_default_str();
  c_toy->add_option("--modes", toy.modes, "none,axis,oriented or all")->capture_default_str();
  c_toy->add_option("--tower-layers", toy.tower_layers, "Convolution-analogue layers per branch")->capture_default_str();
  c_toy->add_option("--log", toy.log, "Per-iteration loss CSV (single run)");
  c_toy->add_option("--metrics", toy.metrics, "Validation metrics CSV (single run)");
  c_toy->add_option("--checkpoint", toy.checkpoint, "Model checkpoint (single run)");
  c_toy->add_option("--summary", toy.summary, "Mean/std CSV (comparison; default stdout)");
  c_toy->add_option("--heatmaps", toy.heatmaps, "Directory for none/oriented heatmaps (comparison)");

  ToyArgs cap;
  cap.modes = "oriented";
  auto* c_cap = app.add_subcommand("capacity-sweep", "mAP against tower depth for the direct strategy");
  add_toy_flags(c_cap, cap);
  c_cap->add_option("--depths", cap.depths, "Comma-separated depths")->capture_default_str();
  c_cap->add_option("--mode", cap.modes, "Center-ness mode")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*c_split) return cmd_split(split);
    if (*c_remap) return cmd_remap(remap);
    if (*c_eval) return cmd_eval(eval);
    if (*c_heat) return cmd_heatmap(hm, hm_out, hm_bins);
    if (*c_nms) return cmd_nms(nms);
    if (*c_render) return cmd_render(render);
    if (*c_toy) return cmd_toytrain(toy);
    if (*c_cap) return cmd_capacity(cap);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const InvalidProbability& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFormat;
  } catch (const InvalidParams& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: bad number: " << e.what() << "\n";
    return kUsage;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: number out of range: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    // ParseError, UnknownClass, InvalidQuad, InvalidImage, ...
    std::cerr << "error: " << e.what() << "\n";
    return kFormat;
  }
  return kUsage;
}
