// Command-line surface for the body/keypoint/part toolkit: decoding raw
// prediction dumps, NMS, skeleton-based association, loss evaluation,
// detection/pose/association metrics, synthetic corpora, and dataset merging.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bkp/associate.hpp"
#include "bkp/core.hpp"
#include "bkp/decode.hpp"
#include "bkp/io.hpp"
#include "bkp/loss.hpp"
#include "bkp/metrics.hpp"
#include "bkp/nms.hpp"
#include "bkp/synth.hpp"
#include "bkp/version.hpp"

namespace {

using bkp::json;

struct GlobalOpts {
  std::string config_path;
  std::uint64_t seed = 42;
  int threads = 1;
  bool strict = false;
  json config;  // parsed --config file, or empty object
};

json config_section(const GlobalOpts& g, const std::string& name) {
  if (g.config.is_object() && g.config.contains(name)) return g.config.at(name);
  return json::object();
}

// Effective class map: subcommand flag > config file block > builtin default.
bkp::ClassMap resolve_classmap(const GlobalOpts& g, const std::string& flag) {
  if (!flag.empty()) {
    if (flag == "bkpd" || flag == "coco-humanparts")
      return bkp::classmap_builtin(bkp::classmap_mode_from_string(flag));
    return bkp::classmap_from_json(bkp::load_json(flag));
  }
  if (g.config.is_object() && g.config.contains("classmap"))
    return bkp::classmap_from_json(g.config.at("classmap"));
  return bkp::classmap_builtin(bkp::ClassMapMode::kBkpd);
}

void print_repro_header(const GlobalOpts& g, const std::string& cmd,
                        const json& effective) {
  const std::string hash = bkp::fnv1a64_hex(bkp::dump_canonical(effective));
  std::fprintf(stderr, "bkp %s cmd=%s seed=%llu config-hash=%s\n",
               bkp::kVersion, cmd.c_str(),
               static_cast<unsigned long long>(g.seed), hash.c_str());
}

std::vector<double> parse_thresholds(const std::string& spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    double start = 0, step = 0, stop = 0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &start, &step, &stop) != 3 ||
        step <= 0)
      throw bkp::ConfigError("bad threshold range: " + spec);
    for (double t = start; t <= stop + 1e-9; t += step) out.push_back(t);
    return out;
  }
  std::string item;
  std::istringstream ss(spec);
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

bkp::SizeBand band_from_string(const std::string& s) {
  if (s == "all") return bkp::SizeBand::kAll;
  if (s == "tiny") return bkp::SizeBand::kTiny;
  if (s == "small") return bkp::SizeBand::kSmall;
  if (s == "medium") return bkp::SizeBand::kMedium;
  if (s == "large") return bkp::SizeBand::kLarge;
  throw bkp::ConfigError("unknown size band: " + s);
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string gt_path, pred_path, classmap_flag;
  bkp::SynthConfig cfg;
};

int run_synth(const GlobalOpts& g, const SynthArgs& args) {
  bkp::SynthConfig cfg = args.cfg;
  cfg.seed = g.seed;
  const bkp::ClassMap cmap = resolve_classmap(g, args.classmap_flag);

  json effective{{"cmd", "synth"},
                 {"seed", cfg.seed},
                 {"scenes", cfg.n_scenes},
                 {"people", {cfg.people_min, cfg.people_max}},
                 {"arena", {cfg.arena_w, cfg.arena_h}},
                 {"occlusion", cfg.occlusion_prob},
                 {"noise",
                  {{"box_jitter", cfg.noise.box_jitter},
                   {"pose_noise", cfg.noise.pose_noise},
                   {"conf", {cfg.noise.conf_lo, cfg.noise.conf_hi}},
                   {"fp_rate", cfg.noise.fp_rate},
                   {"fn_rate", cfg.noise.fn_rate}}},
                 {"classmap", bkp::classmap_to_json(cmap)}};
  print_repro_header(g, "synth", effective);

  const auto corpus = bkp::generate_corpus(cfg, cmap);
  std::vector<bkp::Scene> gt, pred;
  for (const auto& pair : corpus) {
    gt.push_back(pair.gt);
    pred.push_back(pair.pred);
  }
  bkp::save_scenes(args.gt_path, gt, cmap, bkp::SceneSource::kGt);
  bkp::save_scenes(args.pred_path, pred, cmap, bkp::SceneSource::kPrediction);
  return 0;
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

struct DecodeArgs {
  std::string raw_path, out_path, classmap_flag;
  std::string wh_mode = "paper";
  std::string image_id = "image-0";
  double width = 0.0, height = 0.0;
};

int run_decode(const GlobalOpts& g, const DecodeArgs& args) {
  const bkp::ClassMap cmap = resolve_classmap(g, args.classmap_flag);
  const bkp::WhMode mode = args.wh_mode == "doubled" ? bkp::WhMode::kDoubled
                                                     : bkp::WhMode::kPaper;
  if (args.wh_mode != "paper" && args.wh_mode != "doubled")
    throw bkp::ConfigError("--wh-mode must be 'paper' or 'doubled'");

  json effective{{"cmd", "decode"}, {"wh_mode", args.wh_mode},
                 {"classmap", bkp::classmap_to_json(cmap)}};
  print_repro_header(g, "decode", effective);

  bkp::RawDump dump;
  const std::string data = bkp::read_file(args.raw_path);
  if (data.size() >= 8 && data.compare(0, 7, "BKPRAW1") == 0) {
    if (args.width <= 0 || args.height <= 0)
      throw bkp::ConfigError(
          "binary raw dumps need --image-id, --width and --height");
    dump = bkp::raw_dump_from_binary(data, args.raw_path, args.image_id,
                                     args.width, args.height);
  } else {
    dump = bkp::raw_dump_from_json(bkp::parse_json(data, args.raw_path),
                                   args.raw_path);
  }
  if (dump.num_parts != cmap.size())
    throw bkp::ConfigError("raw dump has " + std::to_string(dump.num_parts) +
                           " part classes, class map has " +
                           std::to_string(cmap.size()));

  bkp::ImageDetections det;
  det.image_id = dump.image_id;
  det.width = dump.width;
  det.height = dump.height;
  for (const bkp::RawEntry& e : dump.entries) {
    const bkp::BoundingBox body = bkp::decode_body(e.raw, e.ctx, mode);
    det.bodies.push_back({body, bkp::decode_keypoints(e.raw, e.ctx)});
    const auto parts = bkp::decode_parts(e.raw, e.ctx, body);
    for (size_t p = 0; p < parts.size(); ++p)
      det.parts.push_back(
          {parts[p].box, cmap.parts()[p].id});
  }
  bkp::DetectionsFile file{cmap, {std::move(det)}};
  bkp::write_file(args.out_path,
                  bkp::dump_canonical(bkp::detections_to_json(file)));
  return 0;
}

// ---------------------------------------------------------------------------
// nms
// ---------------------------------------------------------------------------

struct NmsArgs {
  std::string in_path, out_path;
  bkp::NmsConfig cfg;
};

int run_nms(const GlobalOpts& g, const NmsArgs& args) {
  json effective{{"cmd", "nms"},
                 {"tau_conf_body", args.cfg.tau_conf_body},
                 {"tau_iou_body", args.cfg.tau_iou_body},
                 {"tau_conf_part", args.cfg.tau_conf_part},
                 {"tau_iou_part", args.cfg.tau_iou_part}};
  print_repro_header(g, "nms", effective);

  bkp::DetectionsFile file =
      bkp::detections_from_json(bkp::load_json(args.in_path), args.in_path);
  for (bkp::ImageDetections& img : file.images) {
    std::vector<bkp::Candidate> candidates;
    for (const bkp::DetectedBody& b : img.bodies)
      candidates.push_back({b.box, bkp::kPersonClassId});
    const size_t body_count = img.bodies.size();
    for (const bkp::PartDetection& p : img.parts)
      candidates.push_back({p.box, p.class_id});

    const auto keep = bkp::nms_keep_indices(candidates, args.cfg);
    std::vector<bkp::DetectedBody> bodies;
    std::vector<bkp::PartDetection> parts;
    for (size_t idx : keep) {
      if (idx < body_count)
        bodies.push_back(img.bodies[idx]);
      else
        parts.push_back(img.parts[idx - body_count]);
    }
    img.bodies = std::move(bodies);
    img.parts = std::move(parts);
  }
  bkp::write_file(args.out_path,
                  bkp::dump_canonical(bkp::detections_to_json(file)));
  return 0;
}

// ---------------------------------------------------------------------------
// associate
// ---------------------------------------------------------------------------

struct AssocArgs {
  std::string in_path, out_path;
  int max_per_class = 0;
  double max_dist_factor = 0.0;  // 0 disables the guard
};

int run_associate(const GlobalOpts& g, const AssocArgs& args) {
  json effective{{"cmd", "associate"},
                 {"max_per_class", args.max_per_class},
                 {"max_dist_factor", args.max_dist_factor}};
  print_repro_header(g, "associate", effective);

  bkp::AssocConfig cfg;
  cfg.max_per_class = args.max_per_class;
  if (args.max_dist_factor > 0.0) cfg.max_dist_factor = args.max_dist_factor;

  const bkp::DetectionsFile file =
      bkp::detections_from_json(bkp::load_json(args.in_path), args.in_path);
  std::vector<bkp::Scene> scenes;
  for (const bkp::ImageDetections& img : file.images) {
    const auto assoc = bkp::bkp_associate(img.bodies, img.parts, file.cmap, cfg);
    scenes.push_back(
        bkp::to_scene(assoc, img.image_id, img.width, img.height));
  }
  bkp::save_scenes(args.out_path, scenes, file.cmap,
                   bkp::SceneSource::kPrediction);
  return 0;
}

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

struct LossArgs {
  std::string pairs_path, out_path;
  std::string pbox_iou = "ciou";
  std::string area_mode = "squared";
  bkp::LossWeights weights;
};

int run_loss(const GlobalOpts& g, const LossArgs& args) {
  bkp::LossOptions opts;
  if (args.pbox_iou == "iou")
    opts.pbox_iou = bkp::PboxIouMode::kIou;
  else if (args.pbox_iou != "ciou")
    throw bkp::ConfigError("--pbox-iou must be 'ciou' or 'iou'");
  if (args.area_mode == "linear")
    opts.area_mode = bkp::OksAreaMode::kArea;
  else if (args.area_mode != "squared")
    throw bkp::ConfigError("--area-mode must be 'squared' or 'linear'");

  json effective{{"cmd", "loss"},
                 {"pbox_iou", args.pbox_iou},
                 {"area_mode", args.area_mode},
                 {"weights",
                  {{"box", args.weights.box},
                   {"conf", args.weights.conf},
                   {"kpts", args.weights.kpts},
                   {"kconf", args.weights.kconf},
                   {"pbox", args.weights.pbox},
                   {"pconf", args.weights.pconf}}}};
  print_repro_header(g, "loss", effective);

  const bkp::MatchedPairsFile file = bkp::matched_pairs_from_json(
      bkp::load_json(args.pairs_path), args.pairs_path);
  const auto gammas = bkp::gammas_of(file.cmap);
  const auto sigmas = bkp::OksSigmas::coco();

  json out_pairs = json::array();
  bkp::LossComponents mean;
  double mean_total = 0.0;
  for (const bkp::MatchedTarget& t : file.pairs) {
    const bkp::LossComponents c =
        bkp::evaluate_matched(t, sigmas, gammas, opts);
    const double total = bkp::loss_total(c, args.weights);
    out_pairs.push_back(json{{"box", c.box},
                             {"conf", c.conf},
                             {"kpts", c.kpts},
                             {"kconf", c.kconf},
                             {"pbox", c.pbox},
                             {"pconf", c.pconf},
                             {"total", total}});
    mean.box += c.box;
    mean.conf += c.conf;
    mean.kpts += c.kpts;
    mean.kconf += c.kconf;
    mean.pbox += c.pbox;
    mean.pconf += c.pconf;
    mean_total += total;
  }
  const double n = file.pairs.empty() ? 1.0 : double(file.pairs.size());
  json out{{"format", "bkp-losses-v1"},
           {"version", bkp::kVersion},
           {"pairs", out_pairs},
           {"mean",
            {{"box", mean.box / n},
             {"conf", mean.conf / n},
             {"kpts", mean.kpts / n},
             {"kconf", mean.kconf / n},
             {"pbox", mean.pbox / n},
             {"pconf", mean.pconf / n},
             {"total", mean_total / n}}},
           {"weights",
            {{"box", args.weights.box},
             {"conf", args.weights.conf},
             {"kpts", args.weights.kpts},
             {"kconf", args.weights.kconf},
             {"pbox", args.weights.pbox},
             {"pconf", args.weights.pconf},
             {"defaults_version", bkp::LossWeights::kDefaultsVersion}}}};
  const std::string text = bkp::dump_canonical(out);
  if (args.out_path.empty() || args.out_path == "-")
    std::fputs(text.c_str(), stdout);
  else
    bkp::write_file(args.out_path, text);
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string gt_path, pred_path, report_path;
  std::string protocols = "iou,oks";
  std::string bands = "all,tiny,small,medium,large";
  std::string iou_thresholds = "0.5:0.05:0.95";
  std::string oks_thresholds = "0.5:0.05:0.95";
  std::string inner_thresholds = "0.6,0.75";
  int max_dets = 100;
  bool restrict_to_target = false;
  bool traces = false;
  bool table = false;
  bkp::SizeCutoffs cutoffs;
};

int run_eval(const GlobalOpts& g, const EvalArgs& args) {
  const auto gt = bkp::load_scenes(args.gt_path);
  const auto pred = bkp::load_scenes(args.pred_path);

  std::vector<bkp::MatchProtocol> protocols;
  for (const std::string& name : split_csv(args.protocols)) {
    if (name == "iou") {
      for (const std::string& band : split_csv(args.bands))
        protocols.push_back({bkp::Similarity::kIou,
                             parse_thresholds(args.iou_thresholds),
                             band_from_string(band)});
    } else if (name == "oks") {
      protocols.push_back({bkp::Similarity::kOks,
                           parse_thresholds(args.oks_thresholds),
                           bkp::SizeBand::kAll});
    } else if (name == "inner") {
      protocols.push_back({bkp::Similarity::kInnerIou,
                           parse_thresholds(args.inner_thresholds),
                           bkp::SizeBand::kAll});
    } else {
      throw bkp::ConfigError("unknown protocol: " + name);
    }
  }

  bkp::EvalOptions opts;
  opts.max_dets = args.max_dets;
  opts.restrict_to_target = args.restrict_to_target;
  opts.with_traces = args.traces;
  opts.threads = g.threads;
  opts.cutoffs = args.cutoffs;

  json effective{{"cmd", "eval"},
                 {"protocols", args.protocols},
                 {"bands", args.bands},
                 {"iou_thresholds", args.iou_thresholds},
                 {"oks_thresholds", args.oks_thresholds},
                 {"inner_thresholds", args.inner_thresholds},
                 {"max_dets", opts.max_dets},
                 {"restrict_to_target", opts.restrict_to_target},
                 {"cutoffs",
                  {{"tiny", opts.cutoffs.tiny},
                   {"small", opts.cutoffs.small},
                   {"medium", opts.cutoffs.medium}}}};
  print_repro_header(g, "eval", effective);
  const std::string hash = bkp::fnv1a64_hex(bkp::dump_canonical(effective));

  const bkp::EvalReport report =
      bkp::evaluate(gt.scenes, pred.scenes, protocols, gt.cmap,
                    bkp::OksSigmas::coco(), opts);
  bkp::write_file(args.report_path,
                  bkp::dump_canonical(bkp::report_to_json(report, hash)));
  if (args.table) std::fputs(bkp::report_table(report).c_str(), stdout);
  for (const std::string& w : report.warnings)
    std::fprintf(stderr, "warning: %s\n", w.c_str());
  if (g.strict && !report.warnings.empty()) return 1;
  return 0;
}

// ---------------------------------------------------------------------------
// merge
// ---------------------------------------------------------------------------

struct MergeArgs {
  std::string kpts_path, parts_path, out_path;
  std::string kpts_format = "bkp";
  double iou_thresh = 0.9;
};

int run_merge(const GlobalOpts& g, const MergeArgs& args) {
  json effective{{"cmd", "merge"},
                 {"iou_thresh", args.iou_thresh},
                 {"kpts_format", args.kpts_format}};
  print_repro_header(g, "merge", effective);

  std::vector<bkp::Scene> kpts;
  if (args.kpts_format == "coco")
    kpts = bkp::load_coco_keypoints(args.kpts_path);
  else if (args.kpts_format == "bkp")
    kpts = bkp::load_scenes(args.kpts_path).scenes;
  else
    throw bkp::ConfigError("--kpts-format must be 'bkp' or 'coco'");

  const auto parts = bkp::load_scenes(args.parts_path);
  const auto merged =
      bkp::merge_by_person_box(kpts, parts.scenes, args.iou_thresh);
  bkp::save_scenes(args.out_path, merged, parts.cmap, bkp::SceneSource::kGt);
  return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------
// Crowding robustness report: regenerate corpora at each people-per-scene
// level under one fixed noise model, re-associate flattened detections, and
// track conditional accuracy per level.

struct SweepArgs {
  std::string report_path, classmap_flag;
  int scenes_per_level = 500;
  int people_max = 7;
  double arena = 480.0;
  double pose_noise = 18.0;
  double box_jitter = 4.0;
  double occlusion = 0.1;
  bool table = false;
};

int run_sweep(const GlobalOpts& g, const SweepArgs& args) {
  const bkp::ClassMap cmap = resolve_classmap(g, args.classmap_flag);
  json effective{{"cmd", "sweep"},
                 {"seed", g.seed},
                 {"scenes_per_level", args.scenes_per_level},
                 {"people_max", args.people_max},
                 {"arena", args.arena},
                 {"pose_noise", args.pose_noise},
                 {"box_jitter", args.box_jitter},
                 {"occlusion", args.occlusion},
                 {"classmap", bkp::classmap_to_json(cmap)}};
  print_repro_header(g, "sweep", effective);
  const std::string hash = bkp::fnv1a64_hex(bkp::dump_canonical(effective));

  json levels = json::array();
  for (int people = 1; people <= args.people_max; ++people) {
    bkp::SynthConfig cfg;
    cfg.seed = g.seed + static_cast<std::uint64_t>(people) * 1000003ULL;
    cfg.n_scenes = args.scenes_per_level;
    cfg.people_min = cfg.people_max = people;
    cfg.arena_w = cfg.arena_h = args.arena;
    cfg.occlusion_prob = args.occlusion;
    cfg.noise = {args.box_jitter, args.pose_noise, 0.5, 0.99, 0.0, 0.0};

    const auto corpus = bkp::generate_corpus(cfg, cmap);
    std::vector<bkp::Scene> gt, assoc_pred;
    for (const auto& pair : corpus) {
      gt.push_back(pair.gt);
      const auto flat = bkp::flatten_scene(pair.pred);
      const auto assoc = bkp::bkp_associate(flat.bodies, flat.parts, cmap);
      assoc_pred.push_back(bkp::to_scene(assoc, pair.pred.image_id,
                                         pair.pred.width, pair.pred.height));
    }

    long tp = 0, correct = 0;
    json per_class = json::object();
    for (const bkp::PartClass& pc : cmap.parts()) {
      const auto m = bkp::association_metrics(gt, assoc_pred, pc.id);
      tp += m.tp;
      correct += m.correct;
      per_class[pc.name] = m.ca ? json(*m.ca) : json();
    }
    const double pooled =
        tp > 0 ? 100.0 * static_cast<double>(correct) / static_cast<double>(tp)
               : 0.0;
    levels.push_back(json{{"people", people},
                          {"scenes", args.scenes_per_level},
                          {"ca_pooled", pooled},
                          {"tp", tp},
                          {"correct", correct},
                          {"ca_per_class", per_class}});
    if (args.table)
      std::printf("people=%d  CA=%.3f  (tp=%ld)\n", people, pooled, tp);
  }

  json out{{"format", "bkp-sweep-v1"},
           {"version", bkp::kVersion},
           {"config_hash", hash},
           {"seed", g.seed},
           {"levels", levels}};
  bkp::write_file(args.report_path, bkp::dump_canonical(out));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  GlobalOpts g;

  CLI::App app{"body/keypoint/part perception toolkit"};
  app.require_subcommand(1);
  app.add_option("--config", g.config_path, "JSON config file")
      ->envname("BKP_CONFIG");
  app.add_option("--seed", g.seed, "random seed")->envname("BKP_SEED");
  app.add_option("--threads", g.threads, "worker threads (0 = auto)")
      ->envname("BKP_THREADS");
  app.add_flag("--strict", g.strict, "exit nonzero on warnings")
      ->envname("BKP_STRICT");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic corpora");
  synth_cmd->add_option("--gt", synth.gt_path, "output gt scenes")->required();
  synth_cmd->add_option("--pred", synth.pred_path, "output noisy predictions")
      ->required();
  synth_cmd->add_option("--scenes", synth.cfg.n_scenes, "scene count");
  synth_cmd->add_option("--people-min", synth.cfg.people_min, "");
  synth_cmd->add_option("--people-max", synth.cfg.people_max, "");
  synth_cmd->add_option("--arena-w", synth.cfg.arena_w, "");
  synth_cmd->add_option("--arena-h", synth.cfg.arena_h, "");
  synth_cmd->add_option("--occlusion", synth.cfg.occlusion_prob, "");
  synth_cmd->add_option("--box-jitter", synth.cfg.noise.box_jitter, "");
  synth_cmd->add_option("--pose-noise", synth.cfg.noise.pose_noise, "");
  synth_cmd->add_option("--conf-lo", synth.cfg.noise.conf_lo, "");
  synth_cmd->add_option("--conf-hi", synth.cfg.noise.conf_hi, "");
  synth_cmd->add_option("--fp-rate", synth.cfg.noise.fp_rate, "");
  synth_cmd->add_option("--fn-rate", synth.cfg.noise.fn_rate, "");
  synth_cmd->add_option("--classmap", synth.classmap_flag,
                        "bkpd | coco-humanparts | path to classmap JSON");

  DecodeArgs decode;
  auto* decode_cmd =
      app.add_subcommand("decode", "decode a raw prediction dump");
  decode_cmd->add_option("--raw", decode.raw_path, "raw dump (.json or binary)")
      ->required();
  decode_cmd->add_option("--out", decode.out_path, "output detections JSON")
      ->required();
  decode_cmd->add_option("--wh-mode", decode.wh_mode, "paper | doubled");
  decode_cmd->add_option("--image-id", decode.image_id,
                         "image id (binary dumps)");
  decode_cmd->add_option("--width", decode.width, "image width (binary dumps)");
  decode_cmd->add_option("--height", decode.height,
                         "image height (binary dumps)");
  decode_cmd->add_option("--classmap", decode.classmap_flag, "");

  NmsArgs nms;
  auto* nms_cmd = app.add_subcommand("nms", "non-maximum suppression");
  nms_cmd->add_option("--in", nms.in_path, "detections JSON")->required();
  nms_cmd->add_option("--out", nms.out_path, "filtered detections JSON")
      ->required();
  nms_cmd->add_option("--tau-conf-body", nms.cfg.tau_conf_body, "");
  nms_cmd->add_option("--tau-iou-body", nms.cfg.tau_iou_body, "");
  nms_cmd->add_option("--tau-conf-part", nms.cfg.tau_conf_part, "");
  nms_cmd->add_option("--tau-iou-part", nms.cfg.tau_iou_part, "");

  AssocArgs assoc;
  auto* assoc_cmd =
      app.add_subcommand("associate", "attach part detections to bodies");
  assoc_cmd->add_option("--in", assoc.in_path, "detections JSON")->required();
  assoc_cmd->add_option("--out", assoc.out_path, "output scenes JSON")
      ->required();
  assoc_cmd->add_option("--max-per-class", assoc.max_per_class,
                        "cap parts per body and class (0 = unlimited)");
  assoc_cmd->add_option("--max-dist-factor", assoc.max_dist_factor,
                        "unassign beyond factor * body diagonal (0 = off)");

  LossArgs loss;
  auto* loss_cmd = app.add_subcommand("loss", "evaluate loss components");
  loss_cmd->add_option("--pairs", loss.pairs_path, "matched pairs JSON")
      ->required();
  loss_cmd->add_option("--out", loss.out_path, "output JSON ('-' = stdout)");
  loss_cmd->add_option("--pbox-iou", loss.pbox_iou, "ciou | iou");
  loss_cmd->add_option("--area-mode", loss.area_mode, "squared | linear");
  loss_cmd->add_option("--lambda-box", loss.weights.box, "");
  loss_cmd->add_option("--lambda-conf", loss.weights.conf, "");
  loss_cmd->add_option("--lambda-kpts", loss.weights.kpts, "");
  loss_cmd->add_option("--lambda-kconf", loss.weights.kconf, "");
  loss_cmd->add_option("--lambda-pbox", loss.weights.pbox, "");
  loss_cmd->add_option("--lambda-pconf", loss.weights.pconf, "");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "detection/pose/association metrics");
  eval_cmd->add_option("--gt", eval.gt_path, "gt scenes JSON")->required();
  eval_cmd->add_option("--pred", eval.pred_path, "prediction scenes JSON")
      ->required();
  eval_cmd->add_option("--report", eval.report_path, "output report JSON")
      ->required();
  eval_cmd->add_option("--protocols", eval.protocols, "csv of iou,oks,inner");
  eval_cmd->add_option("--bands", eval.bands, "size bands for the iou protocol");
  eval_cmd->add_option("--iou-thresholds", eval.iou_thresholds, "");
  eval_cmd->add_option("--oks-thresholds", eval.oks_thresholds, "");
  eval_cmd->add_option("--inner-thresholds", eval.inner_thresholds, "");
  eval_cmd->add_option("--max-dets", eval.max_dets, "per-image detection cap");
  eval_cmd->add_flag("--restrict-to-target", eval.restrict_to_target,
                     "evaluate each class only on images containing it");
  eval_cmd->add_flag("--traces", eval.traces, "emit per-image matching traces");
  eval_cmd->add_flag("--table", eval.table, "print an aligned text table");
  eval_cmd->add_option("--cutoff-tiny", eval.cutoffs.tiny, "");
  eval_cmd->add_option("--cutoff-small", eval.cutoffs.small, "");
  eval_cmd->add_option("--cutoff-medium", eval.cutoffs.medium, "");

  MergeArgs merge;
  auto* merge_cmd =
      app.add_subcommand("merge", "merge keypoint and part annotations");
  merge_cmd->add_option("--kpts", merge.kpts_path, "keypoints source")
      ->required();
  merge_cmd->add_option("--parts", merge.parts_path, "parts source (bkp scenes)")
      ->required();
  merge_cmd->add_option("--out", merge.out_path, "merged scenes JSON")
      ->required();
  merge_cmd->add_option("--kpts-format", merge.kpts_format, "bkp | coco");
  merge_cmd->add_option("--iou-thresh", merge.iou_thresh,
                        "person box match threshold");

  SweepArgs sweep;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "crowding robustness report (CA vs people)");
  sweep_cmd->add_option("--report", sweep.report_path, "output JSON")->required();
  sweep_cmd->add_option("--scenes-per-level", sweep.scenes_per_level, "");
  sweep_cmd->add_option("--people-max", sweep.people_max, "");
  sweep_cmd->add_option("--arena", sweep.arena, "");
  sweep_cmd->add_option("--pose-noise", sweep.pose_noise, "");
  sweep_cmd->add_option("--box-jitter", sweep.box_jitter, "");
  sweep_cmd->add_option("--occlusion", sweep.occlusion, "");
  sweep_cmd->add_flag("--table", sweep.table, "print per-level CA");
  sweep_cmd->add_option("--classmap", sweep.classmap_flag, "");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (!g.config_path.empty())
      g.config = bkp::load_json(g.config_path);
    else
      g.config = json::object();

    // config-file values for globals apply when neither flag nor env set them
    if (g.config.is_object()) {
      if (app.count("--seed") == 0 && g.config.contains("seed"))
        g.seed = g.config.at("seed").get<std::uint64_t>();
      if (app.count("--threads") == 0 && g.config.contains("threads"))
        g.threads = g.config.at("threads").get<int>();
      if (app.count("--strict") == 0 && g.config.contains("strict"))
        g.strict = g.config.at("strict").get<bool>();
    }

    // config-file sections provide defaults for any flag not given on the
    // command line (flags and BKP_* env vars win)
    auto fill = [](CLI::App* cmd, const json& section, const char* flag,
                   const char* key, auto* dst) {
      if (cmd->count(flag) == 0 && section.contains(key))
        *dst = section.at(key)
                   .get<typename std::remove_pointer<decltype(dst)>::type>();
    };

    if (synth_cmd->parsed()) {
      const json s = config_section(g, "synth");
      fill(synth_cmd, s, "--scenes", "scenes", &synth.cfg.n_scenes);
      fill(synth_cmd, s, "--people-min", "people_min", &synth.cfg.people_min);
      fill(synth_cmd, s, "--people-max", "people_max", &synth.cfg.people_max);
      fill(synth_cmd, s, "--arena-w", "arena_w", &synth.cfg.arena_w);
      fill(synth_cmd, s, "--arena-h", "arena_h", &synth.cfg.arena_h);
      fill(synth_cmd, s, "--occlusion", "occlusion", &synth.cfg.occlusion_prob);
      fill(synth_cmd, s, "--box-jitter", "box_jitter", &synth.cfg.noise.box_jitter);
      fill(synth_cmd, s, "--pose-noise", "pose_noise", &synth.cfg.noise.pose_noise);
      fill(synth_cmd, s, "--conf-lo", "conf_lo", &synth.cfg.noise.conf_lo);
      fill(synth_cmd, s, "--conf-hi", "conf_hi", &synth.cfg.noise.conf_hi);
      fill(synth_cmd, s, "--fp-rate", "fp_rate", &synth.cfg.noise.fp_rate);
      fill(synth_cmd, s, "--fn-rate", "fn_rate", &synth.cfg.noise.fn_rate);
      if (s.contains("part_rules")) {
        for (auto it = s.at("part_rules").begin(); it != s.at("part_rules").end();
             ++it)
          synth.cfg.part_rules[it.key()] = {
              it.value().value("dilate", synth.cfg.default_rule.dilate),
              it.value().value("min_frac", synth.cfg.default_rule.min_frac)};
      }
      return run_synth(g, synth);
    }
    if (decode_cmd->parsed()) {
      const json s = config_section(g, "decode");
      fill(decode_cmd, s, "--wh-mode", "wh_mode", &decode.wh_mode);
      return run_decode(g, decode);
    }
    if (nms_cmd->parsed()) {
      const json s = config_section(g, "nms");
      fill(nms_cmd, s, "--tau-conf-body", "tau_conf_body", &nms.cfg.tau_conf_body);
      fill(nms_cmd, s, "--tau-iou-body", "tau_iou_body", &nms.cfg.tau_iou_body);
      fill(nms_cmd, s, "--tau-conf-part", "tau_conf_part", &nms.cfg.tau_conf_part);
      fill(nms_cmd, s, "--tau-iou-part", "tau_iou_part", &nms.cfg.tau_iou_part);
      return run_nms(g, nms);
    }
    if (assoc_cmd->parsed()) {
      const json s = config_section(g, "assoc");
      fill(assoc_cmd, s, "--max-per-class", "max_per_class", &assoc.max_per_class);
      fill(assoc_cmd, s, "--max-dist-factor", "max_dist_factor",
           &assoc.max_dist_factor);
      return run_associate(g, assoc);
    }
    if (loss_cmd->parsed()) {
      const json s = config_section(g, "loss");
      fill(loss_cmd, s, "--pbox-iou", "pbox_iou", &loss.pbox_iou);
      fill(loss_cmd, s, "--area-mode", "area_mode", &loss.area_mode);
      const json w = s.contains("weights") ? s.at("weights") : json::object();
      fill(loss_cmd, w, "--lambda-box", "box", &loss.weights.box);
      fill(loss_cmd, w, "--lambda-conf", "conf", &loss.weights.conf);
      fill(loss_cmd, w, "--lambda-kpts", "kpts", &loss.weights.kpts);
      fill(loss_cmd, w, "--lambda-kconf", "kconf", &loss.weights.kconf);
      fill(loss_cmd, w, "--lambda-pbox", "pbox", &loss.weights.pbox);
      fill(loss_cmd, w, "--lambda-pconf", "pconf", &loss.weights.pconf);
      return run_loss(g, loss);
    }
    if (eval_cmd->parsed()) {
      const json s = config_section(g, "eval");
      fill(eval_cmd, s, "--protocols", "protocols", &eval.protocols);
      fill(eval_cmd, s, "--bands", "bands", &eval.bands);
      fill(eval_cmd, s, "--iou-thresholds", "iou_thresholds", &eval.iou_thresholds);
      fill(eval_cmd, s, "--oks-thresholds", "oks_thresholds", &eval.oks_thresholds);
      fill(eval_cmd, s, "--inner-thresholds", "inner_thresholds",
           &eval.inner_thresholds);
      fill(eval_cmd, s, "--max-dets", "max_dets", &eval.max_dets);
      fill(eval_cmd, s, "--restrict-to-target", "restrict_to_target",
           &eval.restrict_to_target);
      fill(eval_cmd, s, "--cutoff-tiny", "cutoff_tiny", &eval.cutoffs.tiny);
      fill(eval_cmd, s, "--cutoff-small", "cutoff_small", &eval.cutoffs.small);
      fill(eval_cmd, s, "--cutoff-medium", "cutoff_medium", &eval.cutoffs.medium);
      return run_eval(g, eval);
    }
    if (merge_cmd->parsed()) {
      const json s = config_section(g, "merge");
      fill(merge_cmd, s, "--iou-thresh", "iou_thresh", &merge.iou_thresh);
      fill(merge_cmd, s, "--kpts-format", "kpts_format", &merge.kpts_format);
      return run_merge(g, merge);
    }
    if (sweep_cmd->parsed()) {
      const json s = config_section(g, "sweep");
      fill(sweep_cmd, s, "--scenes-per-level", "scenes_per_level",
           &sweep.scenes_per_level);
      fill(sweep_cmd, s, "--people-max", "people_max", &sweep.people_max);
      fill(sweep_cmd, s, "--arena", "arena", &sweep.arena);
      fill(sweep_cmd, s, "--pose-noise", "pose_noise", &sweep.pose_noise);
      fill(sweep_cmd, s, "--box-jitter", "box_jitter", &sweep.box_jitter);
      fill(sweep_cmd, s, "--occlusion", "occlusion", &sweep.occlusion);
      return run_sweep(g, sweep);
    }
    std::cerr << app.help();
    return 2;
  } catch (const bkp::Error& e) {
    json err{{"error", {{"kind", e.kind()}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err{{"error", {{"kind", "internal"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
