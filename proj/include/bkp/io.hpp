#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bkp/associate.hpp"
#include "bkp/core.hpp"
#include "bkp/decode.hpp"
#include "bkp/eval_types.hpp"
#include "bkp/geometry.hpp"
#include "bkp/loss.hpp"
#include "bkp/version.hpp"

namespace bkp {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Canonical JSON output
// ---------------------------------------------------------------------------
// Files must be byte-reproducible: keys are sorted (nlohmann objects iterate
// in key order) and every float prints with %.9g. Values survive a
// print/parse/print cycle unchanged, so save(load(file)) is a fixed point.

namespace io_detail {

inline void dump_canonical_rec(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        dump_canonical_rec(it.value(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        dump_canonical_rec(j[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v))
        throw InvariantError("canonical dump: non-finite number");
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.9g", v);
      out += buf;
      break;
    }
    default:
      out += j.dump();
  }
}

}  // namespace io_detail

inline std::string dump_canonical(const json& j) {
  std::string out;
  io_detail::dump_canonical_rec(j, out);
  out += '\n';
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out << data;
  if (!out) throw Error("short write: " + path);
}

inline json parse_json(const std::string& text, const std::string& origin) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed JSON in " + origin);
  return j;
}

inline json load_json(const std::string& path) {
  return parse_json(read_file(path), path);
}

// ---------------------------------------------------------------------------
// Class map block
// ---------------------------------------------------------------------------

inline const char* to_string(ClassMapMode m) {
  switch (m) {
    case ClassMapMode::kCocoHumanParts: return "coco-humanparts";
    case ClassMapMode::kBkpd: return "bkpd";
    case ClassMapMode::kCustom: return "custom";
  }
  return "?";
}

inline ClassMapMode classmap_mode_from_string(const std::string& s) {
  if (s == "coco-humanparts") return ClassMapMode::kCocoHumanParts;
  if (s == "bkpd") return ClassMapMode::kBkpd;
  if (s == "custom") return ClassMapMode::kCustom;
  throw ConfigError("unknown classmap mode: " + s);
}

inline json classmap_to_json(const ClassMap& cmap) {
  json parts = json::array();
  for (const PartClass& pc : cmap.parts()) {
    json p;
    p["id"] = pc.id;
    p["name"] = pc.name;
    p["keypoints"] = pc.keypoint_indices;
    p["gamma"] = pc.oks_weight;
    parts.push_back(p);
  }
  return json{{"mode", to_string(cmap.mode())}, {"parts", parts}};
}

inline ClassMap classmap_from_json(const json& j) {
  if (!j.is_object() || !j.contains("mode"))
    throw ParseError("classmap: missing 'mode'");
  const ClassMapMode mode = classmap_mode_from_string(j.at("mode"));
  if (!j.contains("parts")) {
    // bare builtin reference
    return classmap_builtin(mode);
  }
  std::vector<PartClass> parts;
  for (const json& p : j.at("parts")) {
    parts.emplace_back(p.at("id").get<int>(), p.at("name").get<std::string>(),
                       p.at("keypoints").get<std::vector<int>>(),
                       p.at("gamma").get<double>());
  }
  return ClassMap(std::move(parts), mode);
}

// ---------------------------------------------------------------------------
// Scene files (hierarchical annotations)
// ---------------------------------------------------------------------------
// {
//   "format": "bkp-scenes-v1",
//   "source": "gt" | "prediction" | "synthetic",
//   "classmap": { ... },
//   "images": [ {"id", "width", "height"} ],
//   "people": [ {"image_id", "body": [x1,y1,x2,y2,conf],
//                "keypoints": [51 numbers]?,         // x,y,v per joint
//                "parts": {"head": [[x1,y1,x2,y2,conf], ...]}} ],
//   "unassigned": [ {"image_id", "class", "box": [x1,y1,x2,y2,conf]} ]
// }
// Boxes are corner-form in files, center-form in memory; all boxes are
// clamped to the image on load.

inline const char* to_string(SceneSource s) {
  switch (s) {
    case SceneSource::kGt: return "gt";
    case SceneSource::kPrediction: return "prediction";
    case SceneSource::kSynthetic: return "synthetic";
  }
  return "?";
}

inline SceneSource scene_source_from_string(const std::string& s) {
  if (s == "gt") return SceneSource::kGt;
  if (s == "prediction") return SceneSource::kPrediction;
  if (s == "synthetic") return SceneSource::kSynthetic;
  throw ParseError("unknown scene source: " + s);
}

namespace io_detail {

inline json box_to_json(const BoundingBox& b) {
  return json::array({b.x1(), b.y1(), b.x2(), b.y2(), b.conf()});
}

inline BoundingBox box_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || (j.size() != 4 && j.size() != 5))
    throw ParseError(where + ": box must be [x1,y1,x2,y2] or [x1,y1,x2,y2,conf]");
  const double conf = j.size() == 5 ? j[4].get<double>() : 1.0;
  try {
    return BoundingBox::from_corners(j[0].get<double>(), j[1].get<double>(),
                                     j[2].get<double>(), j[3].get<double>(),
                                     conf);
  } catch (const InvariantError& e) {
    throw ParseError(where + ": " + e.what());
  }
}

inline json skeleton_to_json(const Skeleton& s) {
  json arr = json::array();
  for (const Keypoint& kp : s.keypoints) {
    arr.push_back(kp.x);
    arr.push_back(kp.y);
    arr.push_back(static_cast<double>(static_cast<int>(kp.v)));
  }
  return arr;
}

inline Skeleton skeleton_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3 * kNumKeypoints)
    throw ParseError(where + ": keypoints must hold exactly 51 numbers");
  Skeleton s;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const double x = j[static_cast<size_t>(3 * k)].get<double>();
    const double y = j[static_cast<size_t>(3 * k + 1)].get<double>();
    const int v = j[static_cast<size_t>(3 * k + 2)].get<int>();
    if (v < 0 || v > 2)
      throw ParseError(where + ": keypoint visibility must be 0, 1, or 2");
    s[k] = {v == 0 ? 0.0 : x, v == 0 ? 0.0 : y, static_cast<Visibility>(v)};
  }
  return s;
}

}  // namespace io_detail

inline json scenes_to_json(std::span<const Scene> scenes, const ClassMap& cmap,
                           SceneSource source) {
  using namespace io_detail;
  json images = json::array();
  json people = json::array();
  json unassigned = json::array();
  for (const Scene& scene : scenes) {
    images.push_back(json{{"id", scene.image_id},
                          {"width", scene.width},
                          {"height", scene.height}});
    for (const PersonInstance& person : scene.people) {
      json p;
      p["image_id"] = scene.image_id;
      p["body"] = box_to_json(person.body);
      if (person.skeleton) p["keypoints"] = skeleton_to_json(*person.skeleton);
      json parts = json::object();
      for (const auto& [class_id, boxes] : person.parts) {
        if (boxes.empty()) continue;  // canonical form has no empty lists
        json list = json::array();
        for (const BoundingBox& b : boxes) list.push_back(box_to_json(b));
        parts[cmap.at(class_id).name] = list;
      }
      p["parts"] = parts;
      people.push_back(p);
    }
    for (const auto& [class_id, boxes] : scene.unassigned_parts)
      for (const BoundingBox& b : boxes)
        unassigned.push_back(json{{"image_id", scene.image_id},
                                  {"class", cmap.at(class_id).name},
                                  {"box", box_to_json(b)}});
  }
  json out;
  out["format"] = "bkp-scenes-v1";
  out["source"] = to_string(source);
  out["classmap"] = classmap_to_json(cmap);
  out["images"] = images;
  out["people"] = people;
  if (!unassigned.empty()) out["unassigned"] = unassigned;
  return out;
}

struct LoadedScenes {
  std::vector<Scene> scenes;
  ClassMap cmap;
  SceneSource source;
};

inline LoadedScenes scenes_from_json(const json& j, const std::string& origin) {
  using namespace io_detail;
  if (!j.is_object() || j.value("format", "") != "bkp-scenes-v1")
    throw ParseError(origin + ": not a bkp-scenes-v1 file");
  ClassMap cmap = classmap_from_json(j.at("classmap"));
  const SceneSource source =
      scene_source_from_string(j.value("source", "gt"));

  std::vector<Scene> scenes;
  std::map<std::string, size_t> index;
  for (const json& img : j.at("images")) {
    Scene s;
    s.image_id = img.at("id").get<std::string>();
    s.width = img.at("width").get<double>();
    s.height = img.at("height").get<double>();
    s.source = source;
    if (index.count(s.image_id))
      throw ParseError(origin + ": duplicate image id " + s.image_id);
    index[s.image_id] = scenes.size();
    scenes.push_back(std::move(s));
  }

  for (const json& p : j.at("people")) {
    const std::string image_id = p.at("image_id").get<std::string>();
    auto it = index.find(image_id);
    if (it == index.end())
      throw ParseError(origin + ": person references unknown image " + image_id);
    Scene& scene = scenes[it->second];
    const std::string where = origin + " (person in " + image_id + ")";
    PersonInstance person(
        box_from_json(p.at("body"), where).clamped(scene.width, scene.height));
    if (p.contains("keypoints"))
      person.skeleton = skeleton_from_json(p.at("keypoints"), where);
    if (p.contains("parts")) {
      for (auto it2 = p.at("parts").begin(); it2 != p.at("parts").end(); ++it2) {
        const PartClass* pc = cmap.find(it2.key());
        if (!pc) throw ParseError(where + ": unknown part class " + it2.key());
        for (const json& b : it2.value())
          person.parts[pc->id].push_back(
              box_from_json(b, where).clamped(scene.width, scene.height));
      }
    }
    scene.people.push_back(std::move(person));
  }

  if (j.contains("unassigned")) {
    for (const json& u : j.at("unassigned")) {
      const std::string image_id = u.at("image_id").get<std::string>();
      auto it = index.find(image_id);
      if (it == index.end())
        throw ParseError(origin + ": unassigned part references unknown image " +
                         image_id);
      Scene& scene = scenes[it->second];
      const PartClass* pc = cmap.find(u.at("class").get<std::string>());
      if (!pc)
        throw ParseError(origin + ": unknown part class in unassigned block");
      scene.unassigned_parts[pc->id].push_back(
          box_from_json(u.at("box"), origin + " (unassigned)")
              .clamped(scene.width, scene.height));
    }
  }
  return {std::move(scenes), std::move(cmap), source};
}

inline void save_scenes(const std::string& path, std::span<const Scene> scenes,
                        const ClassMap& cmap, SceneSource source) {
  write_file(path, dump_canonical(scenes_to_json(scenes, cmap, source)));
}

inline LoadedScenes load_scenes(const std::string& path) {
  return scenes_from_json(load_json(path), path);
}

// ---------------------------------------------------------------------------
// COCO keypoints ingestion
// ---------------------------------------------------------------------------

/// Load a COCO-keypoints style file into scenes (skeletons, no parts).
/// People with num_keypoints == 0 or all-zero keypoint triplets come back
/// skeleton-absent.
inline std::vector<Scene> load_coco_keypoints(const std::string& path) {
  const json j = load_json(path);
  if (!j.contains("images") || !j.contains("annotations"))
    throw ParseError(path + ": missing 'images' or 'annotations'");

  int person_cat = 1;
  if (j.contains("categories"))
    for (const json& c : j.at("categories"))
      if (c.value("name", "") == "person") person_cat = c.value("id", 1);

  std::vector<Scene> scenes;
  std::map<std::string, size_t> index;
  for (const json& img : j.at("images")) {
    if (!img.contains("id") || !img.contains("width") || !img.contains("height"))
      throw ParseError(path + ": image record missing id/width/height");
    Scene s;
    s.image_id = img.at("id").is_string()
                     ? img.at("id").get<std::string>()
                     : std::to_string(img.at("id").get<long long>());
    s.width = img.at("width").get<double>();
    s.height = img.at("height").get<double>();
    s.source = SceneSource::kGt;
    index[s.image_id] = scenes.size();
    scenes.push_back(std::move(s));
  }

  for (const json& a : j.at("annotations")) {
    const std::string ann_id =
        a.contains("id") ? a.at("id").dump() : "<no id>";
    if (a.contains("category_id") && a.at("category_id").get<int>() != person_cat)
      continue;
    if (!a.contains("image_id") || !a.contains("bbox"))
      throw ParseError(path + ": annotation " + ann_id +
                       " missing image_id/bbox");
    const std::string image_id =
        a.at("image_id").is_string()
            ? a.at("image_id").get<std::string>()
            : std::to_string(a.at("image_id").get<long long>());
    auto it = index.find(image_id);
    if (it == index.end())
      throw ParseError(path + ": annotation " + ann_id +
                       " references unknown image " + image_id);
    Scene& scene = scenes[it->second];

    const json& bb = a.at("bbox");
    if (!bb.is_array() || bb.size() != 4)
      throw ParseError(path + ": annotation " + ann_id + " has malformed bbox");
    const double x = bb[0].get<double>(), y = bb[1].get<double>();
    const double w = bb[2].get<double>(), h = bb[3].get<double>();
    if (!(w > 0.0 && h > 0.0))
      throw ParseError(path + ": annotation " + ann_id + " has empty bbox");
    PersonInstance person(BoundingBox::from_corners(x, y, x + w, y + h)
                              .clamped(scene.width, scene.height));

    const int num_kpts = a.value("num_keypoints", -1);
    if (a.contains("keypoints") && num_kpts != 0) {
      const Skeleton s = io_detail::skeleton_from_json(
          a.at("keypoints"), path + ": annotation " + ann_id);
      if (s.labeled_count() > 0) person.skeleton = s;
    }
    scene.people.push_back(std::move(person));
  }
  return scenes;
}

// ---------------------------------------------------------------------------
// Dataset merging
// ---------------------------------------------------------------------------

/// Merge a keypoints-only scene set with a parts-only scene set by greedy
/// highest-IoU one-to-one matching of person boxes at or above iou_thresh.
/// Matched pairs keep the keypoint source's box and skeleton plus the part
/// source's part boxes; unmatched people carry through from both sides.
inline std::vector<Scene> merge_by_person_box(std::span<const Scene> kpts,
                                              std::span<const Scene> parts,
                                              double iou_thresh = 0.9) {
  if (!(iou_thresh > 0.0 && iou_thresh <= 1.0))
    throw ConfigError("merge_by_person_box: iou_thresh must be in (0,1]");

  std::map<std::string, const Scene*> kpts_by_id, parts_by_id;
  for (const Scene& s : kpts) kpts_by_id[s.image_id] = &s;
  for (const Scene& s : parts) parts_by_id[s.image_id] = &s;

  std::map<std::string, int> ids;  // union, ordered
  for (const auto& [id, s] : kpts_by_id) ids[id] = 0;
  for (const auto& [id, s] : parts_by_id) ids[id] = 0;

  std::vector<Scene> out;
  for (const auto& [id, unused] : ids) {
    const Scene* ks = kpts_by_id.count(id) ? kpts_by_id.at(id) : nullptr;
    const Scene* ps = parts_by_id.count(id) ? parts_by_id.at(id) : nullptr;
    if (!ks || !ps) {
      out.push_back(ks ? *ks : *ps);
      continue;
    }

    struct Pair {
      double iou_value;
      size_t k, p;
    };
    std::vector<Pair> pairs;
    for (size_t ki = 0; ki < ks->people.size(); ++ki)
      for (size_t pi = 0; pi < ps->people.size(); ++pi) {
        const double v = iou(ks->people[ki].body, ps->people[pi].body);
        if (v >= iou_thresh) pairs.push_back({v, ki, pi});
      }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      return std::make_tuple(-a.iou_value, a.k, a.p) <
             std::make_tuple(-b.iou_value, b.k, b.p);
    });

    std::vector<int> k_match(ks->people.size(), -1);
    std::vector<int> p_match(ps->people.size(), -1);
    for (const Pair& pr : pairs) {
      if (k_match[pr.k] >= 0 || p_match[pr.p] >= 0) continue;
      k_match[pr.k] = static_cast<int>(pr.p);
      p_match[pr.p] = static_cast<int>(pr.k);
    }

    Scene merged;
    merged.image_id = id;
    merged.width = ks->width;
    merged.height = ks->height;
    merged.source = SceneSource::kGt;
    for (size_t ki = 0; ki < ks->people.size(); ++ki) {
      PersonInstance person = ks->people[ki];  // keypoint-source box wins
      if (k_match[ki] >= 0)
        person.parts = ps->people[static_cast<size_t>(k_match[ki])].parts;
      merged.people.push_back(std::move(person));
    }
    for (size_t pi = 0; pi < ps->people.size(); ++pi)
      if (p_match[pi] < 0) merged.people.push_back(ps->people[pi]);
    out.push_back(std::move(merged));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Detections files (decode -> nms -> associate pipeline)
// ---------------------------------------------------------------------------
// {
//   "format": "bkp-detections-v1",
//   "classmap": { ... },
//   "images": [ {"id", "width", "height",
//                "bodies": [{"box": [...,conf], "keypoints": [51]?}],
//                "parts": [{"class": "head", "box": [...,conf]}]} ]
// }

struct ImageDetections {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<DetectedBody> bodies;
  std::vector<PartDetection> parts;
};

struct DetectionsFile {
  ClassMap cmap;
  std::vector<ImageDetections> images;
};

inline json detections_to_json(const DetectionsFile& file) {
  using namespace io_detail;
  json images = json::array();
  for (const ImageDetections& img : file.images) {
    json bodies = json::array();
    for (const DetectedBody& b : img.bodies) {
      json jb;
      jb["box"] = box_to_json(b.box);
      jb["keypoints"] = skeleton_to_json(b.skeleton);
      bodies.push_back(jb);
    }
    json parts = json::array();
    for (const PartDetection& p : img.parts)
      parts.push_back(json{{"class", file.cmap.at(p.class_id).name},
                           {"box", box_to_json(p.box)}});
    images.push_back(json{{"id", img.image_id},
                          {"width", img.width},
                          {"height", img.height},
                          {"bodies", bodies},
                          {"parts", parts}});
  }
  return json{{"format", "bkp-detections-v1"},
              {"classmap", classmap_to_json(file.cmap)},
              {"images", images}};
}

inline DetectionsFile detections_from_json(const json& j,
                                           const std::string& origin) {
  using namespace io_detail;
  if (!j.is_object() || j.value("format", "") != "bkp-detections-v1")
    throw ParseError(origin + ": not a bkp-detections-v1 file");
  DetectionsFile file{classmap_from_json(j.at("classmap")), {}};
  for (const json& img : j.at("images")) {
    ImageDetections det;
    det.image_id = img.at("id").get<std::string>();
    det.width = img.at("width").get<double>();
    det.height = img.at("height").get<double>();
    const std::string where = origin + " (image " + det.image_id + ")";
    for (const json& b : img.value("bodies", json::array())) {
      DetectedBody body{box_from_json(b.at("box"), where), Skeleton{}};
      if (b.contains("keypoints"))
        body.skeleton = skeleton_from_json(b.at("keypoints"), where);
      det.bodies.push_back(std::move(body));
    }
    for (const json& p : img.value("parts", json::array())) {
      const PartClass* pc = file.cmap.find(p.at("class").get<std::string>());
      if (!pc) throw ParseError(where + ": unknown part class");
      det.parts.push_back({box_from_json(p.at("box"), where), pc->id});
    }
    file.images.push_back(std::move(det));
  }
  return file;
}

// ---------------------------------------------------------------------------
// Raw prediction dumps
// ---------------------------------------------------------------------------
// JSON: { "format": "bkp-raw-v1", "image": {"id","width","height"},
//         "num_parts": p,
//         "entries": [ {"grid": [gx,gy], "stride": s, "anchor": [aw,ah],
//                       "values": [5 + 51 + 5p raw floats]} ] }
// Binary: magic "BKPRAW1\n", then uint32 LE num_parts, uint32 LE num_entries,
// then per entry 4 + 5 + 51 + 5p float64 LE: gx, gy, stride, anchor_w,
// anchor_h ... wait, 5 header doubles (gx, gy, stride, aw, ah) followed by
// the values in the field order documented in decode.hpp.

struct RawEntry {
  GridContext ctx;
  RawPrediction raw;
};

struct RawDump {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  size_t num_parts = 0;
  std::vector<RawEntry> entries;
};

namespace io_detail {

inline RawPrediction raw_from_values(std::span<const double> v, size_t p,
                                     const std::string& where) {
  if (v.size() != 5 + 3 * kNumKeypoints + 5 * p)
    throw ParseError(where + ": wrong raw vector length");
  RawPrediction raw;
  size_t i = 0;
  for (auto& x : raw.body) x = v[i++];
  for (auto& kp : raw.kpts)
    for (auto& x : kp) x = v[i++];
  raw.parts.resize(p);
  for (auto& part : raw.parts)
    for (auto& x : part) x = v[i++];
  return raw;
}

inline std::vector<double> raw_to_values(const RawPrediction& raw) {
  std::vector<double> v;
  v.insert(v.end(), raw.body.begin(), raw.body.end());
  for (const auto& kp : raw.kpts) v.insert(v.end(), kp.begin(), kp.end());
  for (const auto& part : raw.parts) v.insert(v.end(), part.begin(), part.end());
  return v;
}

inline constexpr char kRawMagic[8] = {'B', 'K', 'P', 'R', 'A', 'W', '1', '\n'};

}  // namespace io_detail

inline RawDump raw_dump_from_json(const json& j, const std::string& origin) {
  if (!j.is_object() || j.value("format", "") != "bkp-raw-v1")
    throw ParseError(origin + ": not a bkp-raw-v1 file");
  RawDump dump;
  const json& img = j.at("image");
  dump.image_id = img.at("id").get<std::string>();
  dump.width = img.at("width").get<double>();
  dump.height = img.at("height").get<double>();
  dump.num_parts = j.at("num_parts").get<size_t>();
  for (const json& e : j.at("entries")) {
    const auto values = e.at("values").get<std::vector<double>>();
    GridContext ctx(e.at("grid")[0].get<double>(), e.at("grid")[1].get<double>(),
                    e.at("stride").get<double>(),
                    e.at("anchor")[0].get<double>(),
                    e.at("anchor")[1].get<double>());
    dump.entries.push_back(
        {ctx, io_detail::raw_from_values(values, dump.num_parts, origin)});
  }
  return dump;
}

inline json raw_dump_to_json(const RawDump& dump) {
  json entries = json::array();
  for (const RawEntry& e : dump.entries) {
    entries.push_back(json{{"grid", {e.ctx.grid_x, e.ctx.grid_y}},
                           {"stride", e.ctx.stride},
                           {"anchor", {e.ctx.anchor_w, e.ctx.anchor_h}},
                           {"values", io_detail::raw_to_values(e.raw)}});
  }
  return json{{"format", "bkp-raw-v1"},
              {"image", json{{"id", dump.image_id},
                             {"width", dump.width},
                             {"height", dump.height}}},
              {"num_parts", dump.num_parts},
              {"entries", entries}};
}

inline RawDump raw_dump_from_binary(const std::string& data,
                                    const std::string& origin,
                                    std::string image_id, double width,
                                    double height) {
  using namespace io_detail;
  if (data.size() < 16 || std::memcmp(data.data(), kRawMagic, 8) != 0)
    throw ParseError(origin + ": bad raw dump magic");
  std::uint32_t num_parts = 0, num_entries = 0;
  std::memcpy(&num_parts, data.data() + 8, 4);
  std::memcpy(&num_entries, data.data() + 12, 4);
  const size_t per_entry = 5 + 5 + 3 * kNumKeypoints + 5 * num_parts;
  if (data.size() != 16 + 8 * per_entry * num_entries)
    throw ParseError(origin + ": truncated raw dump");

  RawDump dump;
  dump.image_id = std::move(image_id);
  dump.width = width;
  dump.height = height;
  dump.num_parts = num_parts;
  const char* cursor = data.data() + 16;
  for (std::uint32_t e = 0; e < num_entries; ++e) {
    std::vector<double> v(per_entry);
    std::memcpy(v.data(), cursor, 8 * per_entry);
    cursor += 8 * per_entry;
    GridContext ctx(v[0], v[1], v[2], v[3], v[4]);
    dump.entries.push_back(
        {ctx, raw_from_values(std::span(v).subspan(5), num_parts, origin)});
  }
  return dump;
}

inline std::string raw_dump_to_binary(const RawDump& dump) {
  using namespace io_detail;
  std::string out(kRawMagic, 8);
  const std::uint32_t num_parts = static_cast<std::uint32_t>(dump.num_parts);
  const std::uint32_t num_entries =
      static_cast<std::uint32_t>(dump.entries.size());
  out.append(reinterpret_cast<const char*>(&num_parts), 4);
  out.append(reinterpret_cast<const char*>(&num_entries), 4);
  for (const RawEntry& e : dump.entries) {
    std::vector<double> v{e.ctx.grid_x, e.ctx.grid_y, e.ctx.stride,
                          e.ctx.anchor_w, e.ctx.anchor_h};
    const auto values = raw_to_values(e.raw);
    v.insert(v.end(), values.begin(), values.end());
    out.append(reinterpret_cast<const char*>(v.data()), 8 * v.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matched-pairs files (loss evaluation)
// ---------------------------------------------------------------------------
// {
//   "format": "bkp-pairs-v1",
//   "classmap": { ... },
//   "pairs": [ {
//     "gt":   {"box": [x1,y1,x2,y2], "keypoints": [51]?,
//              "parts": {"head": [x1,y1,x2,y2], ...}},   // absent = invisible
//     "pred": {"box": [x1,y1,x2,y2,conf], "keypoints": [51]?,
//              "kpt_conf": [17]?,
//              "parts": {"head": [x1,y1,x2,y2,conf], ...}},  // every class
//     "level": 0, "grid": [i, j], "anchor": 0        // optional metadata
//   } ]
// }

struct MatchedPairsFile {
  ClassMap cmap;
  std::vector<MatchedTarget> pairs;
};

inline MatchedPairsFile matched_pairs_from_json(const json& j,
                                                const std::string& origin) {
  using namespace io_detail;
  if (!j.is_object() || j.value("format", "") != "bkp-pairs-v1")
    throw ParseError(origin + ": not a bkp-pairs-v1 file");
  MatchedPairsFile file{classmap_from_json(j.at("classmap")), {}};
  const auto& classes = file.cmap.parts();

  size_t n = 0;
  for (const json& p : j.at("pairs")) {
    const std::string where = origin + " (pair " + std::to_string(n++) + ")";
    const json& gt = p.at("gt");
    const json& pred = p.at("pred");

    MatchedTarget t{box_from_json(gt.at("box"), where),
                    std::nullopt,
                    {},
                    box_from_json(pred.at("box"), where),
                    std::nullopt,
                    {},
                    {}};
    if (gt.contains("keypoints"))
      t.gt_skeleton = skeleton_from_json(gt.at("keypoints"), where);
    if (pred.contains("keypoints"))
      t.pred_skeleton = skeleton_from_json(pred.at("keypoints"), where);
    if (pred.contains("kpt_conf")) {
      t.pred_kpt_conf = pred.at("kpt_conf").get<std::vector<double>>();
      if (t.pred_kpt_conf.size() != kNumKeypoints)
        throw ParseError(where + ": kpt_conf must hold 17 values");
    }

    const json gt_parts = gt.value("parts", json::object());
    const json pred_parts = pred.value("parts", json::object());
    for (const PartClass& pc : classes) {
      if (gt_parts.contains(pc.name) && !gt_parts.at(pc.name).is_null())
        t.gt_parts.push_back(box_from_json(gt_parts.at(pc.name), where));
      else
        t.gt_parts.push_back(std::nullopt);
      if (!pred_parts.contains(pc.name))
        throw ParseError(where + ": pred is missing part class '" + pc.name +
                         "'");
      t.pred_parts.push_back(box_from_json(pred_parts.at(pc.name), where));
    }

    t.level = p.value("level", 0);
    if (p.contains("grid")) {
      t.grid_i = p.at("grid")[0].get<int>();
      t.grid_j = p.at("grid")[1].get<int>();
    }
    t.anchor = p.value("anchor", 0);
    file.pairs.push_back(std::move(t));
  }
  return file;
}

inline std::vector<double> gammas_of(const ClassMap& cmap) {
  std::vector<double> g;
  for (const PartClass& pc : cmap.parts()) g.push_back(pc.oks_weight);
  return g;
}

// ---------------------------------------------------------------------------
// Evaluation reports
// ---------------------------------------------------------------------------

inline json report_to_json(const EvalReport& report,
                           const std::string& config_hash) {
  json rows = json::array();
  std::map<std::string, std::pair<std::vector<std::optional<double>>,
                                  std::vector<std::optional<double>>>>
      by_protocol;
  for (const ClassProtocolRow& r : report.rows) {
    json row;
    row["protocol"] = json{{"sim", to_string(r.protocol.sim)},
                           {"thresholds", r.protocol.thresholds},
                           {"band", to_string(r.protocol.band)}};
    row["label"] = r.protocol.label();
    row["class"] = r.class_name;
    row["class_id"] = r.class_id;
    row["n_gt"] = r.n_gt;
    row["n_pred"] = r.n_pred;
    row["ap"] = r.ap ? json(*r.ap) : json();
    row["ar"] = r.ar ? json(*r.ar) : json();
    row["ap_by_threshold"] = r.ap_by_threshold;
    row["ar_by_threshold"] = r.ar_by_threshold;
    row["tp"] = r.tp;
    row["fp"] = r.fp;
    row["fn"] = r.fn;
    row["jap"] = r.jap ? json(*r.jap) : json();
    row["ca"] = r.ca ? json(*r.ca) : json();
    if (!r.trace.empty()) {
      json trace = json::array();
      for (const TraceEvent& e : r.trace)
        trace.push_back(json{{"image_id", e.image_id},
                             {"pred", e.pred_index},
                             {"gt", e.gt_index},
                             {"sim", e.similarity}});
      row["trace"] = trace;
    }
    rows.push_back(std::move(row));
    by_protocol[r.protocol.label()].first.push_back(r.ap);
    by_protocol[r.protocol.label()].second.push_back(r.ar);
  }

  json summary = json::array();
  for (const auto& [label, aps_ars] : by_protocol) {
    const auto mean_ap = mean_present(aps_ars.first);
    const auto mean_ar = mean_present(aps_ars.second);
    summary.push_back(json{{"protocol", label},
                           {"mean_ap", mean_ap ? json(*mean_ap) : json()},
                           {"mean_ar", mean_ar ? json(*mean_ar) : json()}});
  }

  return json{{"format", "bkp-report-v1"},
              {"version", kVersion},
              {"config_hash", config_hash},
              {"summary", summary},
              {"results", rows},
              {"warnings", report.warnings}};
}

/// Aligned-column text rendering of a report, one block per protocol.
inline std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  auto fmt = [](const std::optional<double>& v, double scale) {
    char buf[32];
    if (!v) return std::string("   --");
    std::snprintf(buf, sizeof(buf), "%5.1f", *v * scale);
    return std::string(buf);
  };

  std::string current;
  for (const ClassProtocolRow& r : report.rows) {
    const std::string label = r.protocol.label();
    if (label != current) {
      current = label;
      out << "\n== " << label << " ==\n";
      out << "class         AP    AR   JAP    CA   n_gt\n";
    }
    char line[128];
    std::snprintf(line, sizeof(line), "%-11s", r.class_name.c_str());
    out << line << fmt(r.ap, 100.0) << " " << fmt(r.ar, 100.0) << " "
        << fmt(r.jap, 100.0) << " " << fmt(r.ca, 1.0);
    std::snprintf(line, sizeof(line), " %6ld\n", r.n_gt);
    out << line;
  }
  return out.str();
}

}  // namespace bkp
