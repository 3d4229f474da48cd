// vtd: command suite for the temporal-defect video detection pipeline.
// Subcommands: synth, ingest, degrade, train-predictor, train, eval,
// cross-eval, robustness, ablate, score-external.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "vtd/degrade.hpp"
#include "vtd/detector.hpp"
#include "vtd/errors.hpp"
#include "vtd/ingest.hpp"
#include "vtd/manifest.hpp"
#include "vtd/synth.hpp"
#include "vtd/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace vtd;

namespace {

// ---- config file + flag merging ------------------------------------------------

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  std::string transcoder_path;
  uint64_t seed = 0;
  bool seed_set = false;
  int workers = 1;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("ConfigError", "cannot read config file: " + path);
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw Error("ConfigError", "config file is not valid JSON: " + path);
  return j;
}

template <typename T>
T cfg_get(const json& j, const std::string& dotted, T fallback) {
  const json* cur = &j;
  size_t pos = 0;
  while (true) {
    const size_t dot = dotted.find('.', pos);
    const std::string key = dotted.substr(pos, dot - pos);
    if (!cur->contains(key)) return fallback;
    cur = &(*cur).at(key);
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return cur->get<T>();
}

Transcoder make_transcoder(const json& cfg, const GlobalOpts& g) {
  Transcoder::Config tc;
  tc.exe = !g.transcoder_path.empty()
               ? g.transcoder_path
               : cfg_get<std::string>(cfg, "transcoder.path", "");
  if (cfg.contains("transcoder") && cfg.at("transcoder").contains("templates")) {
    for (auto& [k, v] : cfg.at("transcoder").at("templates").items())
      tc.templates[k] = v.get<std::string>();
  }
  return Transcoder(tc);
}

void ensure_out_dir(const GlobalOpts& g) {
  if (g.out_dir.empty()) throw UsageError("--out directory is required");
  fs::create_directories(g.out_dir);
}

// every run records its effective configuration next to its outputs
void echo_config(const GlobalOpts& g, const std::string& command, const json& effective) {
  json j;
  j["command"] = command;
  j["seed"] = g.seed;
  j["workers"] = g.workers;
  j["effective"] = effective;
  std::ofstream os(fs::path(g.out_dir) / "effective_config.json",
                   std::ios::binary | std::ios::trunc);
  os << j.dump(2) << "\n";
}

TrainConfig train_config_from(const json& cfg, const GlobalOpts& g) {
  TrainConfig t;
  t.batch_size = cfg_get<int64_t>(cfg, "train.batch_size", t.batch_size);
  t.learning_rate = cfg_get<double>(cfg, "train.learning_rate", t.learning_rate);
  t.max_epochs = cfg_get<int>(cfg, "train.max_epochs", t.max_epochs);
  t.patience = cfg_get<int>(cfg, "train.patience", t.patience);
  t.reduction_ratio = cfg_get<int64_t>(cfg, "train.reduction_ratio", t.reduction_ratio);
  t.clip_length = cfg_get<int64_t>(cfg, "train.clip_length", t.clip_length);
  t.stride = cfg_get<int64_t>(cfg, "train.stride", t.stride);
  t.seed = g.seed;
  t.workers = g.workers;
  return t;
}

DetectorConfig detector_config_from(const json& cfg, const TrainConfig& tcfg) {
  DetectorConfig d;
  d.channels = cfg_get<int64_t>(cfg, "model.channels", d.channels);
  d.reduction = tcfg.reduction_ratio;
  d.clip_length = tcfg.clip_length;
  d.heads = cfg_get<int64_t>(cfg, "model.heads", d.heads);
  d.layers = cfg_get<int64_t>(cfg, "model.layers", d.layers);
  d.ff_dim = cfg_get<int64_t>(cfg, "model.ff_dim", d.ff_dim);
  d.abs_map = cfg_get<bool>(cfg, "model.abs_map", d.abs_map);
  d.embedder.dim = d.channels;
  d.embedder.grid = cfg_get<int64_t>(cfg, "model.embedder_grid", d.embedder.grid);
  d.embedder.seed = cfg_get<uint64_t>(cfg, "model.embedder_seed", d.embedder.seed);
  return d;
}

json train_config_json(const TrainConfig& t, const DetectorConfig& d) {
  json j;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.learning_rate;
  j["max_epochs"] = t.max_epochs;
  j["patience"] = t.patience;
  j["seed"] = t.seed;
  j["reduction_ratio"] = t.reduction_ratio;
  j["clip_length"] = t.clip_length;
  j["stride"] = t.stride;
  j["variant"] = to_string(d.variant);
  j["channels"] = d.channels;
  j["abs_map"] = d.abs_map;
  return j;
}

std::vector<Clip> clips_for_predictor(const Manifest& m, Split split, FrameStore& store,
                                      int64_t clip_length, int64_t stride) {
  std::vector<Clip> clips;
  for (const auto& rec : m.in_split(split)) {
    if (rec.label != Label::REAL) continue;  // predictor sees real videos only
    const DecodedVideo& video = store.get(rec.path);
    for (int64_t start :
         slice_clips(static_cast<int64_t>(video.frames.size()), clip_length, stride))
      clips.push_back(make_clip(rec, video, start, clip_length));
  }
  return clips;
}

FramePredictor load_predictor(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.meta.value("kind", "") != "predictor")
    throw Error("CheckpointMeta", "not a predictor checkpoint: " + path);
  Rng rng(0);
  FramePredictor p(FramePredictor::Arch{ck.meta.at("base_channels").get<int64_t>()}, rng);
  p.load_from(ck, "");
  p.freeze();
  return p;
}

void save_predictor(const FramePredictor& p, const std::string& path,
                    const PredictorTrainSummary& sum) {
  Checkpoint ck;
  ck.meta["version"] = 1;
  ck.meta["kind"] = "predictor";
  ck.meta["base_channels"] = p.arch.base_channels;
  ck.meta["best_val_mae"] = sum.best_val_mae;
  p.save_into(ck, "");
  ck.save(path);
}

int fail_with(const Error& e) {
  std::cerr << "error: " << e.what() << "\n";
  return 1;
}

// ---- subcommand payloads ----------------------------------------------------------

struct SynthArgs {
  int64_t videos_per_class = 50;
  int64_t frames = 24;
  std::string resolution = "64x64";
  std::string defects = "mixed";
  std::string motion = "constant_velocity";
  double magnitude = 0.15;
  int crf = 18;
  std::string ratio = "0.8,0.1,0.1";
  std::string scroll = "0,0";
  double background_detail = 0.04;
};

std::array<double, 3> parse_ratio(const std::string& s) {
  std::array<double, 3> r{};
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &r[0], &r[1], &r[2]) != 3)
    throw UsageError("ratio must be a,b,c");
  return r;
}

int cmd_synth(const GlobalOpts& g, const json& cfg, const SynthArgs& a) {
  ensure_out_dir(g);
  SynthSpec spec;
  if (std::sscanf(a.resolution.c_str(), "%ldx%ld", &spec.height, &spec.width) != 2)
    throw UsageError("--resolution must be HxW");
  spec.frames_per_video = a.frames;
  spec.n_videos_per_class = a.videos_per_class;
  spec.motion = motion_model_from_string(a.motion);
  spec.defect_magnitude = a.magnitude;
  spec.seed = g.seed;
  spec.crf = a.crf;
  if (std::sscanf(a.scroll.c_str(), "%ld,%ld", &spec.scroll_x, &spec.scroll_y) != 2)
    throw UsageError("--scroll must be X,Y");
  spec.background_detail = a.background_detail;
  spec.fake_families.clear();
  std::istringstream fams(a.defects);
  std::string tok;
  while (std::getline(fams, tok, ',')) spec.fake_families.push_back(defect_kind_from_string(tok));

  json effective;
  effective["videos_per_class"] = spec.n_videos_per_class;
  effective["frames_per_video"] = spec.frames_per_video;
  effective["resolution"] = a.resolution;
  effective["defects"] = a.defects;
  effective["defect_magnitude"] = spec.defect_magnitude;
  effective["crf"] = spec.crf;
  echo_config(g, "synth", effective);

  const Transcoder tc = make_transcoder(cfg, g);
  CorpusResult res =
      build_synthetic_corpus(spec, tc, g.out_dir, parse_ratio(a.ratio), g.workers);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "manifest=" << res.manifest_path << "\n"
            << "videos=" << res.manifest.records.size() << "\n";
  return 0;
}

struct IngestArgs {
  std::string manifest;
  std::string ratio = "0.8,0.1,0.1";
  bool resplit = false;
  bool cache_frames = false;
  int64_t clip_length = kDefaultClipLength;
  int64_t stride = 1;
};

int cmd_ingest(const GlobalOpts& g, const json& cfg, const IngestArgs& a) {
  ensure_out_dir(g);
  Manifest m = load_manifest(a.manifest);

  json effective;
  effective["manifest"] = a.manifest;
  effective["resplit"] = a.resplit;
  effective["cache_frames"] = a.cache_frames;
  echo_config(g, "ingest", effective);

  if (a.resplit) {
    SplitAssignment sa = assign_splits(std::move(m.records), parse_ratio(a.ratio), g.seed);
    m = std::move(sa.manifest);
    for (const auto& w : sa.warnings) std::cerr << "warning: " << w << "\n";
  }

  const auto violations = validate_manifest(m);
  {
    std::ofstream os(fs::path(g.out_dir) / "validation.txt",
                     std::ios::binary | std::ios::trunc);
    for (const auto& v : violations) os << v << "\n";
  }
  save_manifest(m, (fs::path(g.out_dir) / "manifest.jsonl").string());

  // clip inventory per split
  json inventory;
  for (Split s : {Split::TRAIN, Split::VAL, Split::TEST}) {
    int64_t clips = 0;
    for (const auto& rec : m.in_split(s))
      clips += static_cast<int64_t>(slice_clips(rec.frame_count, a.clip_length, a.stride).size());
    inventory[to_string(s)] = clips;
  }
  std::ofstream(fs::path(g.out_dir) / "clip_inventory.json") << inventory.dump(2) << "\n";

  if (a.cache_frames) {
    const Transcoder tc = make_transcoder(cfg, g);
    const std::string cache_dir = (fs::path(g.out_dir) / "frames").string();
    for (const auto& rec : m.records) {
      const DecodedVideo video = decode_video(tc, rec.path);
      write_frame_cache(cache_dir, rec.source_id(), video.frames);
    }
    std::cout << "frame_cache=" << cache_dir << "\n";
  }

  std::cout << "violations=" << violations.size() << "\n";
  return violations.empty() ? 0 : 1;
}

struct DegradeArgs {
  std::string manifest;
  std::string operations = "bit_error,abr,crf";
  std::string severities = "1,2,3";
  std::string splits = "TEST";
};

int cmd_degrade(const GlobalOpts& g, const json& cfg, const DegradeArgs& a) {
  ensure_out_dir(g);
  const Manifest m = load_manifest(a.manifest);
  const Transcoder tc = make_transcoder(cfg, g);

  DegradePlan plan;
  plan.seed = g.seed;
  plan.workers = g.workers;
  plan.splits.clear();
  {
    std::istringstream ss(a.splits);
    std::string tok;
    while (std::getline(ss, tok, ',')) plan.splits.push_back(split_from_string(tok));
  }
  std::vector<DegradeOp> ops;
  {
    std::istringstream ss(a.operations);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok == "bit_error") ops.push_back(DegradeOp::BIT_ERROR);
      else if (tok == "abr") ops.push_back(DegradeOp::H265_ABR);
      else if (tok == "crf") ops.push_back(DegradeOp::H265_CRF);
      else throw UsageError("unknown operation: " + tok);
    }
  }
  {
    std::istringstream ss(a.severities);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const int sev = std::stoi(tok);
      for (DegradeOp op : ops) plan.variants.push_back(DegradationSpec{op, sev});
    }
  }

  json effective;
  effective["manifest"] = a.manifest;
  effective["operations"] = a.operations;
  effective["severities"] = a.severities;
  effective["splits"] = a.splits;
  echo_config(g, "degrade", effective);

  DegradeResult res = degrade_corpus(tc, m, plan, g.out_dir);
  save_manifest(res.manifest, (fs::path(g.out_dir) / "degraded_manifest.jsonl").string());
  if (!res.failures.empty()) {
    std::ofstream os(fs::path(g.out_dir) / "failures.jsonl",
                     std::ios::binary | std::ios::trunc);
    for (const auto& f : res.failures) {
      json j;
      j["path"] = f.source_path;
      j["operation"] = to_string(f.spec.operation);
      j["severity"] = f.spec.severity;
      j["reason"] = f.reason;
      os << j.dump() << "\n";
      std::cerr << "warning: " << f.source_path << " (" << f.spec.row_label()
                << "): " << f.reason << "\n";
    }
  }
  std::cout << "outputs=" << res.manifest.records.size() << "\n"
            << "failures=" << res.failures.size() << "\n";
  return 0;
}

struct TrainPredictorArgs {
  std::string manifest;
  int epochs = 12;
  int patience = 3;
  int64_t stride = kDefaultClipLength;  // non-overlapping clips for triples
};

int cmd_train_predictor(const GlobalOpts& g, const json& cfg, const TrainPredictorArgs& a) {
  ensure_out_dir(g);
  const Manifest m = load_manifest(a.manifest);
  const Transcoder tc = make_transcoder(cfg, g);
  FrameStore store(&tc);

  PredictorTrainConfig pcfg;
  pcfg.max_epochs = a.epochs;
  pcfg.patience = a.patience;
  pcfg.seed = g.seed;
  pcfg.batch_size = cfg_get<int64_t>(cfg, "predictor.batch_size", pcfg.batch_size);
  pcfg.learning_rate = cfg_get<double>(cfg, "predictor.learning_rate", pcfg.learning_rate);
  pcfg.base_channels = cfg_get<int64_t>(cfg, "predictor.base_channels", pcfg.base_channels);
  pcfg.max_samples_per_epoch =
      cfg_get<int64_t>(cfg, "predictor.max_samples_per_epoch", pcfg.max_samples_per_epoch);

  json effective;
  effective["manifest"] = a.manifest;
  effective["epochs"] = pcfg.max_epochs;
  effective["patience"] = pcfg.patience;
  effective["stride"] = a.stride;
  echo_config(g, "train-predictor", effective);

  auto train_clips = clips_for_predictor(m, Split::TRAIN, store, kDefaultClipLength, a.stride);
  auto val_clips = clips_for_predictor(m, Split::VAL, store, kDefaultClipLength, a.stride);
  if (train_clips.empty()) throw MissingSplit("no REAL TRAIN clips for predictor training");
  if (val_clips.empty()) throw MissingSplit("no REAL VAL clips for predictor training");

  PredictorTrainSummary sum;
  FramePredictor pred = train_frame_predictor(train_clips, val_clips, pcfg, &sum);
  for (const auto& w : sum.warnings) std::cerr << "warning: " << w << "\n";

  const std::string ck_path = (fs::path(g.out_dir) / "predictor.vtc").string();
  save_predictor(pred, ck_path, sum);
  {
    std::ofstream os(fs::path(g.out_dir) / "train_log.jsonl",
                     std::ios::binary | std::ios::trunc);
    for (size_t e = 0; e < sum.epoch_log.size(); ++e) {
      json j;
      j["epoch"] = e + 1;
      j["train_mae"] = sum.epoch_log[e].first;
      j["val_mae"] = sum.epoch_log[e].second;
      os << j.dump() << "\n";
    }
  }
  std::cout << "checkpoint=" << ck_path << "\n"
            << "val_mae=" << sum.best_val_mae << "\n";
  return 0;
}

struct TrainArgs {
  std::string manifest;
  std::string predictor;
  std::string variant = "ca_fusion";
  std::string embeddings_dir;
  bool shuffle_labels = false;
};

int cmd_train(const GlobalOpts& g, const json& cfg, const TrainArgs& a) {
  ensure_out_dir(g);
  const Manifest m = load_manifest(a.manifest);
  const Transcoder tc = make_transcoder(cfg, g);
  FrameStore store(&tc);

  TrainConfig tcfg = train_config_from(cfg, g);
  tcfg.shuffle_labels = a.shuffle_labels;
  DetectorConfig dcfg = detector_config_from(cfg, tcfg);
  dcfg.variant = detector_variant_from_string(a.variant);

  echo_config(g, "train", train_config_json(tcfg, dcfg));

  FramePredictor pred = load_predictor(a.predictor);
  FrameEmbedder emb(dcfg.embedder);
  std::unique_ptr<EmbeddingSource> source;
  if (!a.embeddings_dir.empty())
    source = std::make_unique<ExternalEmbeddingSource>(a.embeddings_dir, dcfg.channels);
  const EmbeddingSource& embed_src = source ? *source : static_cast<EmbeddingSource&>(emb);

  FeatureBuildConfig fcfg;
  fcfg.clip_length = tcfg.clip_length;
  fcfg.stride = tcfg.stride;
  fcfg.abs_map = dcfg.abs_map;
  fcfg.workers = tcfg.workers;
  std::vector<FeatureBuildFailure> failures;
  auto train_feats = build_clip_features(m.in_split(Split::TRAIN), store, pred, embed_src,
                                         fcfg, &failures);
  auto val_feats =
      build_clip_features(m.in_split(Split::VAL), store, pred, embed_src, fcfg, &failures);
  for (const auto& f : failures)
    std::cerr << "warning: skipped " << f.path << ": " << f.reason << "\n";

  TrainOutcome outcome = train_detector(train_feats, val_feats, dcfg, tcfg);

  const std::string ck_path = (fs::path(g.out_dir) / "detector.vtc").string();
  outcome.detector.save(ck_path, pred, emb);
  {
    std::ofstream os(fs::path(g.out_dir) / "train_log.jsonl",
                     std::ios::binary | std::ios::trunc);
    for (const auto& e : outcome.log) {
      json j;
      j["epoch"] = e.epoch;
      j["train_loss"] = e.train_loss;
      j["val_accuracy"] = e.val_accuracy;
      os << j.dump() << "\n";
    }
  }
  std::cout << "checkpoint=" << ck_path << "\n"
            << "best_val_accuracy=" << outcome.best_val_accuracy << "\n"
            << "best_epoch=" << outcome.best_epoch << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "TEST";
  std::string embeddings_dir;
  bool degraded = false;
};

int cmd_eval(const GlobalOpts& g, const json& cfg, const EvalArgs& a) {
  ensure_out_dir(g);
  const Manifest m = load_manifest(a.manifest);
  const Transcoder tc = make_transcoder(cfg, g);
  FrameStore store(&tc);

  LoadedDetector loaded = Detector::load(a.checkpoint);
  TrainConfig tcfg = train_config_from(cfg, g);

  json effective;
  effective["checkpoint"] = a.checkpoint;
  effective["manifest"] = a.manifest;
  effective["split"] = a.split;
  echo_config(g, "eval", effective);

  std::unique_ptr<EmbeddingSource> source;
  if (!a.embeddings_dir.empty())
    source = std::make_unique<ExternalEmbeddingSource>(a.embeddings_dir,
                                                       loaded.detector.config().channels);
  const EmbeddingSource& embed_src =
      source ? *source : static_cast<EmbeddingSource&>(loaded.embedder);

  FeatureBuildConfig fcfg;
  fcfg.clip_length = loaded.detector.config().clip_length;
  fcfg.stride = tcfg.stride;
  fcfg.abs_map = loaded.detector.config().abs_map;
  fcfg.workers = tcfg.workers;
  fcfg.tolerate_decode_errors = a.degraded;
  std::vector<FeatureBuildFailure> failures;
  auto feats = build_clip_features(m.in_split(split_from_string(a.split)), store,
                                   loaded.predictor, embed_src, fcfg, &failures);
  for (const auto& f : failures)
    std::cerr << "warning: skipped " << f.path << ": " << f.reason << "\n";

  EvalOutcome out = evaluate_clips(loaded.detector, feats);
  save_clip_scores(out.clips, (fs::path(g.out_dir) / "clip_scores.jsonl").string());

  EvalReport rep;
  rep.kind = "eval";
  rep.seed = g.seed;
  rep.config_hash = config_hash_of(effective);
  rep.corner_label = "Split";
  rep.columns = {"accuracy"};
  rep.rows.push_back(EvalReport::Row{a.split, {out.accuracy_percent}, ""});
  rep.save((fs::path(g.out_dir) / "report").string());

  std::cout << "accuracy=" << out.accuracy_percent << "\n"
            << "clips=" << out.clips.size() << "\n";
  return 0;
}

struct CrossEvalArgs {
  std::string manifest;            // single manifest split by generator_tag
  std::vector<std::string> manifests;  // or explicit per-generator manifests
  std::string predictor;
};

int cmd_cross_eval(const GlobalOpts& g, const json& cfg, const CrossEvalArgs& a) {
  ensure_out_dir(g);
  const Transcoder tc = make_transcoder(cfg, g);
  FrameStore store(&tc);

  std::vector<Manifest> per_gen;
  if (!a.manifests.empty()) {
    for (const auto& p : a.manifests) per_gen.push_back(load_manifest(p));
  } else if (!a.manifest.empty()) {
    const Manifest m = load_manifest(a.manifest);
    std::vector<std::string> tags;
    for (const auto& r : m.records)
      if (!r.generator_tag.empty() &&
          std::find(tags.begin(), tags.end(), r.generator_tag) == tags.end())
        tags.push_back(r.generator_tag);
    for (const auto& tag : tags) {
      Manifest sub;
      sub.split_seed = m.split_seed;
      sub.split_ratio = m.split_ratio;
      for (const auto& r : m.records)
        if (r.generator_tag.empty() || r.generator_tag == tag) sub.records.push_back(r);
      per_gen.push_back(std::move(sub));
    }
  } else {
    throw UsageError("cross-eval needs --manifest or --manifests");
  }

  TrainConfig tcfg = train_config_from(cfg, g);
  DetectorConfig dcfg = detector_config_from(cfg, tcfg);

  echo_config(g, "cross-eval", train_config_json(tcfg, dcfg));

  FramePredictor pred = load_predictor(a.predictor);
  FrameEmbedder emb(dcfg.embedder);
  ProtocolContext ctx{&store, &pred, &emb, dcfg, tcfg};

  EvalReport rep = cross_generator_matrix(ctx, per_gen);
  rep.save((fs::path(g.out_dir) / "cross_generator").string());
  std::cout << rep.render_table();
  return 0;
}

struct RobustnessArgs {
  std::string checkpoint;
  std::string manifest;  // clean
  std::vector<std::string> degraded;
};

int cmd_robustness(const GlobalOpts& g, const json& cfg, const RobustnessArgs& a) {
  ensure_out_dir(g);
  const Transcoder tc = make_transcoder(cfg, g);
  FrameStore store(&tc);

  LoadedDetector loaded = Detector::load(a.checkpoint);
  TrainConfig tcfg = train_config_from(cfg, g);
  DetectorConfig dcfg = loaded.detector.config();

  json effective;
  effective["checkpoint"] = a.checkpoint;
  effective["manifest"] = a.manifest;
  echo_config(g, "robustness", effective);

  std::vector<Manifest> degraded;
  for (const auto& p : a.degraded) degraded.push_back(load_manifest(p));

  ProtocolContext ctx{&store, &loaded.predictor, &loaded.embedder, dcfg, tcfg};
  EvalReport rep =
      robustness_eval(ctx, loaded.detector, load_manifest(a.manifest), degraded);
  rep.save((fs::path(g.out_dir) / "robustness").string());
  std::cout << rep.render_table();
  return 0;
}

struct AblateArgs {
  std::string manifest;
  std::string predictor;
  std::string seeds = "1,2,3";
};

int cmd_ablate(const GlobalOpts& g, const json& cfg, const AblateArgs& a) {
  ensure_out_dir(g);
  const Transcoder tc = make_transcoder(cfg, g);
  FrameStore store(&tc);

  TrainConfig tcfg = train_config_from(cfg, g);
  DetectorConfig dcfg = detector_config_from(cfg, tcfg);
  echo_config(g, "ablate", train_config_json(tcfg, dcfg));

  FramePredictor pred = load_predictor(a.predictor);
  FrameEmbedder emb(dcfg.embedder);
  const Manifest m = load_manifest(a.manifest);
  ProtocolContext ctx{&store, &pred, &emb, dcfg, tcfg};

  std::vector<uint64_t> seeds;
  {
    std::istringstream ss(a.seeds);
    std::string tok;
    while (std::getline(ss, tok, ',')) seeds.push_back(std::stoull(tok));
  }

  std::map<std::string, std::vector<double>> per_variant;
  for (uint64_t seed : seeds) {
    EvalReport rep = ablation_run(ctx, m, seed);
    rep.save((fs::path(g.out_dir) / ("ablation_seed" + std::to_string(seed))).string());
    std::cout << "seed " << seed << ":\n" << rep.render_table();
    for (const auto& row : rep.rows)
      if (!row.cells.empty() && row.cells[0].has_value())
        per_variant[row.label].push_back(*row.cells[0]);
  }

  // median summary across seeds
  EvalReport summary;
  summary.kind = "ablation";
  summary.seed = g.seed;
  summary.config_hash = config_hash_of(train_config_json(tcfg, dcfg));
  summary.corner_label = "Variant";
  summary.columns = {"median_accuracy"};
  for (const char* name : {"global_only", "concat", "ca_fusion"}) {
    auto it = per_variant.find(name);
    EvalReport::Row row;
    row.label = name;
    if (it == per_variant.end() || it->second.empty()) {
      row.cells.push_back(std::nullopt);
    } else {
      auto v = it->second;
      std::sort(v.begin(), v.end());
      row.cells.push_back(v[v.size() / 2]);
    }
    summary.rows.push_back(std::move(row));
  }
  summary.save((fs::path(g.out_dir) / "ablation_median").string());
  std::cout << "medians:\n" << summary.render_table();
  return 0;
}

struct ScoreExternalArgs {
  std::string predictions;
  std::string method = "external";
};

int cmd_score_external(const GlobalOpts& g, const json&, const ScoreExternalArgs& a) {
  ensure_out_dir(g);
  const auto scores = load_clip_scores(a.predictions);
  const double acc = accuracy_percent(scores);

  json effective;
  effective["predictions"] = a.predictions;
  effective["method"] = a.method;
  echo_config(g, "score-external", effective);

  EvalReport rep;
  rep.kind = "eval";
  rep.seed = g.seed;
  rep.config_hash = config_hash_of(effective);
  rep.corner_label = "Method";
  rep.columns = {"accuracy"};
  rep.rows.push_back(EvalReport::Row{a.method, {acc}, ""});
  rep.save((fs::path(g.out_dir) / "external_score").string());
  std::cout << "accuracy=" << acc << "\n"
            << "clips=" << scores.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vtd: local/global temporal-defect detection for AI-generated video"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON config file")->envname("VTD_CONFIG");
  app.add_option("--transcoder", g.transcoder_path, "transcoder executable path")
      ->envname("VTD_TRANSCODER");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", g.out_dir, "output directory")->required();
    sub->add_option("--seed", g.seed, "RNG seed");
    sub->add_option("--workers", g.workers, "worker thread bound");
  };

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark corpus");
  add_common(synth);
  synth->add_option("--videos-per-class", synth_args.videos_per_class);
  synth->add_option("--frames", synth_args.frames);
  synth->add_option("--resolution", synth_args.resolution, "HxW");
  synth->add_option("--defects", synth_args.defects, "comma list: drift,jitter,mixed");
  synth->add_option("--motion", synth_args.motion, "constant_velocity|sine_path");
  synth->add_option("--defect-magnitude", synth_args.magnitude);
  synth->add_option("--crf", synth_args.crf, "corpus encode quality");
  synth->add_option("--scroll", synth_args.scroll, "background pan X,Y px/frame");
  synth->add_option("--background-detail", synth_args.background_detail);
  synth->add_option("--ratio", synth_args.ratio, "train,val,test split ratio");

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "validate/split a manifest, optional frame cache");
  add_common(ingest);
  ingest->add_option("--manifest", ingest_args.manifest)->required();
  ingest->add_option("--ratio", ingest_args.ratio);
  ingest->add_flag("--resplit", ingest_args.resplit, "assign fresh splits with --seed");
  ingest->add_flag("--cache-frames", ingest_args.cache_frames, "write lossless frame cache");
  ingest->add_option("--clip-length", ingest_args.clip_length);
  ingest->add_option("--stride", ingest_args.stride);

  DegradeArgs degrade_args;
  auto* degrade = app.add_subcommand("degrade", "produce degraded video variants");
  add_common(degrade);
  degrade->add_option("--manifest", degrade_args.manifest)->required();
  degrade->add_option("--operations", degrade_args.operations, "bit_error,abr,crf");
  degrade->add_option("--severity", degrade_args.severities, "comma list of 1,2,3");
  degrade->add_option("--splits", degrade_args.splits, "source splits to degrade");

  TrainPredictorArgs tp_args;
  auto* train_pred = app.add_subcommand("train-predictor", "train the frame predictor on real videos");
  add_common(train_pred);
  train_pred->add_option("--manifest", tp_args.manifest)->required();
  train_pred->add_option("--epochs", tp_args.epochs);
  train_pred->add_option("--patience", tp_args.patience);
  train_pred->add_option("--stride", tp_args.stride);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train the detector");
  add_common(train);
  train->add_option("--manifest", train_args.manifest)->required();
  train->add_option("--predictor", train_args.predictor)->required();
  train->add_option("--variant", train_args.variant, "ca_fusion|global_only|concat");
  train->add_option("--embeddings-dir", train_args.embeddings_dir,
                    "use external per-frame embeddings");
  train->add_flag("--shuffle-labels", train_args.shuffle_labels,
                  "random-label control run");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate a detector checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval->add_option("--manifest", eval_args.manifest)->required();
  eval->add_option("--split", eval_args.split);
  eval->add_option("--embeddings-dir", eval_args.embeddings_dir);
  eval->add_flag("--degraded", eval_args.degraded, "tolerate concealed decode errors");

  CrossEvalArgs cross_args;
  auto* cross = app.add_subcommand("cross-eval", "cross-generator generalization matrix");
  add_common(cross);
  cross->add_option("--manifest", cross_args.manifest, "single manifest, split by tag");
  cross->add_option("--manifests", cross_args.manifests, "per-generator manifests");
  cross->add_option("--predictor", cross_args.predictor)->required();

  RobustnessArgs rob_args;
  auto* rob = app.add_subcommand("robustness", "robustness table on degraded copies");
  add_common(rob);
  rob->add_option("--checkpoint", rob_args.checkpoint)->required();
  rob->add_option("--manifest", rob_args.manifest, "clean manifest (baseline row)")->required();
  rob->add_option("--degraded-manifest", rob_args.degraded, "degraded manifest(s)")->required();

  AblateArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "global-only / concat / CA-fusion ablation");
  add_common(ablate);
  ablate->add_option("--manifest", ablate_args.manifest)->required();
  ablate->add_option("--predictor", ablate_args.predictor)->required();
  ablate->add_option("--seeds", ablate_args.seeds, "comma list of seeds");

  ScoreExternalArgs score_args;
  auto* score = app.add_subcommand("score-external", "score an external per-clip prediction dump");
  add_common(score);
  score->add_option("--predictions", score_args.predictions)->required();
  score->add_option("--method", score_args.method, "method name for the report row");

  CLI11_PARSE(app, argc, argv);

  try {
    const json cfg = load_config(g.config_path);
    if (synth->parsed()) return cmd_synth(g, cfg, synth_args);
    if (ingest->parsed()) return cmd_ingest(g, cfg, ingest_args);
    if (degrade->parsed()) return cmd_degrade(g, cfg, degrade_args);
    if (train_pred->parsed()) return cmd_train_predictor(g, cfg, tp_args);
    if (train->parsed()) return cmd_train(g, cfg, train_args);
    if (eval->parsed()) return cmd_eval(g, cfg, eval_args);
    if (cross->parsed()) return cmd_cross_eval(g, cfg, cross_args);
    if (rob->parsed()) return cmd_robustness(g, cfg, rob_args);
    if (ablate->parsed()) return cmd_ablate(g, cfg, ablate_args);
    if (score->parsed()) return cmd_score_external(g, cfg, score_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    return fail_with(e);
  } catch (const std::exception& e) {
    std::cerr << "error: Unhandled: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
