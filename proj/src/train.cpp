#include "vtd/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "vtd/errors.hpp"
#include "vtd/fusion.hpp"

namespace vtd {

namespace {

void apply_label_shuffle(std::vector<ClipFeatures>& train, std::vector<ClipFeatures>& val,
                         uint64_t seed) {
  // permute labels at video level so clips of one video stay consistent
  std::vector<std::string> ids;
  std::vector<Label> labels;
  std::map<std::string, size_t> index;
  auto visit = [&](const std::vector<ClipFeatures>& feats) {
    for (const auto& f : feats) {
      if (index.emplace(f.source_id, ids.size()).second) {
        ids.push_back(f.source_id);
        labels.push_back(f.label);
      }
    }
  };
  visit(train);
  visit(val);

  Rng rng = Rng(seed).fork("label_shuffle");
  for (size_t i = labels.size(); i > 1; --i)
    std::swap(labels[i - 1], labels[rng.uniform_int(i)]);

  auto reassign = [&](std::vector<ClipFeatures>& feats) {
    for (auto& f : feats) f.label = labels[index.at(f.source_id)];
  };
  reassign(train);
  reassign(val);
}

struct BatchTensors {
  Tensor agg, emb, labels;
};

BatchTensors assemble_batch(const std::vector<ClipFeatures>& feats,
                            const std::vector<size_t>& order, size_t at, size_t n) {
  const ClipFeatures& first = feats[order[at]];
  const int64_t h = first.agg_chw.dim(1), w = first.agg_chw.dim(2);
  const int64_t t = first.emb.dim(0), d = first.emb.dim(1);
  BatchTensors b{Tensor({static_cast<int64_t>(n), 3, h, w}),
                 Tensor({static_cast<int64_t>(n), t, d}),
                 Tensor({static_cast<int64_t>(n)})};
  for (size_t i = 0; i < n; ++i) {
    const ClipFeatures& f = feats[order[at + i]];
    std::copy(f.agg_chw.data.data(), f.agg_chw.data.data() + f.agg_chw.numel(),
              b.agg.data.data() + static_cast<int64_t>(i) * 3 * h * w);
    std::copy(f.emb.data.data(), f.emb.data.data() + f.emb.numel(),
              b.emb.data.data() + static_cast<int64_t>(i) * t * d);
    b.labels.data[static_cast<int64_t>(i)] = f.label == Label::FAKE ? 1.0 : 0.0;
  }
  return b;
}

}  // namespace

bool decide_fake(double prob_fake) { return prob_fake >= kDecisionThreshold; }

double accuracy_percent(const std::vector<ClipScore>& scored) {
  if (scored.empty()) throw EmptyEvalSet("no clips to score");
  int64_t correct = 0;
  for (const auto& s : scored) {
    const bool fake = decide_fake(s.prob_fake);
    if (fake == (s.label == Label::FAKE)) correct++;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(scored.size());
}

EvalOutcome evaluate_clips(const Detector& det, const std::vector<ClipFeatures>& feats) {
  if (feats.empty()) throw EmptyEvalSet("no clips to evaluate");
  EvalOutcome out;
  const size_t chunk = 256;
  std::vector<size_t> order(feats.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t at = 0; at < feats.size(); at += chunk) {
    const size_t n = std::min(chunk, feats.size() - at);
    BatchTensors b = assemble_batch(feats, order, at, n);
    Tensor probs = det.infer(b.agg, b.emb);
    for (size_t i = 0; i < n; ++i)
      out.clips.push_back(
          ClipScore{feats[at + i].clip_id, feats[at + i].label, probs.data[static_cast<int64_t>(i)]});
  }
  out.accuracy_percent = accuracy_percent(out.clips);
  return out;
}

void save_clip_scores(const std::vector<ClipScore>& scores, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("IoError", "cannot write clip scores: " + path);
  for (const auto& s : scores) {
    nlohmann::ordered_json j;
    j["clip_id"] = s.clip_id;
    j["label"] = to_string(s.label);
    j["prob_fake"] = s.prob_fake;
    os << j.dump() << "\n";
  }
}

std::vector<ClipScore> load_clip_scores(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("IoError", "cannot read clip scores: " + path);
  std::vector<ClipScore> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto j = nlohmann::ordered_json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw Error("ParseError", "clip score line " + std::to_string(line_no) + " invalid");
    ClipScore s;
    s.clip_id = j.at("clip_id").get<std::string>();
    s.label = label_from_string(j.at("label").get<std::string>());
    s.prob_fake = j.at("prob_fake").get<double>();
    out.push_back(std::move(s));
  }
  return out;
}

TrainOutcome train_detector(std::vector<ClipFeatures> train_feats,
                            std::vector<ClipFeatures> val_feats,
                            const DetectorConfig& dcfg, const TrainConfig& tcfg) {
  if (train_feats.empty()) throw MissingSplit("TRAIN split has no clips");
  if (val_feats.empty()) throw MissingSplit("VAL split has no clips");
  if (tcfg.shuffle_labels) apply_label_shuffle(train_feats, val_feats, tcfg.seed);

  Rng rng = Rng(tcfg.seed).fork("detector_init");
  TrainOutcome out;
  out.detector = Detector(dcfg, rng);
  nn::Adam opt(tcfg.learning_rate);
  opt.attach(out.detector.params());

  Detector best = out.detector;
  double best_acc = -1.0;
  int best_epoch = 0, since_best = 0;

  std::vector<size_t> order(train_feats.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng = Rng(tcfg.seed).fork("epoch_shuffle");

  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

    double loss_sum = 0.0;
    int64_t batches = 0;
    for (size_t at = 0; at < train_feats.size();
         at += static_cast<size_t>(tcfg.batch_size)) {
      const size_t n =
          std::min<size_t>(static_cast<size_t>(tcfg.batch_size), train_feats.size() - at);
      BatchTensors b = assemble_batch(train_feats, order, at, n);
      opt.zero_grad();
      Tensor probs = out.detector.forward(b.agg, b.emb, nn::Mode::TRAIN);
      loss_sum += bce_loss(probs, b.labels);
      out.detector.backward(bce_grad(probs, b.labels));
      opt.step();
      batches++;
    }

    const double val_acc = evaluate_clips(out.detector, val_feats).accuracy_percent;
    out.log.push_back(EpochLog{epoch, loss_sum / static_cast<double>(batches), val_acc});

    if (val_acc > best_acc + 1e-12) {
      best_acc = val_acc;
      best = out.detector;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= tcfg.patience) {
      break;
    }
  }

  out.detector = std::move(best);
  out.best_val_accuracy = best_acc;
  out.best_epoch = best_epoch;
  return out;
}

// ---- protocol runners ------------------------------------------------------------

std::vector<ClipFeatures> features_for_split(ProtocolContext& ctx, const Manifest& m,
                                             Split split, bool tolerate_decode_errors) {
  FeatureBuildConfig fcfg;
  fcfg.clip_length = ctx.tcfg.clip_length;
  fcfg.stride = ctx.tcfg.stride;
  fcfg.abs_map = ctx.dcfg.abs_map;
  fcfg.workers = ctx.tcfg.workers;
  fcfg.tolerate_decode_errors = tolerate_decode_errors;
  std::vector<FeatureBuildFailure> failures;
  auto feats = build_clip_features(m.in_split(split), *ctx.store, *ctx.predictor,
                                   *ctx.embedder, fcfg, &failures);
  return feats;
}

namespace {

std::string generator_of(const Manifest& m) {
  for (const auto& r : m.records)
    if (!r.generator_tag.empty()) return r.generator_tag;
  return "";
}

nlohmann::ordered_json context_config_json(const ProtocolContext& ctx,
                                           const std::string& kind) {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["channels"] = ctx.dcfg.channels;
  j["reduction"] = ctx.dcfg.reduction;
  j["clip_length"] = ctx.tcfg.clip_length;
  j["stride"] = ctx.tcfg.stride;
  j["batch_size"] = ctx.tcfg.batch_size;
  j["learning_rate"] = ctx.tcfg.learning_rate;
  j["max_epochs"] = ctx.tcfg.max_epochs;
  j["patience"] = ctx.tcfg.patience;
  j["seed"] = ctx.tcfg.seed;
  return j;
}

}  // namespace

EvalReport cross_generator_matrix(ProtocolContext& ctx,
                                  const std::vector<Manifest>& per_generator) {
  if (per_generator.size() < 2)
    throw Error("Precondition", "cross-generator protocol needs >= 2 generator manifests");

  std::vector<std::string> names;
  for (const auto& m : per_generator) {
    const std::string g = generator_of(m);
    if (g.empty()) throw Error("Precondition", "manifest lacks generator-tagged records");
    names.push_back(g);
  }

  EvalReport rep;
  rep.kind = "cross_generator";
  rep.seed = ctx.tcfg.seed;
  rep.config_hash = config_hash_of(context_config_json(ctx, rep.kind));
  rep.corner_label = "Train\\Test";
  rep.columns = names;
  rep.columns.push_back("Ave.");

  // test features once per generator
  std::vector<std::vector<ClipFeatures>> test_feats;
  for (const auto& m : per_generator)
    test_feats.push_back(features_for_split(ctx, m, Split::TEST, false));

  for (size_t i = 0; i < per_generator.size(); ++i) {
    EvalReport::Row row;
    row.label = names[i];
    double sum = 0.0;
    int64_t ok_cells = 0;
    bool row_failed = false;
    try {
      auto train = features_for_split(ctx, per_generator[i], Split::TRAIN, false);
      auto val = features_for_split(ctx, per_generator[i], Split::VAL, false);
      TrainOutcome outcome = train_detector(train, val, ctx.dcfg, ctx.tcfg);
      for (size_t j = 0; j < per_generator.size(); ++j) {
        try {
          const double acc =
              evaluate_clips(outcome.detector, test_feats[j]).accuracy_percent;
          row.cells.push_back(acc);
          sum += acc;
          ok_cells++;
        } catch (const std::exception&) {
          row.cells.push_back(std::nullopt);
        }
      }
    } catch (const std::exception& e) {
      row_failed = true;
      row.note = e.what();
      row.cells.assign(per_generator.size(), std::nullopt);
    }
    if (!row_failed && ok_cells == static_cast<int64_t>(per_generator.size()))
      row.cells.push_back(sum / static_cast<double>(ok_cells));
    else
      row.cells.push_back(std::nullopt);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

EvalReport robustness_eval(ProtocolContext& ctx, const Detector& det,
                           const Manifest& clean, const std::vector<Manifest>& degraded) {
  EvalReport rep;
  rep.kind = "robustness";
  rep.seed = ctx.tcfg.seed;
  rep.config_hash = config_hash_of(context_config_json(ctx, rep.kind));
  rep.corner_label = "Lossy operation";
  rep.columns = {"accuracy"};

  auto clean_test = features_for_split(ctx, clean, Split::TEST, false);
  if (clean_test.empty())
    throw MissingBaseline("clean manifest has no TEST clips for the baseline row");
  {
    EvalReport::Row row;
    row.label = DegradationSpec{}.row_label();  // "Raw Data / None"
    row.cells.push_back(evaluate_clips(det, clean_test).accuracy_percent);
    rep.rows.push_back(std::move(row));
  }

  // gather degraded records grouped by (operation, severity)
  std::map<std::pair<int, int>, std::vector<VideoRecord>> groups;
  for (const auto& m : degraded)
    for (const auto& r : m.records) {
      if (r.degradation.is_none())
        throw Error("Precondition", "degraded manifest holds an untagged record: " + r.path);
      groups[{static_cast<int>(r.degradation.operation), r.degradation.severity}].push_back(r);
    }

  const DegradeOp canonical[3] = {DegradeOp::BIT_ERROR, DegradeOp::H265_ABR,
                                  DegradeOp::H265_CRF};
  for (DegradeOp op : canonical) {
    for (int sev = 1; sev <= 3; ++sev) {
      auto it = groups.find({static_cast<int>(op), sev});
      if (it == groups.end()) continue;
      EvalReport::Row row;
      row.label = DegradationSpec{op, sev}.row_label();
      try {
        Manifest sub;
        sub.records = it->second;
        FeatureBuildConfig fcfg;
        fcfg.clip_length = ctx.tcfg.clip_length;
        fcfg.stride = ctx.tcfg.stride;
        fcfg.abs_map = ctx.dcfg.abs_map;
        fcfg.workers = ctx.tcfg.workers;
        fcfg.tolerate_decode_errors = true;  // concealment expected for bit errors
        std::vector<FeatureBuildFailure> failures;
        auto feats = build_clip_features(sub.records, *ctx.store, *ctx.predictor,
                                         *ctx.embedder, fcfg, &failures);
        row.cells.push_back(evaluate_clips(det, feats).accuracy_percent);
        if (!failures.empty())
          row.note = std::to_string(failures.size()) + " file(s) failed to decode";
      } catch (const std::exception& e) {
        row.cells.push_back(std::nullopt);
        row.note = e.what();
      }
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

EvalReport ablation_run(ProtocolContext& ctx, const Manifest& manifest, uint64_t seed) {
  EvalReport rep;
  rep.kind = "ablation";
  rep.seed = seed;
  rep.config_hash = config_hash_of(context_config_json(ctx, rep.kind));
  rep.corner_label = "Variant";
  rep.columns = {"accuracy"};

  auto train = features_for_split(ctx, manifest, Split::TRAIN, false);
  auto val = features_for_split(ctx, manifest, Split::VAL, false);
  auto test = features_for_split(ctx, manifest, Split::TEST, false);

  const DetectorVariant variants[3] = {DetectorVariant::GLOBAL_ONLY,
                                       DetectorVariant::CONCAT,
                                       DetectorVariant::CA_FUSION};
  for (DetectorVariant v : variants) {
    EvalReport::Row row;
    row.label = to_string(v);
    try {
      DetectorConfig dcfg = ctx.dcfg;
      dcfg.variant = v;
      TrainConfig tcfg = ctx.tcfg;
      tcfg.seed = seed;
      TrainOutcome outcome = train_detector(train, val, dcfg, tcfg);
      row.cells.push_back(evaluate_clips(outcome.detector, test).accuracy_percent);
    } catch (const std::exception& e) {
      row.cells.push_back(std::nullopt);
      row.note = e.what();
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace vtd
