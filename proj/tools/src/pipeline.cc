#include "pipeline.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ledger.h"
#include "msunet/data/image_io.h"
#include "msunet/digest.h"
#include "msunet/ensemble/bagging.h"
#include "msunet/ensemble/combiner.h"
#include "msunet/error.h"
#include "msunet/nn/mc.h"
#include "msunet/nn/weights_io.h"
#include "msunet/parallel.h"
#include "msunet/rng.h"
#include "msunet/stats/kde.h"
#include "msunet/stats/resampling.h"
#include "svg.h"

namespace msunet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModelNames[] = {"baseline", "msunet"};

std::string EvalStage(const std::string& model) { return "evaluate-" + model; }

// Tracks the files a stage writes, relative to the workspace.
class Outputs {
 public:
  explicit Outputs(fs::path root) : root_(std::move(root)) {}

  fs::path Path(const std::string& rel) {
    const fs::path p = root_ / rel;
    fs::create_directories(p.parent_path());
    files_.push_back(rel);
    return p;
  }
  void Text(const std::string& rel, const std::string& content) {
    const fs::path p = Path(rel);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw IoError("cannot write " + p.string());
  }
  void Floats(const std::string& rel, const std::vector<double>& values) {
    std::vector<float> f(values.begin(), values.end());
    const fs::path p = Path(rel);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
    if (!out) throw IoError("cannot write " + p.string());
  }
  void Model(const std::string& rel_dir, const nn::MiniSegNet& model) {
    nn::SaveModel(root_ / rel_dir, model);
    files_.push_back(rel_dir + "/weights.json");
    files_.push_back(rel_dir + "/weights.bin");
  }
  std::vector<std::string> Take() { return std::move(files_); }

 private:
  fs::path root_;
  std::vector<std::string> files_;
};

std::string ReadText(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string StageDigest(const RunConfig& config, const std::string& stage) {
  return config.SectionDigest(StageSections(stage));
}

// Checks predecessors, skips when up to date, otherwise clears `dir`,
// runs `body` and records its outputs.
template <typename Fn>
void RunStage(const Context& ctx, Ledger& ledger, const std::string& stage, const std::string& dir,
              const std::vector<std::string>& predecessors, Fn&& body) {
  const auto inputs = ledger.RequireInputs(stage, predecessors);
  for (const auto& p : predecessors) {
    if (ledger.Find(p)->config_digest != StageDigest(ctx.config, p)) {
      throw StageOrderError("stage order violation: '" + p +
                            "' was produced with a different configuration; re-run it before '" +
                            stage + "'");
    }
  }
  const std::string digest = StageDigest(ctx.config, stage);
  if (ledger.UpToDate(stage, digest, inputs)) {
    fmt::print(stderr, "{}: up-to-date, skipped\n", stage);
    return;
  }
  fmt::print(stderr, "{}: running\n", stage);
  if (!dir.empty()) fs::remove_all(ctx.out / dir);
  Outputs outputs(ctx.out);
  body(outputs);
  ledger.Record(stage, digest, inputs, outputs.Take());
}

struct SplitData {
  std::vector<std::string> ids;
  std::vector<Tensor> images;  // [H, W]
  std::vector<Tensor> labels;  // [H, W]
  Tensor roi;

  nn::TrainingSet AsTrainingSet() const {
    nn::TrainingSet set;
    for (const Tensor& im : images) set.inputs.push_back(im.Reshaped({1, im.dim(0), im.dim(1)}));
    set.labels = labels;
    return set;
  }
};

SplitData LoadData(const Context& ctx, const std::string& split) {
  const fs::path dir = ctx.out / "data";
  const data::DatasetManifest manifest = data::LoadManifest(dir);
  SplitData d;
  for (auto& s : data::LoadSplit(dir, manifest, split)) {
    d.ids.push_back(s.id);
    d.images.push_back(std::move(s.image));
    d.labels.push_back(std::move(s.mask));
    d.roi = std::move(s.roi);
  }
  if (d.roi.size() == 0) d.roi = data::ReadPgm(dir / "roi.pgm");
  return d;
}

nn::TrainConfig TrainConfigFor(const Context& ctx, const std::string& label) {
  nn::TrainConfig tc = ctx.config.train;
  tc.seed = DeriveSeed(ctx.config.seed, label);
  return tc;
}

nn::EpochCallback EpochLogger(std::string label) {
  return [label = std::move(label)](const nn::EpochRecord& r) {
    fmt::print(stderr, "[{}] epoch {:3d}  train {:.5f}  vs1 {:.5f}\n", label, r.epoch, r.train_loss,
               r.vs1_loss);
  };
}

std::vector<int> SelectedMembers(const Context& ctx) {
  return ensemble::SelectionReportFromJson(ReadText(ctx.out / "select" / "selection.json")).selected;
}

std::vector<nn::MiniSegNet> LoadMembers(const Context& ctx) {
  std::vector<nn::MiniSegNet> members;
  for (int i : SelectedMembers(ctx)) {
    members.push_back(nn::LoadModel(ctx.out / "candidates" / std::to_string(i)));
  }
  return members;
}

json OptionalJson(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json MetricSetJson(const metrics::MetricSet& m) {
  json j = json::object();
  for (int k = 0; k < metrics::kNumMetrics; ++k) {
    j[std::string(metrics::kMetricNames[static_cast<size_t>(k)])] = OptionalJson(m.Get(k));
  }
  return j;
}

// Per-image normalisation to the image maximum, for viewing.
Tensor NormalisedForView(const Tensor& t) {
  float hi = 0.0f;
  for (float v : t.values()) hi = std::max(hi, v);
  Tensor out = t;
  if (hi > 0.0f) {
    for (float& v : out.values()) v /= hi;
  }
  return out;
}

void EvaluateModel(const Context& ctx, Ledger& ledger, const std::string& model) {
  const bool is_baseline = model == "baseline";
  const std::vector<std::string> preds =
      is_baseline ? std::vector<std::string>{kStageData, kStageBaseline}
                  : std::vector<std::string>{kStageData, kStageCandidates, kStageSelect, kStageCombiner};
  const std::string dir = "eval/" + model;
  RunStage(ctx, ledger, EvalStage(model), dir, preds, [&](Outputs& out) {
    const RunConfig& cfg = ctx.config;
    const SplitData test = LoadData(ctx, "test");
    const size_t n = test.images.size();
    const int passes = cfg.eval.mc_passes;
    std::vector<nn::McOutput> outputs(n);

    if (is_baseline) {
      const nn::MiniSegNet net = nn::LoadModel(ctx.out / "baseline");
      ParallelFor(n, ctx.threads, [&](size_t i) {
        nn::MiniSegNet local = net;
        Rng rng(DeriveSeed(cfg.seed, "mc-baseline", i));
        outputs[i] = nn::McPredict(local, test.images[i], passes, rng);
      });
    } else {
      const std::vector<nn::MiniSegNet> members = LoadMembers(ctx);
      const nn::MiniSegNet combiner = nn::LoadModel(ctx.out / "combiner");
      ParallelFor(n, ctx.threads, [&](size_t i) {
        std::vector<nn::MiniSegNet> local_members = members;
        nn::MiniSegNet local = combiner;
        Rng rng(DeriveSeed(cfg.seed, "mc-msunet", i));
        outputs[i] = ensemble::PredictEnsemble(local_members, local, test.images[i], passes, rng,
                                               cfg.ensemble.append_image);
      });
    }

    // Segmentation quality.
    std::vector<metrics::MetricSet> per_image(n);
    for (size_t i = 0; i < n; ++i) {
      per_image[i] = metrics::ComputeMetrics(
          metrics::Confusion(outputs[i].prob_mean, test.labels[i], test.roi, cfg.eval.threshold));
    }
    const metrics::AggregateMetrics agg = metrics::MeanOverImages(per_image);
    out.Text(dir + "/metrics.csv", metrics::MetricsCsv(test.ids, per_image, agg));
    out.Text(dir + "/metrics.json", metrics::AggregateToJson(agg) + "\n");

    std::vector<Tensor> probs;
    for (const auto& o : outputs) probs.push_back(o.prob_mean);
    const metrics::PrCurve pr = metrics::ComputePrCurve(probs, test.labels, test.roi);
    out.Text(dir + "/pr_curve.csv", metrics::PrCurveCsv(pr));

    for (int i = 0; i < std::min<int>(cfg.eval.render_images, static_cast<int>(n)); ++i) {
      const std::string stem = dir + "/maps/" + test.ids[static_cast<size_t>(i)];
      const nn::McOutput& o = outputs[static_cast<size_t>(i)];
      data::WritePfm(out.Path(stem + ".prob.pfm"), o.prob_mean);
      data::WritePfm(out.Path(stem + ".epistemic.pfm"), o.epistemic);
      data::WritePgm(out.Path(stem + ".prob.pgm"), o.prob_mean);
      data::WritePgm(out.Path(stem + ".epistemic.pgm"), NormalisedForView(o.epistemic));
    }

    // Uncertainty pools and their separation.
    const metrics::UncertaintyPools pools =
        metrics::SplitUncertainty(std::span<const nn::McOutput>(outputs), test.labels, test.roi,
                                  cfg.eval.threshold);
    out.Floats(dir + "/pools/correct.f32", pools.correct);
    out.Floats(dir + "/pools/incorrect.f32", pools.incorrect);
    fmt::print(stderr, "[{}] pools: {} correct, {} incorrect\n", model, pools.correct.size(),
               pools.incorrect.size());

    const stats::DivergenceReport div =
        stats::AnalyzePools(pools.correct, pools.incorrect, cfg.divergence, cfg.stats.gamma,
                            cfg.stats.replicates, cfg.stats.ci_level, DeriveSeed(cfg.seed, "stats"),
                            ctx.threads);
    out.Text(dir + "/divergence.json", stats::DivergenceReportToJson(div) + "\n");
    out.Text(dir + "/bootstrap.csv", stats::BootstrapCsv(div.bootstrap));

    // Densities on a shared grid.
    const std::vector<double> sub_c =
        stats::Subsample(pools.correct, static_cast<size_t>(cfg.eval.kde_cap), DeriveSeed(cfg.seed, "kde-correct"));
    const std::vector<double> sub_i = stats::Subsample(
        pools.incorrect, static_cast<size_t>(cfg.eval.kde_cap), DeriveSeed(cfg.seed, "kde-incorrect"));
    std::vector<double> both = sub_c;
    both.insert(both.end(), sub_i.begin(), sub_i.end());
    std::sort(both.begin(), both.end());
    const double lo = both.front();
    const double hi = std::max(stats::Quantile(both, 0.995), lo + 1e-12);
    const std::vector<double> grid = stats::LinearGrid(lo, hi, static_cast<size_t>(cfg.eval.kde_grid));
    const std::vector<double> kde_c = stats::Kde(sub_c, grid);
    const std::vector<double> kde_i = stats::Kde(sub_i, grid);
    out.Text(dir + "/kde_correct.csv", stats::KdeCsv(grid, kde_c));
    out.Text(dir + "/kde_incorrect.csv", stats::KdeCsv(grid, kde_i));

    std::vector<Series> dens;
    dens.push_back(HistogramSeries(sub_c, 60, lo, hi, "correct (hist)", "#1f77b4"));
    dens.push_back(HistogramSeries(sub_i, 60, lo, hi, "incorrect (hist)", "#ff7f0e"));
    dens.push_back({"correct (KDE)", "#1f77b4", grid, kde_c});
    dens.push_back({"incorrect (KDE)", "#ff7f0e", grid, kde_i});
    PlotSpec dspec;
    dspec.title = model + ": epistemic uncertainty by prediction outcome";
    dspec.x_label = "epistemic uncertainty";
    dspec.y_label = "density";
    out.Text(dir + "/uncertainty.svg", LinePlotSvg(dspec, dens));

    Series curve{model, "#2ca02c", {}, {}};
    for (const auto& p : pr.points) {
      curve.x.push_back(p.recall);
      curve.y.push_back(p.precision);
    }
    PlotSpec pspec;
    pspec.title = fmt::format("{}: precision-recall (AP {:.3f})", model, pr.average_precision);
    pspec.x_label = "recall";
    pspec.y_label = "precision";
    pspec.x_hi = 1.0;
    pspec.y_hi = 1.0;
    out.Text(dir + "/pr_curve.svg", LinePlotSvg(pspec, std::vector<Series>{curve}));

    json summary;
    summary["model"] = model;
    summary["config_digest"] = cfg.SectionDigest(StageSections(kStageReport));
    summary["mc_passes"] = passes;
    summary["threshold"] = cfg.eval.threshold;
    summary["metrics"] = {{"mean", MetricSetJson(agg.mean)}, {"images", agg.images}};
    for (int k = 0; k < metrics::kNumMetrics; ++k) {
      summary["metrics"]["skipped"][std::string(metrics::kMetricNames[static_cast<size_t>(k)])] =
          agg.skipped[static_cast<size_t>(k)];
    }
    summary["per_image"] = json::array();
    for (size_t i = 0; i < n; ++i) {
      json row = MetricSetJson(per_image[i]);
      row["id"] = test.ids[i];
      summary["per_image"].push_back(row);
    }
    summary["pr"] = {{"average_precision", pr.average_precision}, {"prevalence", pr.prevalence}};
    summary["divergence"] = {{"estimate", div.estimate},
                             {"p_value", div.p_value},
                             {"ci_level", div.ci_level},
                             {"ci_lo", div.ci_lo},
                             {"ci_hi", div.ci_hi},
                             {"gamma", div.gamma},
                             {"replicates", div.replicates},
                             {"k", div.config.k},
                             {"alpha", div.config.alpha},
                             {"jitter_scale", div.config.jitter_scale},
                             {"mu_correct", div.delta_mu.mu_correct},
                             {"mu_incorrect", div.delta_mu.mu_incorrect},
                             {"delta_mu", div.delta_mu.delta},
                             {"n_correct", div.n_correct},
                             {"n_incorrect", div.n_incorrect}};
    out.Text(dir + "/summary.json", summary.dump(2) + "\n");
  });
}

json LoadSummary(const Context& ctx, const std::string& model) {
  return json::parse(ReadText(ctx.out / "eval" / model / "summary.json"));
}

std::string Num(const json& v, int digits = 4) {
  if (v.is_null()) return "n/a";
  return fmt::format("{:.{}f}", v.get<double>(), digits);
}

std::string Cell(const json& v, int digits = 4) { return v.is_null() ? "" : Num(v, digits); }

std::vector<std::pair<double, double>> ReadPrCurve(const fs::path& csv) {
  std::istringstream in(ReadText(csv));
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::pair<double, double>> pts;
  while (std::getline(in, line)) {
    double t, p, r;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &p, &r) == 3) pts.emplace_back(r, p);
  }
  return pts;
}

std::vector<std::optional<double>> PerImage(const json& summary, const std::string& metric) {
  std::vector<std::optional<double>> v;
  for (const auto& row : summary.at("per_image")) {
    const json& x = row.at(metric);
    v.push_back(x.is_null() ? std::nullopt : std::optional<double>(x.get<double>()));
  }
  return v;
}

void PrintComparison(const std::vector<json>& summaries) {
  fmt::print("{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9} {:>19} {:>9}\n", "model", "IoU", "spec",
             "sens", "FPR", "FNR", "AP", "R_alpha", "CI", "p");
  for (const json& s : summaries) {
    const json& m = s.at("metrics").at("mean");
    const json& d = s.at("divergence");
    fmt::print("{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9} {:>19} {:>9}\n",
               s.at("model").get<std::string>(), Num(m.at("iou")), Num(m.at("specificity")),
               Num(m.at("sensitivity")), Num(m.at("fpr")), Num(m.at("fnr")),
               Num(s.at("pr").at("average_precision")), Num(d.at("estimate")),
               fmt::format("[{}, {}]", Num(d.at("ci_lo")), Num(d.at("ci_hi"))), Num(d.at("p_value")));
  }
}

}  // namespace

std::vector<std::string> StageSections(const std::string& stage) {
  if (stage == kStageData) return {"phantom"};
  if (stage == kStageBaseline) return {"model", "train"};
  if (stage == kStageCandidates) return {"model", "train", "ensemble.candidates"};
  if (stage == kStageSelect) return {"ensemble.policy", "ensemble.top_k", "ensemble.threshold"};
  if (stage == kStageCombiner) return {"model", "train", "ensemble.append_image"};
  if (stage.rfind("evaluate-", 0) == 0) {
    return {"eval.mc_passes", "eval.threshold", "eval.kde_grid", "eval.kde_cap", "eval.render_images",
            "divergence", "stats", "ensemble.append_image"};
  }
  return {"phantom", "model", "train", "ensemble", "eval", "divergence", "stats"};
}

void GenerateData(const Context& ctx) {
  fs::create_directories(ctx.out);
  Ledger ledger(ctx.out);
  RunStage(ctx, ledger, kStageData, "data", {}, [&](Outputs& out) {
    const data::DatasetManifest manifest =
        data::GenerateDataset(ctx.config.phantom, ctx.out / "data", ctx.threads);
    for (const auto& [split, ids] : manifest.splits) {
      for (const auto& id : ids) {
        out.Path("data/" + split + "/" + id + ".pgm");
        out.Path("data/" + split + "/" + id + ".mask.pgm");
      }
    }
    out.Path("data/roi.pgm");
    out.Path("data/manifest.json");
  });
  fmt::print("{}\n", (ctx.out / "data" / "manifest.json").string());
}

void TrainBaseline(const Context& ctx) {
  Ledger ledger(ctx.out);
  RunStage(ctx, ledger, kStageBaseline, "baseline", {kStageData}, [&](Outputs& out) {
    const nn::TrainingSet train = LoadData(ctx, "train").AsTrainingSet();
    const nn::TrainingSet vs1 = LoadData(ctx, "vs1").AsTrainingSet();
    const nn::TrainResult result = nn::Train(ctx.config.model, train, vs1,
                                             TrainConfigFor(ctx, "baseline"), EpochLogger("baseline"));
    out.Model("baseline", nn::MiniSegNet(ctx.config.model, result.weights));
    out.Text("baseline/history.csv", nn::HistoryCsv(result.history));
    fmt::print(stderr, "[baseline] best epoch {} of {}\n", result.best_epoch, result.stopped_epoch);
  });
  EvaluateModel(ctx, ledger, "baseline");
  PrintComparison({LoadSummary(ctx, "baseline")});
}

void TrainCandidates(const Context& ctx) {
  Ledger ledger(ctx.out);
  RunStage(ctx, ledger, kStageCandidates, "candidates", {kStageData}, [&](Outputs& out) {
    const nn::TrainingSet train = LoadData(ctx, "train").AsTrainingSet();
    const nn::TrainingSet vs1 = LoadData(ctx, "vs1").AsTrainingSet();
    const ensemble::BagPlan plan = ensemble::MakeBagPlan(
        static_cast<int>(train.size()), ctx.config.ensemble.candidates, DeriveSeed(ctx.config.seed, "bags"));
    out.Text("candidates/bags.json", ensemble::BagPlanToJson(plan) + "\n");
    const std::vector<nn::TrainResult> results = ensemble::TrainCandidates(
        plan, ctx.config.model, train, vs1, TrainConfigFor(ctx, "candidates"), ctx.threads,
        [](int c, const nn::EpochRecord& r) {
          fmt::print(stderr, "[candidate {:2d}] epoch {:3d}  train {:.5f}  vs1 {:.5f}\n", c, r.epoch,
                     r.train_loss, r.vs1_loss);
        });
    for (size_t i = 0; i < results.size(); ++i) {
      const std::string d = "candidates/" + std::to_string(i);
      out.Model(d, nn::MiniSegNet(ctx.config.model, results[i].weights));
      out.Text(d + "/history.csv", nn::HistoryCsv(results[i].history));
    }
  });
}

void Select(const Context& ctx) {
  Ledger ledger(ctx.out);
  RunStage(ctx, ledger, kStageSelect, "select", {kStageData, kStageCandidates}, [&](Outputs& out) {
    const SplitData vs2 = LoadData(ctx, "vs2");
    std::vector<nn::MiniSegNet> models;
    for (int i = 0; i < ctx.config.ensemble.candidates; ++i) {
      models.push_back(nn::LoadModel(ctx.out / "candidates" / std::to_string(i)));
    }
    const ensemble::Matrix brier =
        ensemble::BrierMatrixFromModels(models, vs2.images, vs2.labels, vs2.roi, ctx.threads);
    out.Text("select/brier.csv", ensemble::MatrixCsv(brier, "candidate"));
    const ensemble::Matrix r = ensemble::CorrelationMatrix(brier);
    out.Text("select/correlation.csv", ensemble::MatrixCsv(r, "candidate"));
    const ensemble::SelectionReport report = ensemble::SelectMembers(r, ctx.config.ensemble.Policy());
    out.Text("select/selection.json", ensemble::SelectionReportToJson(report) + "\n");
  });
  const ensemble::SelectionReport report =
      ensemble::SelectionReportFromJson(ReadText(ctx.out / "select" / "selection.json"));
  fmt::print("candidate  rho2       selected\n");
  for (size_t i = 0; i < report.rho2.size(); ++i) {
    const bool sel = std::find(report.selected.begin(), report.selected.end(), static_cast<int>(i)) !=
                     report.selected.end();
    fmt::print("{:<10} {:.6f}   {}{}\n", i, report.rho2[i], sel ? "yes" : "no",
               report.clamped[i] ? " (clamped)" : "");
  }
  std::string chosen;
  for (int i : report.selected) chosen += (chosen.empty() ? "" : ",") + std::to_string(i);
  fmt::print("policy: {}\nselected: {}\n", report.policy.Describe(), chosen);
}

void TrainCombiner(const Context& ctx) {
  Ledger ledger(ctx.out);
  RunStage(ctx, ledger, kStageCombiner, "combiner", {kStageData, kStageCandidates, kStageSelect},
           [&](Outputs& out) {
             std::vector<nn::MiniSegNet> members = LoadMembers(ctx);
             const SplitData train = LoadData(ctx, "train");
             const SplitData vs1 = LoadData(ctx, "vs1");
             const nn::TrainResult result = ensemble::TrainCombiner(
                 members, ctx.config.model, train.images, train.labels, vs1.images, vs1.labels,
                 TrainConfigFor(ctx, "combiner"), ctx.config.ensemble.append_image, ctx.threads,
                 EpochLogger("combiner"));
             nn::MiniSegNetConfig cfg = ctx.config.model;
             cfg.in_channels = static_cast<int>(members.size()) + (ctx.config.ensemble.append_image ? 1 : 0);
             out.Model("combiner", nn::MiniSegNet(cfg, result.weights));
             out.Text("combiner/history.csv", nn::HistoryCsv(result.history));
           });
}

void Evaluate(const Context& ctx, const std::string& which) {
  if (which != "baseline" && which != "msunet" && which != "both") {
    throw ConfigError("--model", "expected baseline, msunet or both");
  }
  Ledger ledger(ctx.out);
  std::vector<json> summaries;
  for (const char* model : kModelNames) {
    if (which != "both" && which != model) continue;
    EvaluateModel(ctx, ledger, model);
    summaries.push_back(LoadSummary(ctx, model));
  }
  PrintComparison(summaries);
}

void Report(const Context& ctx) {
  Ledger ledger(ctx.out);
  std::vector<std::string> models, preds;
  for (const char* model : kModelNames) {
    if (ledger.Has(EvalStage(model))) {
      models.push_back(model);
      preds.push_back(EvalStage(model));
    }
  }
  if (models.empty()) {
    throw ConfigError("--out", "no evaluated model in " + ctx.out.string() + "; run evaluate first");
  }
  RunStage(ctx, ledger, kStageReport, "report", preds, [&](Outputs& out) {
    const RunConfig& cfg = ctx.config;
    std::vector<json> s;
    for (const auto& m : models) s.push_back(LoadSummary(ctx, m));
    const json& d0 = s.front().at("divergence");
    const bool both = s.size() == 2;

    std::string md;
    md += "# MSU-Net run report\n\n";
    md += fmt::format("Config digest: `{}`\n\n", cfg.SectionDigest(StageSections(kStageReport)));
    md += fmt::format(
        "Master seed {}; T = {} MC passes; threshold {}; k = {}, alpha = {}, B = {}, gamma = {}, "
        "CI level {}.\n\n",
        cfg.seed, cfg.eval.mc_passes, cfg.eval.threshold, d0.at("k").get<int>(),
        d0.at("alpha").get<double>(), d0.at("replicates").get<int>(), d0.at("gamma").get<double>(),
        d0.at("ci_level").get<double>());

    std::string t1 = "model,mu_correct,mu_incorrect,delta_mu,renyi,ci_lo,ci_hi,p_value,n_correct,n_incorrect\n";
    md += "## Uncertainty quality in ROI\n\n";
    md += "| Model | mu(correct) | mu(incorrect) | Delta mu | R_alpha(corr\\|\\|incorr) | 95% CI | p-value |\n";
    md += "|---|---|---|---|---|---|---|\n";
    for (const json& x : s) {
      const json& d = x.at("divergence");
      const std::string name = x.at("model").get<std::string>();
      md += fmt::format("| {} | {} | {} | {} | {} | [{}, {}] | {} |\n", name, Num(d.at("mu_correct"), 6),
                        Num(d.at("mu_incorrect"), 6), Num(d.at("delta_mu"), 6), Num(d.at("estimate")),
                        Num(d.at("ci_lo")), Num(d.at("ci_hi")), Num(d.at("p_value")));
      t1 += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", name, Cell(d.at("mu_correct"), 8),
                        Cell(d.at("mu_incorrect"), 8), Cell(d.at("delta_mu"), 8), Cell(d.at("estimate"), 6),
                        Cell(d.at("ci_lo"), 6), Cell(d.at("ci_hi"), 6), Cell(d.at("p_value"), 6),
                        d.at("n_correct").get<size_t>(), d.at("n_incorrect").get<size_t>());
    }
    if (both) {
      const json& a = s[0].at("divergence");
      const json& b = s[1].at("divergence");
      const auto diff = [](const json& x, const json& y, const char* key) {
        return json(y.at(key).get<double>() - x.at(key).get<double>());
      };
      md += fmt::format("| Delta (msunet - baseline) | {} | {} | {} | {} | | |\n",
                        Num(diff(a, b, "mu_correct"), 6), Num(diff(a, b, "mu_incorrect"), 6),
                        Num(diff(a, b, "delta_mu"), 6), Num(diff(a, b, "estimate")));
      t1 += fmt::format("delta,{},{},{},{},,,,,\n", Cell(diff(a, b, "mu_correct"), 8),
                        Cell(diff(a, b, "mu_incorrect"), 8), Cell(diff(a, b, "delta_mu"), 8),
                        Cell(diff(a, b, "estimate"), 6));
      const bool disjoint = b.at("ci_lo").get<double>() > a.at("ci_hi").get<double>() ||
                            a.at("ci_lo").get<double>() > b.at("ci_hi").get<double>();
      md += fmt::format("\nConfidence intervals {}.\n", disjoint ? "do not overlap" : "overlap");
    }

    static const char* kCols[] = {"iou", "specificity", "sensitivity", "fpr", "fnr"};
    std::string t2 = "model,iou,specificity,sensitivity,fpr,fnr,average_precision,prevalence\n";
    md += "\n## Segmentation performance in ROI\n\n";
    md += "| Model | Mean IoU | Specificity | Sensitivity | FPR | FNR | AP |\n|---|---|---|---|---|---|---|\n";
    for (const json& x : s) {
      const json& m = x.at("metrics").at("mean");
      const std::string name = x.at("model").get<std::string>();
      md += "| " + name;
      t2 += name;
      for (const char* c : kCols) {
        md += " | " + Num(m.at(c));
        t2 += "," + Cell(m.at(c), 6);
      }
      md += " | " + Num(x.at("pr").at("average_precision")) + " |\n";
      t2 += "," + Cell(x.at("pr").at("average_precision"), 6) + "," + Cell(x.at("pr").at("prevalence"), 6) + "\n";
    }
    if (both) {
      const json& a = s[0].at("metrics").at("mean");
      const json& b = s[1].at("metrics").at("mean");
      md += "| Delta (msunet - baseline)";
      t2 += "delta";
      for (const char* c : kCols) {
        const json dv = a.at(c).is_null() || b.at(c).is_null()
                            ? json(nullptr)
                            : json(b.at(c).get<double>() - a.at(c).get<double>());
        md += " | " + Num(dv);
        t2 += "," + Cell(dv, 6);
      }
      const json dap(s[1].at("pr").at("average_precision").get<double>() -
                     s[0].at("pr").at("average_precision").get<double>());
      md += " | " + Num(dap) + " |\n";
      t2 += "," + Cell(dap, 6) + ",\n";
    }

    const metrics::PairedTestKind kind = metrics::ParsePairedTestKind(cfg.eval.paired_test);
    if (both && kind != metrics::PairedTestKind::kNone) {
      md += fmt::format("\n## Paired per-image tests ({})\n\n", metrics::ToString(kind));
      md += "| Metric | pairs | mean difference (msunet - baseline) | statistic | p-value |\n|---|---|---|---|---|\n";
      for (const char* metric : {"sensitivity", "fnr"}) {
        const auto diffs = metrics::PairedDifferences(PerImage(s[0], metric), PerImage(s[1], metric));
        const metrics::PairedTestResult r = metrics::PairedTest(diffs, kind);
        md += fmt::format("| {} | {} | {:.6f} | {:.4f} | {:.4g} |\n", metric, r.n, r.mean_difference,
                          r.statistic, r.p_value);
      }
    }

    std::vector<Series> curves;
    const char* colors[] = {"#1f77b4", "#d62728"};
    for (size_t i = 0; i < models.size(); ++i) {
      Series c{fmt::format("{} (AP {:.3f})", models[i], s[i].at("pr").at("average_precision").get<double>()),
               colors[i], {}, {}};
      for (const auto& [rec, prec] : ReadPrCurve(ctx.out / "eval" / models[i] / "pr_curve.csv")) {
        c.x.push_back(rec);
        c.y.push_back(prec);
      }
      curves.push_back(std::move(c));
    }
    PlotSpec spec;
    spec.title = "Precision-recall in ROI";
    spec.x_label = "recall";
    spec.y_label = "precision";
    spec.x_hi = 1.0;
    spec.y_hi = 1.0;
    out.Text("report/pr_curves.svg", LinePlotSvg(spec, curves));
    out.Text("report/report.md", md);
    out.Text("report/table1.csv", t1);
    out.Text("report/table2.csv", t2);
  });
  std::cout << ReadText(ctx.out / "report" / "report.md");
}

}  // namespace msunet::cli
