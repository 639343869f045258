#include "mtqa/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mtqa/checkpoint.hpp"
#include "mtqa/config.hpp"
#include "mtqa/datamodel.hpp"
#include "mtqa/eval.hpp"
#include "mtqa/reacq.hpp"
#include "mtqa/roi.hpp"
#include "mtqa/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mtqa {
namespace {

std::string flag_name(const std::string& key) {
  std::string f = key;
  for (auto& ch : f)
    if (ch == '_') ch = '-';
  return "--" + f;
}

/// Config-key flags registered on one subcommand.
struct KeyFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, std::vector<CLI::Option*>> options;

  void add_all(CLI::App* app) {
    static const RunConfig defaults = resolve_config({}, {});
    for (const auto& k : config_keys()) {
      auto& slot = values[k.name];
      options[k.name].push_back(app->add_option(flag_name(k.name), slot, k.doc + " [default: " + k.get(defaults) + "]"));
    }
  }

  std::map<std::string, std::string> given() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, opts] : options)
      for (const auto* opt : opts)
        if (opt->count() > 0) out[name] = values.at(name);
    return out;
  }
};

struct Common {
  std::string config_path;
  std::string out;
  KeyFlags keys;
};

/// Line-delimited JSON event log plus human-readable progress.
class Logger {
 public:
  Logger(std::ostream& err) : err_(err) {}
  void open(const fs::path& path) { file_ = std::make_unique<std::ofstream>(path, std::ios::app); }
  void info(const std::string& event, const json& fields = json::object()) {
    err_ << "[mtqa] " << event;
    if (!fields.empty()) err_ << ' ' << fields.dump();
    err_ << '\n';
    if (file_ && *file_) {
      json rec = fields;
      rec["event"] = event;
      *file_ << rec.dump() << '\n';
    }
  }

 private:
  std::ostream& err_;
  std::unique_ptr<std::ofstream> file_;
};

RunConfig load_config(const Common& c) {
  std::vector<std::pair<std::string, std::string>> file_entries;
  if (!c.config_path.empty()) file_entries = read_config_file(c.config_path);
  RunConfig cfg = resolve_config(file_entries, c.keys.given());
  cfg.validate();
  return cfg;
}

fs::path output_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("MTQA_OUT_DIR"); env && *env) return env;
  return ".";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

void write_outputs_manifest(const fs::path& dir, const std::vector<fs::path>& files) {
  std::ostringstream os;
  for (const auto& f : files) os << fs::relative(f, dir).generic_string() << '\n';
  write_text(dir / "outputs.txt", os.str());
}

/// A manifest argument may name a file or a gen-data directory holding manifest_<split>.csv.
fs::path manifest_for(const std::string& manifest, Split split) {
  const fs::path p(manifest);
  if (fs::is_directory(p)) return p / ("manifest_" + std::string(to_string(split)) + ".csv");
  return p;
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const Common& c, std::ostream& out, Logger& log) {
  const RunConfig cfg = load_config(c);
  const fs::path dir = output_dir(c);
  fs::create_directories(dir);
  log.open(dir / "log.jsonl");
  log.info("gen-data.start", {{"out", dir.string()}});
  DatasetSplits splits = generate_splits(cfg.synth, cfg.sizes);
  if (cfg.n_labeled >= 0) {
    splits.train = hide_labels(splits.train, static_cast<std::size_t>(cfg.n_labeled), cfg.data_seed + 17);
  }
  std::vector<fs::path> produced;
  for (const Dataset* ds : {&splits.train, &splits.val, &splits.test}) {
    const fs::path m = dir / ("manifest_" + std::string(to_string(ds->split)) + ".csv");
    save_manifest(*ds, m);
    produced.push_back(m);
    log.info("gen-data.split", {{"split", to_string(ds->split)}, {"labeled", ds->labeled.size()},
                                {"unlabeled", ds->unlabeled.size()}});
  }
  write_text(dir / "resolved_config.txt", dump_config(cfg));
  produced.push_back(dir / "resolved_config.txt");
  produced.push_back(dir / "log.jsonl");
  write_outputs_manifest(dir, produced);
  out << json{{"train", splits.train.size()}, {"val", splits.val.size()}, {"test", splits.test.size()}}.dump() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------- extract-roi

int cmd_extract_roi(const Common& c, const std::string& manifest, const std::string& split_name,
                    const std::string& stack_id, std::ostream& out, Logger& log) {
  const RunConfig cfg = load_config(c);
  if (c.out.empty()) throw ConfigError("extract-roi needs --out <mask file>");
  const Dataset ds = load_manifest(manifest_for(manifest, parse_split(split_name)));
  std::vector<RawMask> masks;
  auto add = [&](const Slice& s) {
    if (s.stack_id == stack_id) masks.push_back(mask_stats(threshold_segmenter(s.pixels, cfg.seg_threshold)));
  };
  for (const auto& l : ds.labeled) add(l.slice);
  for (const auto& u : ds.unlabeled) add(u);
  if (masks.empty()) throw DataError("no slices of stack '" + stack_id + "' in the manifest");
  RoiConfig rc = RoiConfig::from_fraction(cfg.area_min_frac, ds.image_size());
  rc.weighting = cfg.roi_weighting;
  const RoiCircle circle = aggregate_stack_roi(masks, rc);
  const int n = ds.image_size();
  const fs::path out_path(c.out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_mask_pgm(out_path, rasterize_circle(circle, n, n));
  long retained = 0;
  for (const auto& m : masks) retained += m.area >= rc.area_min;
  const json rec{{"stack_id", stack_id},        {"center_row", circle.center.row}, {"center_col", circle.center.col},
                 {"spread", circle.spread},     {"radius", circle.radius},         {"masks", masks.size()},
                 {"retained", retained},        {"area_min", rc.area_min},         {"mask", out_path.string()}};
  log.info("extract-roi.done", rec);
  out << rec.dump() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------- train

RoiMasks roi_masks_for(const Dataset& ds, const RunConfig& cfg) {
  RoiConfig rc = RoiConfig::from_fraction(cfg.area_min_frac, ds.image_size());
  rc.weighting = cfg.roi_weighting;
  RoiMasks out;
  for (auto& [id, roi] : compute_stack_rois(ds, rc, cfg.seg_threshold)) out.emplace(id, std::move(roi.mask));
  return out;
}

int cmd_train(const Common& c, const std::string& manifest, const std::string& val_manifest, std::ostream& out,
              Logger& log) {
  RunConfig cfg = load_config(c);
  const fs::path dir = output_dir(c);
  fs::create_directories(dir);
  log.open(dir / "log.jsonl");
  const Dataset train_set = load_manifest(manifest_for(manifest, Split::Train), Split::Train);
  Dataset val_set;
  if (!val_manifest.empty()) {
    val_set = load_manifest(val_manifest, Split::Val);
  } else if (fs::is_directory(manifest) && fs::exists(manifest_for(manifest, Split::Val))) {
    val_set = load_manifest(manifest_for(manifest, Split::Val), Split::Val);
  }
  if (train_set.image_size() != cfg.train.arch.input_size) {
    throw ConfigError("manifest images are " + std::to_string(train_set.image_size()) +
                      " px; set image_size to match (model input is " + std::to_string(cfg.train.arch.input_size) + ")");
  }
  const RoiMasks rois = roi_masks_for(train_set, cfg);
  write_text(dir / "resolved_config.txt", dump_config(cfg));
  std::vector<fs::path> produced{dir / "resolved_config.txt", dir / "log.jsonl"};
  log.info("train.start", {{"labeled", train_set.labeled.size()}, {"unlabeled", train_set.unlabeled.size()},
                           {"val", val_set.labeled.size()}, {"arch", cfg.train.arch.id()},
                           {"steps_per_epoch", resolve_steps_per_epoch(train_set, cfg.train)}});

  std::vector<EvalReport> best_reports;
  json runs = json::array();
  for (int r = 0; r < cfg.train.runs; ++r) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.train.seed + static_cast<std::uint64_t>(r);
    tc.warn = [&](const std::string& m) { log.info("warning", {{"message", m}}); };
    const fs::path run_dir = cfg.train.runs > 1 ? dir / ("run_" + std::to_string(r)) : dir;
    fs::create_directories(run_dir);
    const fs::path metrics = run_dir / "metrics.jsonl";
    std::ofstream mf(metrics);
    if (!mf) throw IoError("cannot write " + metrics.string());
    const TrainResult res = train(train_set, val_set, rois, tc, [&](const EpochRecord& rec) {
      mf << to_json(rec).dump() << '\n';
      mf.flush();
      json progress{{"run", r}, {"epoch", rec.epoch}, {"total", rec.loss.total}, {"lr", rec.lr}};
      if (rec.val_teacher) progress["val_teacher_acc"] = rec.val_teacher->accuracy;
      log.info("train.epoch", progress);
    });
    const fs::path best = run_dir / "best_teacher.ckpt";
    const fs::path final_ckpt = run_dir / "final.ckpt";
    save_checkpoint(best, make_checkpoint(res.best_state, tc, res.best_epoch));
    save_checkpoint(final_ckpt, make_checkpoint(res.final_state, tc, cfg.train.epochs - 1));
    produced.insert(produced.end(), {metrics, best, final_ckpt});
    json run{{"run", r}, {"seed", tc.seed}, {"best_epoch", res.best_epoch}};
    if (!val_set.labeled.empty() && cfg.train.epochs > 0) {
      const EvalReport rep = evaluate_model(tc.arch, res.best_teacher, val_set);
      run["val_teacher"] = to_json(rep);
      best_reports.push_back(rep);
    }
    runs.push_back(run);
  }
  json summary{{"runs", runs}};
  if (!best_reports.empty()) {
    const RunAggregate agg = aggregate_runs(best_reports);
    summary["aggregate"] = {{"accuracy_mean", agg.accuracy.mean}, {"accuracy_std", agg.accuracy.std},
                            {"auc_n_mean", agg.auc_n.mean},       {"auc_n_std", agg.auc_n.std},
                            {"runs", agg.accuracy.count}};
  }
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  produced.push_back(dir / "summary.json");
  write_outputs_manifest(dir, produced);
  out << summary.dump() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const Common& c, const std::string& checkpoint, const std::string& manifest,
                 const std::string& split_name, const std::string& model, const std::string& roc_path,
                 const std::string& probs_path, std::ostream& out, Logger& log) {
  const Split split = parse_split(split_name);
  if (model != "teacher" && model != "student") throw ConfigError("--model must be teacher or student");
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const ArchSpec arch = ckpt.arch();
  const ModelParams& params = ckpt.group(model);
  const Dataset ds = load_manifest(manifest_for(manifest, split), split);
  if (ds.image_size() != arch.input_size) throw ConfigError("manifest image size does not match the checkpoint model");

  std::vector<const Slice*> slices;
  std::vector<Label> truth;
  for (const auto& l : ds.labeled) {
    slices.push_back(&l.slice);
    truth.push_back(l.label);
  }
  for (const auto& u : ds.unlabeled) slices.push_back(&u);
  const Matrix probs = predict_probs(arch, params, slices);
  Matrix labeled_probs(static_cast<int>(truth.size()), 3);
  std::copy(probs.data.begin(), probs.data.begin() + static_cast<std::ptrdiff_t>(truth.size()) * 3,
            labeled_probs.data.begin());
  const EvalReport rep = evaluate_predictions(labeled_probs, truth);
  json rec = to_json(rep);
  rec["split"] = to_string(split);
  rec["model"] = model;
  rec["checkpoint"] = checkpoint;

  const auto rows = read_manifest_rows(manifest_for(manifest, split));
  if (!probs_path.empty()) {
    // Manifest rows are loaded labeled-first; rebuild the same order for paths.
    std::vector<const ManifestRow*> ordered;
    for (const auto& r : rows)
      if (r.label) ordered.push_back(&r);
    for (const auto& r : rows)
      if (!r.label) ordered.push_back(&r);
    std::ofstream f(probs_path);
    if (!f) throw IoError("cannot write " + probs_path);
    f << "relative_image_path,stack_id,slice_index,p_d,p_n,p_w\n" << std::setprecision(17);
    for (std::size_t i = 0; i < slices.size(); ++i) {
      const int row = static_cast<int>(i);
      f << ordered[i]->relative_path << ',' << slices[i]->stack_id << ',' << slices[i]->slice_index << ','
        << probs(row, 0) << ',' << probs(row, 1) << ',' << probs(row, 2) << '\n';
    }
    rec["probs_csv"] = probs_path;
  }
  if (!roc_path.empty()) {
    std::vector<double> pn;
    for (int i = 0; i < labeled_probs.rows; ++i) pn.push_back(labeled_probs(i, 1));
    std::ofstream f(roc_path);
    if (!f) throw IoError("cannot write " + roc_path);
    f << "fpr,tpr,threshold\n" << std::setprecision(17);
    for (const auto& p : roc_curve_n(pn, truth)) f << p.fpr << ',' << p.tpr << ',' << p.threshold << '\n';
    rec["roc_csv"] = roc_path;
  }
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_text(fs::path(c.out) / "report.json", rec.dump(2) + "\n");
    write_outputs_manifest(c.out, {fs::path(c.out) / "report.json"});
  }
  log.info("evaluate.done", {{"accuracy", rep.accuracy}, {"n", rep.n_examples}});
  out << rec.dump() << '\n';
  return kExitOk;
}

// ----------------------------------------------------------- simulate-reacq

std::vector<StackPrediction> join_probs(const fs::path& probs_csv, const fs::path& manifest, Logger& log) {
  std::map<std::pair<std::string, int>, Label> labels;
  std::set<std::string> unlabeled_stacks;
  for (const auto& r : read_manifest_rows(manifest)) {
    if (r.label) labels[{r.stack_id, r.slice_index}] = *r.label;
    else unlabeled_stacks.insert(r.stack_id);
  }
  std::ifstream in(probs_csv);
  if (!in) throw IoError("cannot open probabilities file " + probs_csv.string());
  std::map<std::string, std::map<int, std::pair<Probs, Label>>> stacks;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (++row == 1 || line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) cols.push_back(item);
    if (cols.size() != 6) {
      throw ParseError(probs_csv.string() + ": row " + std::to_string(row) + ": expected 6 columns");
    }
    Probs p{};
    int idx = 0;
    try {
      idx = std::stoi(cols[2]);
      for (int k = 0; k < 3; ++k) p[static_cast<std::size_t>(k)] = std::stod(cols[static_cast<std::size_t>(3 + k)]);
    } catch (const std::exception&) {
      throw ParseError(probs_csv.string() + ": row " + std::to_string(row) + ": bad number");
    }
    if (unlabeled_stacks.count(cols[1])) continue;
    auto it = labels.find({cols[1], idx});
    if (it == labels.end()) continue;
    stacks[cols[1]][idx] = {p, it->second};
  }
  for (const auto& s : unlabeled_stacks) log.info("warning", {{"message", "skipping partly unlabeled stack " + s}});
  std::vector<StackPrediction> out;
  for (const auto& [id, slices] : stacks) {
    StackPrediction sp;
    sp.stack_id = id;
    for (const auto& [i, pl] : slices) {
      sp.probs.push_back(pl.first);
      sp.truth.push_back(pl.second);
    }
    out.push_back(std::move(sp));
  }
  if (out.empty()) throw DataError("no labeled stacks shared by the probabilities file and the manifest");
  return out;
}

void write_svg_plot(const fs::path& path, const std::vector<ReacqCurvePoint>& pts) {
  const double w = 480, h = 360, m = 50;
  double ymax = 1;
  for (const auto& p : pts) ymax = std::max({ymax, p.mean_missed, p.random_mean_missed});
  double qmin = pts.empty() ? 0 : pts.front().q, qmax = pts.empty() ? 1 : pts.back().q;
  if (qmax <= qmin) qmax = qmin + 1;
  auto x = [&](double q) { return m + (q - qmin) / (qmax - qmin) * (w - 2 * m); };
  auto y = [&](double v) { return h - m - v / ymax * (h - 2 * m); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<line x1=\"" << m << "\" y1=\"" << h - m << "\" x2=\"" << w - m << "\" y2=\"" << h - m << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << h - m << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << w / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">q</text>\n"
     << "<text x=\"15\" y=\"" << h / 2 << "\" transform=\"rotate(-90 15 " << h / 2
     << ")\" text-anchor=\"middle\">missed N slices per stack</text>\n";
  auto polyline = [&](auto value, const char* color, const char* label, double ly) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : pts) os << x(p.q) << ',' << y(value(p)) << ' ';
    os << "\"/>\n<text x=\"" << w - m - 100 << "\" y=\"" << ly << "\" fill=\"" << color << "\">" << label << "</text>\n";
  };
  polyline([](const ReacqCurvePoint& p) { return p.mean_missed; }, "#1f77b4", "model", m);
  polyline([](const ReacqCurvePoint& p) { return p.random_mean_missed; }, "#d62728", "random", m + 18);
  for (const auto& p : pts) {
    os << "<text x=\"" << x(p.q) << "\" y=\"" << h - m + 16 << "\" text-anchor=\"middle\" font-size=\"11\">" << p.q
       << "</text>\n";
  }
  os << "</svg>\n";
  write_text(path, os.str());
}

int cmd_simulate(const Common& c, const std::string& probs, const std::string& manifest,
                 const std::string& split_name, const std::string& plot, std::ostream& out, Logger& log) {
  const RunConfig cfg = load_config(c);
  const auto stacks = join_probs(probs, manifest_for(manifest, parse_split(split_name)), log);
  const auto curve = simulate_curve(stacks, cfg.q_list, cfg.trials, cfg.reacq_seed);
  std::ostringstream csv;
  csv << "q,mean_missed,std_missed,random_mean_missed\n" << std::setprecision(10);
  for (const auto& p : curve) csv << p.q << ',' << p.mean_missed << ',' << p.std_missed << ',' << p.random_mean_missed << '\n';
  if (!c.out.empty()) {
    const fs::path o(c.out);
    if (o.has_parent_path()) fs::create_directories(o.parent_path());
    write_text(o, csv.str());
  } else {
    out << csv.str();
  }
  if (!plot.empty()) write_svg_plot(plot, curve);
  log.info("simulate-reacq.done", {{"stacks", stacks.size()}, {"points", curve.size()}});
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean-teacher slice quality assessment with ROI consistency"};
  app.name("mtqa");
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  app.footer(
      "Exit codes: 0 ok, 1 internal error, 2 usage, 3 config, 4 I/O, 5 data/format, 6 numeric, 7 shape.\n"
      "MTQA_OUT_DIR sets the output directory when --out is not given.");

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "flat key = value config file");
    common.keys.add_all(sub);
  };

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic train/val/test dataset");
  add_common(gen);
  gen->add_option("--out", common.out, "output directory");

  std::string manifest, split = "train", stack_id, val_manifest;
  auto* roi = app.add_subcommand("extract-roi", "Write the aggregated circular ROI mask of one stack");
  add_common(roi);
  roi->add_option("--manifest", manifest, "manifest file or gen-data directory")->required();
  roi->add_option("--split", split, "split when --manifest is a directory")->capture_default_str();
  roi->add_option("--stack-id", stack_id, "stack to aggregate")->required();
  roi->add_option("--out", common.out, "output mask (PGM, values 0/1)")->required();

  auto* tr = app.add_subcommand("train", "Train student/teacher models");
  add_common(tr);
  tr->add_option("--manifest", manifest, "training manifest or gen-data directory")->required();
  tr->add_option("--val-manifest", val_manifest, "validation manifest (default: manifest_val.csv of the directory)");
  tr->add_option("--out", common.out, "output directory");

  std::string checkpoint, model = "teacher", roc, dump_probs, eval_split = "test";
  auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on a manifest split");
  add_common(ev);
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--manifest", manifest, "manifest file or gen-data directory")->required();
  ev->add_option("--split", eval_split, "split to evaluate")->capture_default_str();
  ev->add_option("--model", model, "teacher or student")->capture_default_str();
  ev->add_option("--roc", roc, "write ROC points for class N to this CSV");
  ev->add_option("--dump-probs", dump_probs, "write per-slice probabilities to this CSV");
  ev->add_option("--out", common.out, "directory for report.json");

  std::string probs, plot, sim_split = "test";
  auto* sim = app.add_subcommand("simulate-reacq", "Simulate slice reacquisition from saved probabilities");
  add_common(sim);
  sim->add_option("--probs", probs, "probabilities CSV from evaluate --dump-probs")->required();
  sim->add_option("--manifest", manifest, "manifest file or gen-data directory")->required();
  sim->add_option("--split", sim_split, "split when --manifest is a directory")->capture_default_str();
  sim->add_option("--out", common.out, "output CSV (default: stdout)");
  sim->add_option("--plot", plot, "also write an SVG plot of the curves");

  app.require_subcommand(1, 1);

  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  Logger log(err);
  try {
    if (*gen) return cmd_gen_data(common, out, log);
    if (*roi) return cmd_extract_roi(common, manifest, split, stack_id, out, log);
    if (*tr) return cmd_train(common, manifest, val_manifest, out, log);
    if (*ev) return cmd_evaluate(common, checkpoint, manifest, eval_split, model, roc, dump_probs, out, log);
    if (*sim) return cmd_simulate(common, probs, manifest, sim_split, plot, out, log);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
    return kExitShape;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace mtqa
