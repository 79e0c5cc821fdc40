#include "otoc/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "otoc/annotate.hpp"
#include "otoc/checkpoint.hpp"
#include "otoc/config.hpp"
#include "otoc/error.hpp"
#include "otoc/metrics.hpp"
#include "otoc/selftrain.hpp"
#include "otoc/synth.hpp"
#include "otoc/unary.hpp"

namespace otoc {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> scene_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".otoc") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<PreparedScene> prepare_dir(const fs::path& dir, const TrainConfig& cfg) {
  std::vector<PreparedScene> out;
  for (const auto& f : scene_files(dir)) out.push_back(prepare_scene(load_scene(f), cfg));
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream o(path, std::ios::binary | std::ios::trunc);
  if (!o) throw IoError("cannot write " + path.string());
  o << text;
  if (!o) throw IoError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string q_csv(const RowMatrix& q) {
  std::string s;
  char buf[32];
  for (Eigen::Index j = 0; j < q.rows(); ++j) {
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%s%.9g", c ? "," : "", q(j, c));
      s += buf;
    }
    s += '\n';
  }
  return s;
}

Models load_models(const fs::path& dir) {
  Models m;
  m.unary = load_checkpoint(dir / "unary.otnn").model;
  if (fs::exists(dir / "relation.otnn")) {
    auto rel = load_checkpoint(dir / "relation.otnn");
    m.relation = std::move(rel.model);
    m.bank = std::move(rel.bank);
  }
  return m;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"One-click weakly supervised point-cloud segmentation", "otoc"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--seed", seed_flag, "global seed (overrides the config)");

  std::string out_dir, train_dir, eval_dir, model_dir, dump_dir, out_file, scene_path, partition_path, pred_path,
      gt_path;
  int count = 0;
  bool no_propagation = false;
  std::optional<int> clicks_flag;
  std::optional<double> fraction_flag;
  std::vector<std::string> csv_paths;

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene corpus");
  synth->add_option("--out-dir", out_dir)->required();
  synth->add_option("--count", count)->required();

  auto* part = app.add_subcommand("partition", "over-segment a scene into super-voxels");
  part->add_option("scene", scene_path)->required();
  part->add_option("--out", out_file)->required();

  auto* annotate = app.add_subcommand("annotate", "simulate clicks and expand them to super-voxels");
  annotate->add_option("scene", scene_path)->required();
  annotate->add_option("--partition", partition_path)->required();
  annotate->add_option("--out", out_file)->required();
  annotate->add_option("--clicks-per-thing", clicks_flag);
  annotate->add_option("--thing-fraction", fraction_flag);

  auto* train = app.add_subcommand("train", "run self-training end to end");
  train->add_option("--train-dir", train_dir)->required();
  train->add_option("--eval-dir", eval_dir);
  train->add_option("--out-dir", out_dir)->required();

  auto* infer = app.add_subcommand("infer", "label a scene with trained models");
  infer->add_option("scene", scene_path)->required();
  infer->add_option("--model-dir", model_dir)->required();
  infer->add_option("--out", out_file)->required();
  infer->add_option("--partition", partition_path);
  infer->add_flag("--no-propagation", no_propagation, "classifier only, no graph or relation network");
  infer->add_option("--dump-q", dump_dir, "write the marginals after every mean-field sweep as CSV");

  auto* eval = app.add_subcommand("eval", "per-class IoU and mIoU of a prediction");
  eval->add_option("pred", pred_path)->required();
  eval->add_option("gt", gt_path)->required();
  eval->add_option("--partition", partition_path, "expand super-voxel predictions to points");

  auto* report = app.add_subcommand("report", "summarize per-iteration CSV reports");
  report->add_option("csv", csv_paths)->required();

  std::vector<std::string> argv_store{"otoc"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitValidation;
  }

  try {
    RunConfig rc;
    if (!config_path.empty())
      rc = load_config(config_path);
    else if (!model_dir.empty() && fs::exists(fs::path(model_dir) / "config.cfg"))
      rc = load_config(fs::path(model_dir) / "config.cfg");
    if (seed_flag) rc.seed = *seed_flag;
    TrainConfig& cfg = rc.train;

    if (synth->parsed()) {
      SynthSpec spec = rc.synth;
      spec.seed = rc.seed;
      for (const auto& f : generate_corpus(spec, count, out_dir)) out << f.string() << "\n";
    } else if (part->parsed()) {
      const PreparedScene ps = prepare_scene(load_scene(scene_path), cfg);
      save_partition(ps.partition, out_file);
      out << "super-voxels: " << ps.partition.num_supervoxels() << "\n";
    } else if (annotate->parsed()) {
      const Scene scene = load_scene(scene_path);
      const auto sv = load_partition(partition_path, scene);
      const auto clicks = simulate_clicks(scene, rc.seed, clicks_flag.value_or(cfg.clicks_per_thing),
                                          fraction_flag.value_or(cfg.thing_fraction));
      const auto labels = expand_clicks(clicks, sv);
      save_pseudo_labels(labels, out_file);
      out << "clicks: " << clicks.clicks.size() << "\nseeded super-voxels: "
          << std::count_if(labels.entries.begin(), labels.entries.end(), [](const PseudoLabel& e) { return e.label.has_value(); })
          << " of " << labels.size() << "\nconflicts: " << labels.conflicts << "\n";
    } else if (train->parsed()) {
      const auto train_scenes = prepare_dir(train_dir, cfg);
      if (train_scenes.empty()) throw ValidationError("no .otoc scenes in " + train_dir);
      const auto eval_scenes = eval_dir.empty() ? std::vector<PreparedScene>{} : prepare_dir(eval_dir, cfg);
      const auto result = run(cfg, train_scenes, eval_scenes, rc.seed);
      ensure_dir(out_dir);
      const fs::path dir(out_dir);
      write_text(dir / "report.csv", report_csv(result.iterations));
      write_text(dir / "config.cfg", format_config(rc));
      if (!result.iterations.empty()) {
        save_checkpoint({result.models.unary, std::nullopt}, dir / "unary.otnn");
        if (result.models.relation) save_checkpoint({*result.models.relation, result.models.bank}, dir / "relation.otnn");
      }
      for (std::size_t s = 0; s < result.state.labels.size(); ++s) {
        char name[32];
        std::snprintf(name, sizeof(name), "labels_%04zu.otpl", s);
        save_pseudo_labels(result.state.labels[s], dir / name);
      }
      out << report_csv(result.iterations);
    } else if (infer->parsed()) {
      Scene scene = load_scene(scene_path);
      const PreparedScene ps = partition_path.empty()
                                   ? prepare_scene(std::move(scene), cfg)
                                   : prepare_scene(scene, load_partition(partition_path, scene), cfg);
      const Models models = load_models(model_dir);
      if (!no_propagation && cfg.mode == PropagationMode::kGraphRelation && !models.relation)
        throw ValidationError("model directory has no relation network; use --no-propagation or another mode");
      SweepObserver observer;
      if (!dump_dir.empty()) {
        ensure_dir(dump_dir);
        observer = [&](int sweep, const RowMatrix& q) {
          char name[32];
          std::snprintf(name, sizeof(name), "q_sweep_%02d.csv", sweep);
          write_text(fs::path(dump_dir) / name, q_csv(q));
        };
      }
      // Per-point output: one OTPL record per point.
      PseudoLabels pred;
      pred.entries.resize(ps.scene.size());
      if (no_propagation) {
        const auto p = predict_unary(models.unary, ps.features);
        for (Eigen::Index i = 0; i < p.probs.rows(); ++i) {
          Eigen::Index arg;
          const double conf = p.probs.row(i).maxCoeff(&arg);
          pred.entries[static_cast<std::size_t>(i)] = {static_cast<std::int32_t>(arg), static_cast<float>(conf),
                                                       Provenance::kPropagated};
        }
      } else {
        const auto map = map_labels(MarginalField{propagate(ps, models, cfg, observer)});
        for (std::size_t i = 0; i < ps.scene.size(); ++i) {
          const auto& m = map[static_cast<std::size_t>(ps.partition.id_of(i))];
          pred.entries[i] = {m.label, static_cast<float>(m.confidence), Provenance::kPropagated};
        }
      }
      save_pseudo_labels(pred, out_file);
      out << "labeled points: " << pred.size() << "\n";
    } else if (eval->parsed()) {
      const Scene gt = load_scene(gt_path);
      const PseudoLabels pred = load_pseudo_labels(pred_path);
      std::vector<Label> per_point(gt.size());
      if (pred.size() == gt.size() && partition_path.empty()) {
        for (std::size_t i = 0; i < gt.size(); ++i) per_point[i] = pred.entries[i].label;
      } else {
        if (partition_path.empty())
          throw ValidationError("prediction has " + std::to_string(pred.size()) + " entries for " +
                                std::to_string(gt.size()) + " points; pass --partition");
        const auto sv = load_partition(partition_path, gt);
        if (sv.num_supervoxels() != pred.size()) throw ValidationError("prediction does not match the partition");
        for (std::size_t i = 0; i < gt.size(); ++i) per_point[i] = pred.entries[static_cast<std::size_t>(sv.id_of(i))].label;
      }
      const Metrics m = miou(per_point, gt.gt_semantic, gt.num_categories);
      out << "category,iou\n" << std::fixed << std::setprecision(4);
      for (std::size_t c = 0; c < m.iou.size(); ++c) {
        out << c << ',';
        if (m.iou[c]) out << *m.iou[c];
        out << '\n';
      }
      out << "miou," << m.miou << '\n';
    } else if (report->parsed()) {
      out << "file,iteration,coverage,miou,delta_miou_vs_iter1\n";
      for (const auto& path : csv_paths) {
        std::istringstream in(read_text(path));
        std::string line;
        std::getline(in, line);
        if (line != "iteration,coverage,train_loss_unary,train_loss_relation,miou")
          throw FormatError("not a self-training report: " + path);
        std::optional<double> first;
        while (std::getline(in, line)) {
          std::vector<std::string> cols;
          std::stringstream ls(line);
          std::string cell;
          while (std::getline(ls, cell, ',')) cols.push_back(cell);
          while (cols.size() < 5) cols.emplace_back();
          out << path << ',' << cols[0] << ',' << cols[1] << ',' << cols[4] << ',';
          if (!cols[4].empty()) {
            const double v = std::stod(cols[4]);
            if (!first) first = v;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%+.6f", v - *first);
            out << buf;
          }
          out << '\n';
        }
      }
    }
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace otoc
