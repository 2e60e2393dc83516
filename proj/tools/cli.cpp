#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <thread>

#include "CLI11.hpp"
#include "sff/agent.hpp"
#include "sff/dataio.hpp"
#include "sff/errors.hpp"
#include "sff/metrics.hpp"
#include "sff/params.hpp"
#include "sff/random.hpp"
#include "sff/vdan.hpp"

namespace sff::cli {
namespace {

namespace fs = std::filesystem;

std::string number(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// ---- Flags -----------------------------------------------------------------
// Overrides stay empty unless given, so the profile supplies the default.

struct Common {
  std::string profile = "full";
  std::uint64_t seed = 1;
  fs::path dataset;
  fs::path output_dir = ".";
  bool toy() const { return profile == "toy"; }
};

struct VdanFlags {
  std::optional<std::size_t> word_dim, sentence_hidden, document_hidden, feature_dim,
      embedding_dim, head_hidden;
  std::optional<float> margin;
  bool no_word_attention = false;
};

struct VdanTrainFlags {
  std::optional<std::size_t> epochs, batch_size;
  std::optional<float> learning_rate;
  std::optional<double> validation_fraction;
};

struct AgentFlags {
  std::optional<double> gamma;
  std::optional<float> entropy_beta, policy_lr, value_lr;
  std::optional<int> v_max, omega_max;
  std::optional<std::size_t> epochs;
  std::vector<std::size_t> hidden;
};

struct Paths {
  fs::path vdan_checkpoint, agent_checkpoint;
  std::vector<std::string> videos;
  unsigned threads = 0;
  std::vector<fs::path> selections;
  fs::path ground_truth;
  std::vector<std::size_t> hit_numbers{1, 5, 10, 15, 20, 25, 30};
};

template <class T>
void set_option(CLI::App* app, const std::string& name, std::optional<T>& target,
                const std::string& help) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

template <class T>
void apply(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

void add_common(CLI::App* app, Common& c, bool needs_dataset) {
  app->add_option("--profile", c.profile, "Default set: full-scale or desk-scale")
      ->check(CLI::IsMember({"full", "toy"}))
      ->capture_default_str();
  app->add_option("--seed", c.seed, "Root seed")->capture_default_str();
  if (needs_dataset) app->add_option("--dataset", c.dataset, "Dataset directory")->required();
  app->add_option("--output-dir", c.output_dir, "Directory for all outputs")->capture_default_str();
}

void add_vdan_flags(CLI::App* app, VdanFlags& f) {
  set_option(app, "--word-dim", f.word_dim, "Word vector dimension");
  set_option(app, "--sentence-hidden", f.sentence_hidden, "Sentence GRU state, both directions");
  set_option(app, "--document-hidden", f.document_hidden, "Document GRU state, both directions");
  set_option(app, "--feature-dim", f.feature_dim, "Image feature dimension");
  set_option(app, "--embedding-dim", f.embedding_dim, "Shared embedding dimension");
  set_option(app, "--head-hidden", f.head_hidden, "Hidden width of the projection heads");
  set_option(app, "--margin", f.margin, "Cosine loss margin for negatives");
  app->add_flag("--no-word-attention", f.no_word_attention, "Mean-pool words instead of attending");
}

void add_agent_flags(CLI::App* app, AgentFlags& f, bool training) {
  app->add_option("--hidden", f.hidden, "Hidden widths of both agent networks")->delimiter(',');
  if (!training) return;
  set_option(app, "--gamma", f.gamma, "Discount factor");
  set_option(app, "--entropy-beta", f.entropy_beta, "Entropy bonus weight");
  set_option(app, "--v-max", f.v_max, "Velocity ceiling");
  set_option(app, "--omega-max", f.omega_max, "Acceleration ceiling");
  set_option(app, "--policy-lr", f.policy_lr, "Policy learning rate");
  set_option(app, "--value-lr", f.value_lr, "Value learning rate");
  set_option(app, "--epochs", f.epochs, "Training epochs");
}

// ---- Configuration ---------------------------------------------------------

vdan::VdanConfig vdan_config(const Common& c, const VdanFlags& f) {
  auto cfg = c.toy() ? vdan::VdanConfig::toy() : vdan::VdanConfig{};
  apply(f.word_dim, cfg.word_dim);
  apply(f.sentence_hidden, cfg.sentence_hidden);
  apply(f.document_hidden, cfg.document_hidden);
  apply(f.feature_dim, cfg.feature_dim);
  apply(f.embedding_dim, cfg.embedding_dim);
  apply(f.head_hidden, cfg.head_hidden);
  apply(f.margin, cfg.margin);
  if (f.no_word_attention) cfg.word_attention = false;
  cfg.validate();
  return cfg;
}

vdan::TrainOptions vdan_train_options(const Common& c, const VdanTrainFlags& f) {
  vdan::TrainOptions opt;
  if (c.toy()) {
    opt.batch_size = 16;
    opt.learning_rate = 1e-3f;
  }
  apply(f.epochs, opt.epochs);
  apply(f.batch_size, opt.batch_size);
  apply(f.learning_rate, opt.learning_rate);
  apply(f.validation_fraction, opt.validation_fraction);
  opt.seed = c.seed;
  opt.validate();
  return opt;
}

agent::AgentConfig agent_config(const Common& c, const AgentFlags& f) {
  auto cfg = c.toy() ? agent::AgentConfig::toy() : agent::AgentConfig{};
  apply(f.gamma, cfg.gamma);
  apply(f.entropy_beta, cfg.entropy_beta);
  apply(f.v_max, cfg.v_max);
  apply(f.omega_max, cfg.omega_max);
  apply(f.policy_lr, cfg.policy_lr);
  apply(f.value_lr, cfg.value_lr);
  apply(f.epochs, cfg.epochs);
  if (!f.hidden.empty()) cfg.hidden = f.hidden;
  cfg.validate();
  return cfg;
}

// ---- Inputs ----------------------------------------------------------------

dataio::DatasetPaths open_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset directory not found: " + root.string());
  return dataio::DatasetPaths{root};
}

std::shared_ptr<const WordVectorTable> load_words(const dataio::DatasetPaths& ds,
                                                  const vdan::VdanConfig& cfg, std::ostream& err) {
  auto load = dataio::load_word_vectors(ds.words());
  for (const auto& w : load.warnings) err << "warning: " << ds.words().string() << ": " << w << "\n";
  if (load.table.dim() != cfg.word_dim) {
    throw ConfigError(ds.words().string() + " has word dimension " +
                      std::to_string(load.table.dim()) + " but the configuration uses " +
                      std::to_string(cfg.word_dim) + " (--word-dim)");
  }
  return std::make_shared<const WordVectorTable>(std::move(load.table));
}

void check_feature_dim(std::size_t found, std::size_t expected, const fs::path& path) {
  if (found != expected) {
    throw ConfigError(path.string() + " has feature dimension " + std::to_string(found) +
                      " but the configuration uses " + std::to_string(expected) +
                      " (--feature-dim)");
  }
}

// Shape of the last ".weight" tensor under `prefix`, empty when absent.
Shape last_weight(const std::vector<NamedTensor>& saved, const std::string& prefix) {
  Shape shape;
  for (const auto& e : saved) {
    if (e.name.starts_with(prefix) && e.name.ends_with(".weight")) shape = e.tensor.shape();
  }
  return shape;
}

Shape first_weight(const std::vector<NamedTensor>& saved, const std::string& prefix) {
  for (const auto& e : saved) {
    if (e.name.starts_with(prefix) && e.name.ends_with(".weight")) return e.tensor.shape();
  }
  return {};
}

void restore(const fs::path& path, const std::vector<NamedTensor>& saved, ParameterSet& params) {
  try {
    restore_checkpoint(saved, params);
  } catch (const ShapeError& e) {
    throw ShapeError(path.string() + " does not match the configuration: " + e.what());
  }
}

std::unique_ptr<vdan::Vdan> load_vdan(const fs::path& path, const vdan::VdanConfig& cfg,
                                      std::shared_ptr<const WordVectorTable> words) {
  auto saved = load_checkpoint(path);
  const Shape out = last_weight(saved, "vdan.document_head.");
  if (out.size() == 2 && out[0] != cfg.embedding_dim) {
    throw ShapeError(path.string() + " has embedding dimension " + std::to_string(out[0]) +
                     " but the configuration uses " + std::to_string(cfg.embedding_dim) +
                     " (--embedding-dim)");
  }
  const Shape in = first_weight(saved, "vdan.image_head.");
  if (in.size() == 2 && in[1] != cfg.feature_dim) {
    throw ShapeError(path.string() + " has feature dimension " + std::to_string(in[1]) +
                     " but the configuration uses " + std::to_string(cfg.feature_dim) +
                     " (--feature-dim)");
  }
  Rng unused(0);
  auto model = std::make_unique<vdan::Vdan>(cfg, std::move(words), unused);
  restore(path, saved, model->parameters());
  return model;
}

std::unique_ptr<agent::Agent> load_agent(const fs::path& path, std::size_t embedding_dim,
                                         const agent::AgentConfig& cfg) {
  auto saved = load_checkpoint(path);
  const Shape in = first_weight(saved, "policy.");
  if (in.size() == 2 && in[1] != 2 * embedding_dim) {
    throw ShapeError(path.string() + " expects embedding dimension " + std::to_string(in[1] / 2) +
                     " but the configuration uses " + std::to_string(embedding_dim) +
                     " (--embedding-dim)");
  }
  Rng unused(0);
  auto model = std::make_unique<agent::Agent>(embedding_dim, cfg, unused);
  ParameterSet all = model->all_parameters();
  restore(path, saved, all);
  return model;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

void finish(std::ofstream& os, const fs::path& path) {
  os.flush();
  if (!os) throw DataError("write failed for " + path.string());
}

fs::path output_dir(const Common& c) {
  fs::create_directories(c.output_dir);
  return c.output_dir;
}

fs::path or_default(const fs::path& given, const fs::path& fallback) {
  return given.empty() ? fallback : given;
}

// ---- Commands --------------------------------------------------------------

int cmd_synth(const Common& c, dataio::SyntheticSpec spec, std::ostream& out) {
  spec.seed = c.seed;
  spec.validate();
  const auto data = dataio::generate_synthetic(spec);
  dataio::write_dataset(output_dir(c), data);
  out << "wrote " << data.videos.size() << " videos (" << data.train_ids.size() << " train, "
      << data.test_ids.size() << " test) to " << c.output_dir.string() << "\n";
  return kSuccess;
}

int cmd_train_vdan(const Common& c, const VdanFlags& vf, const VdanTrainFlags& tf,
                   std::ostream& out, std::ostream& err) {
  const auto cfg = vdan_config(c, vf);
  const auto opt = vdan_train_options(c, tf);
  const auto ds = open_dataset(c.dataset);
  auto words = load_words(ds, cfg, err);
  const auto text = dataio::load_text_corpus(ds.corpus_dir());
  check_feature_dim(text.features.dim, cfg.feature_dim, ds.corpus_dir() / "images.vdff");
  const auto corpus = dataio::tokenize_corpus(text, *words);

  const fs::path dir = output_dir(c);
  Rng init = make_stream(c.seed, "vdan.init");
  vdan::Vdan model(cfg, words, init);

  const fs::path csv_path = dir / "vdan_loss.csv";
  auto csv = open_output(csv_path);
  csv << "epoch,train_loss,validation_loss\n";
  const auto result = vdan::train_vdan(model, corpus, opt, [&](const vdan::EpochLog& l) {
    csv << l.epoch << "," << number(l.train_loss) << "," << number(l.validation_loss) << "\n";
    out << "epoch " << l.epoch << " train " << l.train_loss << " validation "
        << l.validation_loss << "\n";
  });
  finish(csv, csv_path);
  save_checkpoint(dir / "vdan.sskp", model.parameters());
  out << "kept epoch " << result.best_epoch << "; wrote " << (dir / "vdan.sskp").string() << "\n";
  return kSuccess;
}

int cmd_train_agent(const Common& c, const VdanFlags& vf, const AgentFlags& af, const Paths& p,
                    std::ostream& out, std::ostream& err) {
  const auto vcfg = vdan_config(c, vf);
  const auto acfg = agent_config(c, af);
  const auto ds = open_dataset(c.dataset);
  auto words = load_words(ds, vcfg, err);
  const fs::path dir = output_dir(c);
  const auto model = load_vdan(or_default(p.vdan_checkpoint, dir / "vdan.sskp"), vcfg, words);

  const auto ids = dataio::load_id_list(ds.train_list());
  if (ids.empty()) throw DataError(ds.train_list().string() + " lists no videos");
  std::vector<agent::TrainingVideo> videos;
  for (const auto& id : ids) {
    const auto features = dataio::load_frame_features(ds.video_features(id));
    check_feature_dim(features.dim, vcfg.feature_dim, ds.video_features(id));
    const auto doc = dataio::load_document(ds.video_document(id), *words);
    videos.push_back(agent::embed_video(*model, features.values, features.dim, doc));
  }

  Rng init = make_stream(c.seed, "agent.init");
  Rng rollouts = make_stream(c.seed, "agent.rollout");
  agent::Agent ag(vcfg.embedding_dim, acfg, init);
  const fs::path csv_path = dir / "agent_returns.csv";
  auto csv = open_output(csv_path);
  csv << "epoch,mean_return,mean_selected\n";
  agent::train_agent(ag, videos, rollouts, [&](const agent::AgentEpochLog& l) {
    csv << l.epoch << "," << number(l.mean_return) << "," << number(l.mean_selected) << "\n";
    out << "epoch " << l.epoch << " return " << l.mean_return << " selected " << l.mean_selected
        << "\n";
  });
  finish(csv, csv_path);
  save_checkpoint(dir / "agent.sskp", ag.all_parameters());
  out << "wrote " << (dir / "agent.sskp").string() << "\n";
  return kSuccess;
}

int cmd_run(const Common& c, const VdanFlags& vf, const AgentFlags& af, const Paths& p,
            std::ostream& out, std::ostream& err) {
  const auto vcfg = vdan_config(c, vf);
  const auto acfg = agent_config(c, af);
  const auto ds = open_dataset(c.dataset);
  auto words = load_words(ds, vcfg, err);
  const fs::path dir = output_dir(c);
  const auto model = load_vdan(or_default(p.vdan_checkpoint, dir / "vdan.sskp"), vcfg, words);
  const auto ag = load_agent(or_default(p.agent_checkpoint, dir / "agent.sskp"),
                             vcfg.embedding_dim, acfg);

  const auto ids = p.videos.empty() ? dataio::load_id_list(ds.test_list()) : p.videos;
  if (ids.empty()) throw DataError("no videos to run");

  // Parameters are frozen here, so videos can be processed concurrently.
  std::vector<dataio::Selection> results(ids.size());
  std::vector<std::exception_ptr> failures(ids.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < ids.size();) {
      try {
        const auto features = dataio::load_frame_features(ds.video_features(ids[i]));
        check_feature_dim(features.dim, vcfg.feature_dim, ds.video_features(ids[i]));
        const auto doc = dataio::load_document(ds.video_document(ids[i]), *words);
        results[i] = {ids[i], features.count(),
                      agent::fast_forward(*model, *ag, features.values, features.dim, doc)};
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  unsigned threads = p.threads ? p.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, ids.size()));
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);

  fs::create_directories(dir / "selections");
  for (const auto& sel : results) {
    const fs::path path = dir / "selections" / (sel.video_id + ".txt");
    auto os = open_output(path);
    dataio::write_selection(os, sel);
    finish(os, path);
    out << sel.video_id << ": " << sel.indices.size() << " of " << sel.frames << " frames -> "
        << path.string() << "\n";
  }
  return kSuccess;
}

int cmd_eval(const Common& c, const Paths& p, std::ostream& out) {
  if (p.hit_numbers.empty()) throw ConfigError("--hit-numbers must not be empty");
  for (auto h : p.hit_numbers)
    if (h == 0) throw ConfigError("--hit-numbers must be positive");
  if (!p.ground_truth.empty() && p.selections.size() != 1) {
    throw ConfigError("--ground-truth applies to a single --selection; use --dataset for several");
  }
  if (p.ground_truth.empty() && c.dataset.empty()) {
    throw ConfigError("eval needs --ground-truth or --dataset");
  }
  std::optional<dataio::DatasetPaths> ds;
  if (!c.dataset.empty()) ds = open_dataset(c.dataset);

  const fs::path dir = output_dir(c);
  const fs::path summary_path = dir / "summary.csv";
  auto summary = open_output(summary_path);
  summary << "video,frames,selected,precision,recall,f1\n";
  double f1_sum = 0.0;
  for (const auto& sel_path : p.selections) {
    const auto sel = dataio::load_selection(sel_path);
    if (ds) {
      const auto features = dataio::load_frame_features(ds->video_features(sel.video_id));
      if (features.count() != sel.frames) {
        throw DataError(sel_path.string() + " claims " + std::to_string(sel.frames) +
                        " frames but " + ds->video_features(sel.video_id).string() + " has " +
                        std::to_string(features.count()));
      }
    }
    const fs::path gt_path =
        p.ground_truth.empty() ? ds->video_ground_truth(sel.video_id) : p.ground_truth;
    const auto gt = dataio::load_ground_truth(gt_path, sel.frames);
    const auto report = metrics::evaluate(sel.indices, gt, p.hit_numbers);

    const fs::path report_path = dir / (sel.video_id + ".report.txt");
    auto rep = open_output(report_path);
    metrics::write_report(rep, report);
    finish(rep, report_path);
    const fs::path cov_path = dir / (sel.video_id + ".coverage.csv");
    auto cov = open_output(cov_path);
    metrics::write_coverage_csv(cov, report);
    finish(cov, cov_path);

    summary << sel.video_id << "," << sel.frames << "," << sel.indices.size() << ","
            << number(report.precision) << "," << number(report.recall) << ","
            << number(report.f1) << "\n";
    out << sel.video_id << ": precision " << report.precision << " recall " << report.recall
        << " f1 " << report.f1 << "\n";
    f1_sum += report.f1;
  }
  finish(summary, summary_path);
  out << "mean f1 " << f1_sum / static_cast<double>(p.selections.size()) << " over "
      << p.selections.size() << " videos\n";
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic fast-forward: embedding and agent training, selection and evaluation",
               "sff"};
  app.require_subcommand(1);

  Common common;
  VdanFlags vdan_flags;
  VdanTrainFlags train_flags;
  AgentFlags agent_flags;
  Paths paths;
  dataio::SyntheticSpec spec;

  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic dataset");
  add_common(synth, common, false);
  synth->add_option("--videos", spec.videos)->capture_default_str();
  synth->add_option("--frames", spec.frames_per_video, "Frames per video")->capture_default_str();
  synth->add_option("--segments-per-video", spec.segments_per_video)->capture_default_str();
  synth->add_option("--segment-length", spec.segment_length)->capture_default_str();
  synth->add_option("--shot-length", spec.shot_length)->capture_default_str();
  synth->add_option("--classes", spec.classes)->capture_default_str();
  synth->add_option("--feature-dim", spec.feature_dim)->capture_default_str();
  synth->add_option("--word-dim", spec.word_dim)->capture_default_str();
  synth->add_option("--noise", spec.noise)->capture_default_str();

  auto* train_vdan = app.add_subcommand("train-vdan", "Train the document/image embedding");
  add_common(train_vdan, common, true);
  add_vdan_flags(train_vdan, vdan_flags);
  set_option(train_vdan, "--epochs", train_flags.epochs, "Training epochs");
  set_option(train_vdan, "--batch-size", train_flags.batch_size, "Pairs per batch");
  set_option(train_vdan, "--learning-rate", train_flags.learning_rate, "Adam learning rate");
  set_option(train_vdan, "--validation-fraction", train_flags.validation_fraction,
             "Share of images held out");

  auto* train_agent = app.add_subcommand("train-agent", "Train the fast-forward agent");
  add_common(train_agent, common, true);
  add_vdan_flags(train_agent, vdan_flags);
  add_agent_flags(train_agent, agent_flags, true);
  train_agent->add_option("--vdan-checkpoint", paths.vdan_checkpoint,
                          "Default: <output-dir>/vdan.sskp");

  auto* run_cmd = app.add_subcommand("run", "Fast-forward videos with the trained agent");
  add_common(run_cmd, common, true);
  add_vdan_flags(run_cmd, vdan_flags);
  add_agent_flags(run_cmd, agent_flags, false);
  run_cmd->add_option("--vdan-checkpoint", paths.vdan_checkpoint, "Default: <output-dir>/vdan.sskp");
  run_cmd->add_option("--agent-checkpoint", paths.agent_checkpoint,
                      "Default: <output-dir>/agent.sskp");
  run_cmd->add_option("--video", paths.videos, "Video ids (default: the test list)");
  run_cmd->add_option("--threads", paths.threads, "Worker threads (default: all cores)");

  auto* eval = app.add_subcommand("eval", "Score selection files against ground truth");
  add_common(eval, common, false);
  eval->add_option("--dataset", common.dataset, "Dataset to look ground truth up in");
  eval->add_option("--selection", paths.selections, "Selection files")->required();
  eval->add_option("--ground-truth", paths.ground_truth, "Ground-truth CSV for one selection");
  eval->add_option("--hit-numbers", paths.hit_numbers, "Coverage thresholds")
      ->delimiter(',')
      ->capture_default_str();

  std::vector<const char*> argv{"sff"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*synth) return cmd_synth(common, spec, out);
    if (*train_vdan) return cmd_train_vdan(common, vdan_flags, train_flags, out, err);
    if (*train_agent) return cmd_train_agent(common, vdan_flags, agent_flags, paths, out, err);
    if (*run_cmd) return cmd_run(common, vdan_flags, agent_flags, paths, out, err);
    if (*eval) return cmd_eval(common, paths, out);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericError;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}

}  // namespace sff::cli
