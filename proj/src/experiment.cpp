#include "isgfan/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "isgfan/evaluator.hpp"

namespace isgfan {

namespace {

// Value codecs ---------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  const std::string t = boost::trim_copy(s);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

template <typename Int>
Int parse_integer(const std::string& s) {
  const std::string t = boost::trim_copy(s);
  Int v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  const std::string t = boost::to_lower_copy(boost::trim_copy(s));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  boost::split(parts, s, boost::is_any_of(","));
  for (auto& p : parts) boost::trim(p);
  std::erase_if(parts, [](const std::string& p) { return p.empty(); });
  return parts;
}

template <typename T, typename F>
std::string join(const std::vector<T>& values, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += fmt(values[i]);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& p : split_list(s)) out.push_back(parse_double(p));
  return out;
}

// Field table ----------------------------------------------------------------

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define ISGFAN_DOUBLE(sec, name, member)                                                   \
  Field {                                                                                  \
    sec, name, [](ExperimentConfig& c, const std::string& v) { c.member = parse_double(v); }, \
        [](const ExperimentConfig& c) { return format_double(c.member); }                  \
  }
#define ISGFAN_INT(sec, name, member, type)                                                         \
  Field {                                                                                           \
    sec, name, [](ExperimentConfig& c, const std::string& v) { c.member = parse_integer<type>(v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }                          \
  }
#define ISGFAN_BOOL(sec, name, member)                                                   \
  Field {                                                                                \
    sec, name, [](ExperimentConfig& c, const std::string& v) { c.member = parse_bool(v); }, \
        [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"task", "dataset",
                 [](ExperimentConfig& c, const std::string& v) {
                   const std::string t = boost::trim_copy(v);
                   if (t == "archive") c.dataset = DatasetSource::archive;
                   else if (t == "synthetic") c.dataset = DatasetSource::synthetic;
                   else throw std::invalid_argument("unknown dataset source: " + t);
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.dataset == DatasetSource::archive ? "archive" : "synthetic");
                 }});
    f.push_back({"task", "data_dir", [](ExperimentConfig& c, const std::string& v) { c.data_dir = boost::trim_copy(v); },
                 [](const ExperimentConfig& c) { return c.data_dir.string(); }});
    f.push_back({"task", "tasks",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.tasks.clear();
                   for (const auto& item : split_list(v)) {
                     const auto colon = item.find(':');
                     if (colon == std::string::npos) throw std::invalid_argument("task must be source:target, got " + item);
                     c.tasks.push_back({boost::trim_copy(item.substr(0, colon)), boost::trim_copy(item.substr(colon + 1))});
                   }
                 },
                 [](const ExperimentConfig& c) {
                   return join(c.tasks, [](const TaskPair& t) { return t.source + ":" + t.target; });
                 }});

    f.push_back(ISGFAN_INT("synthetic", "samples_per_class", synthetic.samples_per_class, int));
    f.push_back({"synthetic", "fundamentals",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.synthetic.fundamentals = parse_doubles(v);
                   c.synthetic.num_classes = static_cast<int>(c.synthetic.fundamentals.size());
                 },
                 [](const ExperimentConfig& c) { return join(c.synthetic.fundamentals, format_double); }});
    f.push_back({"synthetic", "overtone",
                 [](ExperimentConfig& c, const std::string& v) { c.synthetic.overtone = parse_doubles(v); },
                 [](const ExperimentConfig& c) { return join(c.synthetic.overtone, format_double); }});
    f.push_back(ISGFAN_DOUBLE("synthetic", "freq_jitter", synthetic.freq_jitter));
    f.push_back(ISGFAN_DOUBLE("synthetic", "freq_shift", synthetic.freq_shift));
    f.push_back(ISGFAN_DOUBLE("synthetic", "amplitude_shift", synthetic.amplitude_shift));
    f.push_back(ISGFAN_DOUBLE("synthetic", "tone_source", synthetic.tone_source));
    f.push_back(ISGFAN_DOUBLE("synthetic", "tone_target", synthetic.tone_target));
    f.push_back(ISGFAN_DOUBLE("synthetic", "tone_level_source", synthetic.tone_level_source));
    f.push_back(ISGFAN_DOUBLE("synthetic", "tone_level_target", synthetic.tone_level_target));
    f.push_back(ISGFAN_INT("synthetic", "seed", synthetic.seed, std::uint64_t));

    f.push_back({"noise", "type",
                 [](ExperimentConfig& c, const std::string& v) {
                   const std::string t = boost::trim_copy(v);
                   if (t == "none") c.noise_type.reset();
                   else c.noise_type = parse_noise_type(t);
                 },
                 [](const ExperimentConfig& c) { return c.noise_type ? to_string(*c.noise_type) : std::string("none"); }});
    f.push_back({"noise", "snr_db", [](ExperimentConfig& c, const std::string& v) { c.snr_db = parse_doubles(v); },
                 [](const ExperimentConfig& c) { return join(c.snr_db, format_double); }});
    f.push_back(ISGFAN_INT("noise", "seed", noise_seed, std::uint64_t));

    f.push_back({"experiment", "variant",
                 [](ExperimentConfig& c, const std::string& v) { c.variant = parse_variant(boost::trim_copy(v)); },
                 [](const ExperimentConfig& c) { return to_string(c.variant); }});
    f.push_back(ISGFAN_INT("experiment", "repeats", repeats, int));

    f.push_back(ISGFAN_INT("architecture", "length", length, Eigen::Index));
    f.push_back({"architecture", "channels",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.extractor.stage_channels.clear();
                   for (const auto& p : split_list(v)) c.extractor.stage_channels.push_back(parse_integer<Index>(p));
                 },
                 [](const ExperimentConfig& c) {
                   return join(c.extractor.stage_channels, [](Index i) { return std::to_string(i); });
                 }});
    f.push_back({"architecture", "strides",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.extractor.stage_downsample.clear();
                   for (const auto& p : split_list(v)) {
                     const Index s = parse_integer<Index>(p);
                     c.extractor.stage_downsample.emplace_back(s, s);
                   }
                 },
                 [](const ExperimentConfig& c) {
                   return join(c.extractor.stage_downsample,
                               [](const std::pair<Index, Index>& ks) { return std::to_string(ks.second); });
                 }});
    f.push_back(ISGFAN_INT("architecture", "blocks_per_stage", extractor.blocks_per_stage, Index));
    f.push_back(ISGFAN_INT("architecture", "dw_kernel", extractor.dw_kernel, Index));
    f.push_back(ISGFAN_INT("architecture", "expansion", extractor.expansion, Index));
    f.push_back(ISGFAN_DOUBLE("architecture", "grl_lambda", grl_lambda));
    f.push_back({"architecture", "precision",
                 [](ExperimentConfig& c, const std::string& v) {
                   const std::string t = boost::trim_copy(v);
                   if (t == "float32") c.double_precision = false;
                   else if (t == "float64") c.double_precision = true;
                   else throw std::invalid_argument("precision must be float32 or float64");
                 },
                 [](const ExperimentConfig& c) { return std::string(c.double_precision ? "float64" : "float32"); }});
    f.push_back({"architecture", "init",
                 [](ExperimentConfig& c, const std::string& v) {
                   const std::string t = boost::trim_copy(v);
                   if (t == "truncated_normal") c.init.fan_in = false;
                   else if (t == "fan_in") c.init.fan_in = true;
                   else throw std::invalid_argument("init must be truncated_normal or fan_in");
                 },
                 [](const ExperimentConfig& c) { return std::string(c.init.fan_in ? "fan_in" : "truncated_normal"); }});
    f.push_back(ISGFAN_DOUBLE("architecture", "init_std", init.std));

    f.push_back(ISGFAN_INT("training", "epochs", training.epochs, int));
    f.push_back(ISGFAN_INT("training", "batch_size", training.batch_size, int));
    f.push_back(ISGFAN_DOUBLE("training", "base_lr", training.base_lr));
    f.push_back(ISGFAN_DOUBLE("training", "min_lr", training.min_lr));
    f.push_back(ISGFAN_DOUBLE("training", "weight_decay", training.weight_decay));
    f.push_back(ISGFAN_DOUBLE("training", "adam_beta1", training.adam_beta1));
    f.push_back(ISGFAN_DOUBLE("training", "adam_beta2", training.adam_beta2));
    f.push_back(ISGFAN_DOUBLE("training", "adam_eps", training.adam_eps));
    f.push_back(ISGFAN_INT("training", "eval_interval", training.eval_interval, int));
    f.push_back(ISGFAN_INT("training", "seed", training.seed, std::uint64_t));
    for (const auto& group : parameter_group_names()) {
      f.push_back({"training", "lr_scale_" + group,
                   [group](ExperimentConfig& c, const std::string& v) { c.lr_scale[group] = parse_double(v); },
                   [group](const ExperimentConfig& c) {
                     const auto it = c.lr_scale.find(group);
                     return format_double(it == c.lr_scale.end() ? 1.0 : it->second);
                   }});
    }

    f.push_back(ISGFAN_DOUBLE("pseudo_label", "xi", pseudo.xi));
    f.push_back(ISGFAN_DOUBLE("pseudo_label", "kappa", pseudo.kappa));

    f.push_back(ISGFAN_DOUBLE("attention", "alpha", attention.alpha));
    f.push_back(ISGFAN_DOUBLE("attention", "tau", attention.tau));
    f.push_back(ISGFAN_DOUBLE("attention", "momentum", attention.momentum));
    f.push_back(ISGFAN_DOUBLE("attention", "beta", attention.beta));

    f.push_back(ISGFAN_DOUBLE("balancer", "delta", balancer.delta));
    f.push_back(ISGFAN_DOUBLE("balancer", "zeta", balancer.zeta));
    f.push_back(ISGFAN_DOUBLE("balancer", "gamma", balancer.gamma));
    f.push_back(ISGFAN_DOUBLE("balancer", "mu", balancer.mu));
    f.push_back(ISGFAN_DOUBLE("balancer", "omega", balancer.omega));
    f.push_back(ISGFAN_DOUBLE("balancer", "rho", balancer.rho));

    f.push_back({"output", "dir", [](ExperimentConfig& c, const std::string& v) { c.output_dir = boost::trim_copy(v); },
                 [](const ExperimentConfig& c) { return c.output_dir.string(); }});
    f.push_back(ISGFAN_BOOL("output", "embeddings", export_embeddings));
    f.push_back(ISGFAN_BOOL("output", "checkpoints", write_checkpoints));
    return f;
  }();
  return table;
}

#undef ISGFAN_DOUBLE
#undef ISGFAN_INT
#undef ISGFAN_BOOL

const Field& find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return f;
  }
  throw std::invalid_argument("unknown config key: " + section + "." + key);
}

void set_field(ExperimentConfig& cfg, const std::string& section, const std::string& key, const std::string& value) {
  const Field& f = find_field(section, key);
  try {
    f.set(cfg, value);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(section + "." + key + ": " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (tasks.empty()) throw std::invalid_argument("config: at least one task required");
  for (const auto& t : tasks) {
    if (t.source.empty() || t.target.empty()) throw std::invalid_argument("config: empty condition id in task");
    if (t.source == t.target) throw std::invalid_argument("config: source and target conditions must differ");
  }
  if (noise_type && snr_db.empty()) throw std::invalid_argument("config: noise.snr_db needs at least one value");
  if (repeats < 1) throw std::invalid_argument("config: repeats must be >= 1");
  if (length < 1 || length % 32 != 0) throw std::invalid_argument("config: length must be a positive multiple of 32");
  extractor.validate();
  if (length % extractor.total_stride() != 0) throw std::invalid_argument("config: length not divisible by total stride");
  if (!(grl_lambda >= 0.0)) throw std::invalid_argument("config: grl_lambda must be >= 0");
  if (!(init.std > 0.0)) throw std::invalid_argument("config: init_std must be > 0");
  training.validate();
  for (const auto& [group, scale] : lr_scale) {
    if (!(scale >= 0.0)) throw std::invalid_argument("config: lr_scale for " + group + " must be >= 0");
  }
  pseudo.validate();
  if (dataset == DatasetSource::synthetic) synthetic.validate();
}

ExperimentConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw std::invalid_argument("config key outside a section: " + section);
    for (const auto& [key, value] : body) set_field(cfg, section, key, value.data());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  return parse_config(in);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw std::invalid_argument("override must look like section.key=value: " + assignment);
  }
  set_field(cfg, boost::trim_copy(assignment.substr(0, dot)), boost::trim_copy(assignment.substr(dot + 1, eq - dot - 1)),
            assignment.substr(eq + 1));
}

std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    os << f.key << " = " << f.get(cfg) << '\n';
  }
  return os.str();
}

std::filesystem::path resolve_output_root(const ExperimentConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("ISGFAN_OUT"); env != nullptr && *env != '\0') return env;
  return "out";
}

std::string snr_tag(const std::optional<NoiseType>& type, double snr_db) {
  if (!type) return "clean";
  NoiseSpec spec;
  spec.type = *type;
  spec.snr_db = snr_db;
  return spec.tag();
}

std::filesystem::path run_directory(const std::filesystem::path& root, const TaskPair& task, AblationVariant variant,
                                    const std::string& snr, std::uint64_t seed) {
  return root / task.name() / to_string(variant) / snr / std::to_string(seed);
}

// Data -----------------------------------------------------------------------

TransferData load_task_data(const ExperimentConfig& cfg, const TaskPair& task, double snr_db) {
  TransferTask transfer{task.source, task.target, std::nullopt};
  std::optional<NoiseSpec> noise;
  if (cfg.noise_type) noise = NoiseSpec{*cfg.noise_type, snr_db, cfg.noise_seed};

  std::map<std::string, SegmentedDataset> datasets;
  if (cfg.dataset == DatasetSource::synthetic) {
    SyntheticConfig syn = cfg.synthetic;
    syn.length = cfg.length;
    datasets = synthetic_conditions(syn, noise);
  } else {
    const auto manifest = cfg.data_dir / (snr_tag(cfg.noise_type, snr_db) + ".manifest");
    if (!std::filesystem::exists(manifest)) throw std::runtime_error("missing data archive: " + manifest.string());
    for (const auto& entry : read_manifest(manifest)) {
      if (entry.condition_id != task.source && entry.condition_id != task.target) continue;
      if (!std::filesystem::exists(entry.path)) throw std::runtime_error("missing data archive: " + entry.path.string());
      datasets.emplace(entry.condition_id, read_archive(entry.path, entry.condition_id));
    }
  }
  TransferData data = build_transfer_task(datasets, transfer);
  if (data.source_train.length() != cfg.length) {
    throw std::invalid_argument("archive segment length " + std::to_string(data.source_train.length()) +
                                " differs from architecture.length " + std::to_string(cfg.length));
  }
  return data;
}

// Training -------------------------------------------------------------------

namespace {

template <typename Scalar>
Matrix<Scalar> chunked_features(IsgfanModel<Scalar>& model, const Matrix<Scalar>& x) {
  constexpr Index chunk = 64;
  Matrix<Scalar> out(x.rows(), model.config().extractor.feature_dim());
  for (Index start = 0; start < x.rows(); start += chunk) {
    const Index n = std::min(chunk, x.rows() - start);
    out.middleRows(start, n) = model.features(x.middleRows(start, n));
  }
  return out;
}

template <typename Scalar>
std::vector<int> predict(IsgfanModel<Scalar>& model, const Matrix<Scalar>& x) {
  const Matrix<Scalar> feats = chunked_features(model, x);
  return argmax_rows(model.lc().forward(feats).template cast<double>());
}

ModelConfig model_config(const ExperimentConfig& cfg, int num_classes) {
  ModelConfig mc;
  mc.extractor = cfg.extractor;
  mc.num_classes = num_classes;
  mc.variant = cfg.variant;
  mc.grl_lambda = cfg.grl_lambda;
  mc.init = cfg.init;
  return mc;
}

nlohmann::json step_record(int epoch, long step, const StepMetrics& m) {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["step"] = step;
  j["lr"] = m.lr;
  j["total"] = m.total;
  j["losses"] = {{"LC", m.losses.l_lc},     {"GD", m.losses.l_gd},       {"FD", m.losses.l_fd},
                 {"orth", m.losses.l_orth}, {"recon", m.losses.l_recon}, {"LD", m.losses.l_ld},
                 {"co", m.l_co},            {"so", m.l_so}};
  j["weights"] = {{"LC", m.weights.lc},     {"GD", m.weights.gd},       {"FD", m.weights.fd},
                  {"orth", m.weights.orth}, {"recon", m.weights.recon}, {"LD", m.weights.ld}};
  j["attention"] = m.attention;
  j["subdomain_counts"] = m.subdomain_counts;
  j["accepted_pseudo_labels"] = m.accepted_pseudo_labels;
  return j;
}

ExperimentConfig echo_config(const ExperimentConfig& cfg, const TaskPair& task, double snr_db, std::uint64_t seed) {
  ExperimentConfig echo = cfg;
  echo.tasks = {task};
  echo.snr_db = {snr_db};
  echo.training.seed = seed;
  echo.repeats = 1;
  return echo;
}

template <typename Scalar>
ExperimentReport train(const ExperimentConfig& cfg, const TransferData& data, const TaskPair& task, double snr_db,
                       std::uint64_t seed, const std::filesystem::path& run_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(run_dir);

  ExperimentReport report;
  report.task = task.name();
  report.variant = to_string(cfg.variant);
  report.snr = snr_tag(cfg.noise_type, snr_db);
  report.seed = seed;
  report.epochs = cfg.training.epochs;
  report.config_echo = render_config(echo_config(cfg, task, snr_db, seed));
  {
    std::ofstream os(run_dir / "config.ini");
    os << report.config_echo;
    if (!os) throw std::runtime_error("cannot write " + (run_dir / "config.ini").string());
  }

  const int classes = data.source_train.num_classes;
  std::seed_seq model_seq{seed, std::uint64_t{1}};
  Rng model_rng(model_seq);
  IsgfanModel<Scalar> model(model_config(cfg, classes), model_rng);
  const ParameterList<Scalar> params = model.parameters();
  AdamW<Scalar> optimizer(params, cfg.training);
  if (!cfg.lr_scale.empty()) {
    std::vector<double> scales;
    auto groups = model.parameter_groups();
    for (const auto& name : parameter_group_names()) {
      const auto it = groups.find(name);
      if (it == groups.end()) continue;
      const auto s = cfg.lr_scale.find(name);
      scales.insert(scales.end(), it->second.size(), s == cfg.lr_scale.end() ? 1.0 : s->second);
    }
    optimizer.set_lr_scales(std::move(scales));
  }

  AttentionState attention(classes, cfg.attention);
  StepContext ctx;
  ctx.pseudo = cfg.pseudo;
  ctx.balancer = cfg.balancer;
  ctx.attention = &attention;

  const Matrix<Scalar> source = data.source_train.samples.cast<Scalar>();
  const Matrix<Scalar> target = data.target_train_unlabeled.samples.cast<Scalar>();
  const Matrix<Scalar> test = data.target_test.samples.cast<Scalar>();
  std::seed_seq batch_seq{seed, std::uint64_t{2}};
  std::mt19937_64 batch_seed_gen(batch_seq);
  BatchSampler sampler(source.rows(), target.rows(), cfg.training.batch_size, batch_seed_gen());

  std::ofstream metrics(run_dir / "metrics.jsonl");
  std::ofstream att(run_dir / "attention.csv");
  att << "epoch,step";
  for (int c = 0; c < classes; ++c) att << ",w" << c;
  att << '\n';

  const auto evaluate_now = [&](int epoch) {
    const double acc = accuracy(predict(model, test), data.target_test.labels);
    report.history.push_back({epoch, acc});
    if (report.history.size() == 1 || acc > report.best_accuracy) {
      report.best_accuracy = acc;
      report.best_epoch = epoch;
      if (cfg.write_checkpoints) write_checkpoint(run_dir / "checkpoint_best.isgc", model);
    }
  };

  long step = 0;
  for (int epoch = 0; epoch < cfg.training.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg.training);
    for (const auto& b : sampler.epoch()) {
      const BatchPair<Scalar> pair = make_batch(source, data.source_train.labels, target, b);
      const StepMetrics m = training_step(model, optimizer, pair, ctx, lr);
      metrics << step_record(epoch, step, m).dump() << '\n';
      if (!m.attention.empty()) {
        att << epoch << ',' << step;
        for (double w : m.attention) att << ',' << format_double(w);
        att << '\n';
      }
      ++step;
    }
    if ((epoch + 1) % cfg.training.eval_interval == 0 || epoch + 1 == cfg.training.epochs) evaluate_now(epoch + 1);
  }
  if (cfg.training.epochs == 0) evaluate_now(0);
  if (!metrics || !att) throw std::runtime_error("failed writing metrics in " + run_dir.string());

  const std::vector<int> predictions = predict(model, test);
  report.final_accuracy = accuracy(predictions, data.target_test.labels);
  report.confusion = confusion_matrix(predictions, data.target_test.labels, classes);
  write_confusion_matrix(report.confusion, run_dir / "confusion.csv");
  if (cfg.write_checkpoints) write_checkpoint(run_dir / "checkpoint_final.isgc", model);

  if (cfg.export_embeddings) {
    const Matrix<Scalar> fs = chunked_features(model, source);
    const Matrix<Scalar> ft = chunked_features(model, test);
    Eigen::MatrixXd all(fs.rows() + ft.rows(), fs.cols());
    all.topRows(fs.rows()) = fs.template cast<double>();
    all.bottomRows(ft.rows()) = ft.template cast<double>();
    std::vector<int> labels = data.source_train.labels;
    labels.insert(labels.end(), data.target_test.labels.begin(), data.target_test.labels.end());
    std::vector<std::string> domains(static_cast<std::size_t>(fs.rows()), "source");
    domains.resize(labels.size(), "target");
    export_embeddings(all, labels, domains, run_dir / "embeddings.csv");
  }

  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_report(report, run_dir / "report.txt");
  return report;
}

template <typename Scalar>
Evaluation evaluate_impl(const ExperimentConfig& cfg, const TransferData& data, const std::filesystem::path& checkpoint) {
  Rng rng(0);
  IsgfanModel<Scalar> model(model_config(cfg, data.target_test.num_classes), rng);
  read_checkpoint(checkpoint, model);
  Evaluation ev;
  ev.predictions = predict(model, Matrix<Scalar>(data.target_test.samples.cast<Scalar>()));
  ev.accuracy = accuracy(ev.predictions, data.target_test.labels);
  ev.confusion = confusion_matrix(ev.predictions, data.target_test.labels, data.target_test.num_classes);
  return ev;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg, const TransferData& data, const TaskPair& task,
                                double snr_db, std::uint64_t seed, const std::filesystem::path& run_dir) {
  cfg.validate();
  if (cfg.double_precision) return train<double>(cfg, data, task, snr_db, seed, run_dir);
  return train<float>(cfg, data, task, snr_db, seed, run_dir);
}

Evaluation evaluate_checkpoint(const ExperimentConfig& cfg, const TransferData& data,
                               const std::filesystem::path& checkpoint) {
  cfg.validate();
  if (!std::filesystem::exists(checkpoint)) throw std::runtime_error("missing checkpoint: " + checkpoint.string());
  if (cfg.double_precision) return evaluate_impl<double>(cfg, data, checkpoint);
  return evaluate_impl<float>(cfg, data, checkpoint);
}

std::vector<ExperimentReport> run_all(const ExperimentConfig& cfg, const std::filesystem::path& root) {
  cfg.validate();
  std::vector<ExperimentReport> reports;
  const std::vector<double> snrs = cfg.noise_type ? cfg.snr_db : std::vector<double>{0.0};
  for (const auto& task : cfg.tasks) {
    for (double snr : snrs) {
      const TransferData data = load_task_data(cfg, task, snr);
      for (int r = 0; r < cfg.repeats; ++r) {
        const std::uint64_t seed = cfg.training.seed + static_cast<std::uint64_t>(r);
        const auto dir = run_directory(root, task, cfg.variant, snr_tag(cfg.noise_type, snr), seed);
        reports.push_back(run_experiment(cfg, data, task, snr, seed, dir));
      }
    }
  }
  write_summary(summarize_directory(root), root / "summary.tsv");
  return reports;
}

// Reports --------------------------------------------------------------------

void write_report(const ExperimentReport& r, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write report: " + path.string());
  os << "format: isgfan-report/1\n";
  os << "task: " << r.task << '\n';
  os << "variant: " << r.variant << '\n';
  os << "snr: " << r.snr << '\n';
  os << "seed: " << r.seed << '\n';
  os << "epochs: " << r.epochs << '\n';
  os << "final_accuracy: " << format_double(r.final_accuracy) << '\n';
  os << "best_accuracy: " << format_double(r.best_accuracy) << '\n';
  os << "best_epoch: " << r.best_epoch << '\n';
  os << "history: " << join(r.history, [](const EvalPoint& p) {
    return std::to_string(p.epoch) + "=" + format_double(p.accuracy);
  }) << '\n';
  os << "confusion: ";
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    if (i) os << ';';
    for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) os << (j ? "," : "") << r.confusion(i, j);
  }
  os << '\n';
  os << "wall_seconds: " << format_double(r.wall_seconds) << '\n';
  std::istringstream echo(r.config_echo);
  std::string line, section;
  while (std::getline(echo, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    os << "config." << section << '.' << line.substr(0, eq) << ": " << line.substr(eq + 3) << '\n';
  }
  if (!os) throw std::runtime_error("failed writing report: " + path.string());
}

ExperimentReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report: " + path.string());
  ExperimentReport r;
  std::string line;
  std::string section;
  std::ostringstream echo;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto colon = line.find(": ");
    if (colon == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 'key: value'");
    }
    const std::string key = line.substr(0, colon);
    const std::string value = line.substr(colon + 2);
    if (key == "format") {
      if (value != "isgfan-report/1") throw std::runtime_error("unsupported report format in " + path.string());
    } else if (key == "task") r.task = value;
    else if (key == "variant") r.variant = value;
    else if (key == "snr") r.snr = value;
    else if (key == "seed") r.seed = parse_integer<std::uint64_t>(value);
    else if (key == "epochs") r.epochs = parse_integer<int>(value);
    else if (key == "final_accuracy") r.final_accuracy = parse_double(value);
    else if (key == "best_accuracy") r.best_accuracy = parse_double(value);
    else if (key == "best_epoch") r.best_epoch = parse_integer<int>(value);
    else if (key == "wall_seconds") r.wall_seconds = parse_double(value);
    else if (key == "history") {
      for (const auto& item : split_list(value)) {
        const auto eq = item.find('=');
        r.history.push_back({parse_integer<int>(item.substr(0, eq)), parse_double(item.substr(eq + 1))});
      }
    } else if (key == "confusion") {
      std::vector<std::string> rows;
      boost::split(rows, value, boost::is_any_of(";"));
      const auto n = static_cast<Eigen::Index>(rows.size());
      r.confusion = Eigen::MatrixXi::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto cells = split_list(rows[static_cast<std::size_t>(i)]);
        if (static_cast<Eigen::Index>(cells.size()) != n) throw std::runtime_error("malformed confusion in " + path.string());
        for (Eigen::Index j = 0; j < n; ++j) r.confusion(i, j) = parse_integer<int>(cells[static_cast<std::size_t>(j)]);
      }
    } else if (key.rfind("config.", 0) == 0) {
      const auto dot = key.find('.', 7);
      const std::string sec = key.substr(7, dot - 7);
      if (sec != section) {
        if (!section.empty()) echo << '\n';
        section = sec;
        echo << '[' << sec << "]\n";
      }
      echo << key.substr(dot + 1) << " = " << value << '\n';
    }
  }
  r.config_echo = echo.str();
  return r;
}

Summary summarize(const std::vector<ExperimentReport>& reports) {
  Summary s;
  for (const auto& r : reports) s[{r.task, r.variant, r.snr}].accuracies.push_back(r.final_accuracy);
  for (auto& [key, cell] : s) {
    double sum = 0.0;
    for (double a : cell.accuracies) sum += a;
    cell.mean_accuracy = sum / static_cast<double>(cell.accuracies.size());
  }
  return s;
}

Summary summarize_directory(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::exists(root)) {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
      if (entry.is_regular_file() && entry.path().filename() == "report.txt") files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ExperimentReport> reports;
  for (const auto& f : files) reports.push_back(read_report(f));
  return summarize(reports);
}

void write_summary(const Summary& summary, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write summary: " + path.string());
  os << "task\tvariant\tsnr\truns\tmean_accuracy\taccuracies\n";
  for (const auto& [key, cell] : summary) {
    os << key.task << '\t' << key.variant << '\t' << key.snr << '\t' << cell.accuracies.size() << '\t'
       << format_double(cell.mean_accuracy) << '\t' << join(cell.accuracies, format_double) << '\n';
  }
}

std::string sweep_table(const Summary& summary, const std::string& variant) {
  std::vector<std::string> tasks, snrs;
  for (const auto& [key, cell] : summary) {
    if (key.variant != variant) continue;
    if (std::find(tasks.begin(), tasks.end(), key.task) == tasks.end()) tasks.push_back(key.task);
    if (std::find(snrs.begin(), snrs.end(), key.snr) == snrs.end()) snrs.push_back(key.snr);
  }
  std::ostringstream os;
  os << "snr";
  for (const auto& t : tasks) os << '\t' << t;
  os << '\n';
  for (const auto& snr : snrs) {
    os << snr;
    for (const auto& t : tasks) {
      const auto it = summary.find({t, variant, snr});
      os << '\t' << (it == summary.end() ? std::string("-") : format_double(it->second.mean_accuracy));
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace isgfan
