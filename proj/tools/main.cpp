// Command-line front end: degradation, restoration, experiments, model
// building, and metric reports.
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "manifold/baselines.hpp"
#include "manifold/restore.hpp"
#include "manifold/rng.hpp"

namespace {

using namespace manifold;

// Flat key=value configuration. Unknown keys are rejected; values are kept
// as the strings that produced them so an emitted file reparses identically.
class RunConfig {
 public:
  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> kDefaults = {
        {"task", "sr3"},
        {"sigma", "auto"},
        {"seed", "1"},
        {"strategy", "agnn"},
        {"lambda", "auto"},
        {"outer_iters", "4"},
        {"inner_iters", "10"},
        {"code_steps", "2"},
        {"patch_h", "6"},
        {"patch_w", "6"},
        {"stride", "1"},
        {"agnn.c1", "10"},
        {"agnn.c2", "0.9"},
        {"agnn.kappa", "2"},
        {"agnn.s", "35"},
        {"agnn.min_size", "0"},
        {"goc.C", "64"},
        {"goc.c3", "0.5"},
        {"goc.L0", "1"},
        {"goc.Kmax", "40"},
        {"goc.Lmax", "5"},
        {"goc.gamma", "150"},
        {"goc.r", "8"},
        {"kmeans.C", "64"},
        {"kmeans.max_iter", "100"},
        {"geod.k", "0"},
        {"rotsim.step", "5"},
        {"rotsim.classes_min", "3"},
        {"rotsim.classes_max", "10"},
        {"rotsim.size", "10"},
        {"rotsim.c1", "10"},
        {"rotsim.c2", "0.9"},
        {"rotsim.kappa", "2"},
        {"rotsim.s", "8"},
        {"rotsim.min_size", "12"},
    };
    return kDefaults;
  }

  RunConfig() : values_(defaults()) {}

  void set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ParamError("unknown config key: " + key);
    it->second = value;
  }

  void set_pair(const std::string& pair) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos) throw ParamError("expected key=value, got: " + pair);
    std::string key = pair.substr(0, eq);
    std::string value = pair.substr(eq + 1);
    trim(key);
    trim(value);
    set(key, value);
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::string line;
    while (std::getline(in, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      trim(line);
      if (line.empty()) continue;
      set_pair(line);
    }
  }

  const std::string& str(const std::string& key) const { return values_.at(key); }

  double num(const std::string& key) const {
    try {
      return std::stod(values_.at(key));
    } catch (const std::exception&) {
      throw ParamError("config key " + key + " is not a number: " + values_.at(key));
    }
  }

  int integer(const std::string& key) const {
    try {
      return std::stoi(values_.at(key));
    } catch (const std::exception&) {
      throw ParamError("config key " + key + " is not an integer: " + values_.at(key));
    }
  }

  std::uint64_t seed() const {
    try {
      return std::stoull(values_.at("seed"));
    } catch (const std::exception&) {
      throw ParamError("config key seed is not an integer: " + values_.at("seed"));
    }
  }

  // "auto" resolves to the fallback
  double num_or(const std::string& key, double fallback) const {
    if (values_.at(key) == "auto") return fallback;
    return num(key);
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config " + path);
    for (const auto& [key, value] : values_) out << key << "=" << value << "\n";
    if (!out) throw IoError("write failed for config " + path);
  }

  bool operator==(const RunConfig& other) const { return values_ == other.values_; }

 private:
  static void trim(std::string& text) {
    const auto begin = text.find_first_not_of(" \t\r");
    const auto end = text.find_last_not_of(" \t\r");
    text = begin == std::string::npos ? std::string() : text.substr(begin, end - begin + 1);
  }

  std::map<std::string, std::string> values_;
};

DegradationOp make_op(const RunConfig& cfg) {
  const std::string& task = cfg.str("task");
  DegradationOp op;
  if (task == "sr3") {
    op.kind = TaskKind::superres;
    op.blur = gaussian_kernel(7, 1.6);
    op.scale = 3;
    op.noise_sigma = cfg.num_or("sigma", 0.0);
  } else if (task == "deblur-uniform9") {
    op.kind = TaskKind::deblur;
    op.blur = uniform_kernel(9);
    op.noise_sigma = cfg.num_or("sigma", 1.4142135623730951);
  } else if (task == "deblur-gauss7") {
    op.kind = TaskKind::deblur;
    op.blur = gaussian_kernel(7, 1.6);
    op.noise_sigma = cfg.num_or("sigma", 1.4142135623730951);
  } else if (task == "denoise") {
    op.kind = TaskKind::denoise;
    op.noise_sigma = cfg.num_or("sigma", 10.0);
  } else {
    throw ParamError("unknown task: " + task);
  }
  return op;
}

Strategy parse_strategy(const std::string& name) {
  if (name == "agnn") return Strategy::agnn;
  if (name == "goc") return Strategy::goc;
  if (name == "kmeans") return Strategy::kmeans;
  if (name == "geod") return Strategy::geod;
  throw ParamError("unknown strategy: " + name);
}

AgnnParams agnn_params(const RunConfig& cfg, const std::string& prefix) {
  AgnnParams p;
  p.c1 = cfg.num(prefix + ".c1");
  p.c2 = cfg.num(prefix + ".c2");
  p.kappa = cfg.integer(prefix + ".kappa");
  p.s = cfg.integer(prefix + ".s");
  p.min_size = cfg.integer(prefix + ".min_size");
  return p;
}

RestoreConfig make_restore_config(const RunConfig& cfg) {
  RestoreConfig rc;
  rc.strategy = parse_strategy(cfg.str("strategy"));
  rc.lambda = cfg.str("lambda") == "auto" ? -1.0 : cfg.num("lambda");
  rc.outer_iters = cfg.integer("outer_iters");
  rc.inner_iters = cfg.integer("inner_iters");
  rc.code_steps = cfg.integer("code_steps");
  rc.patch_h = cfg.integer("patch_h");
  rc.patch_w = cfg.integer("patch_w");
  rc.stride = cfg.integer("stride");
  rc.agnn = agnn_params(cfg, "agnn");
  rc.goc.C = cfg.integer("goc.C");
  rc.goc.c3 = cfg.num("goc.c3");
  rc.goc.L0 = cfg.integer("goc.L0");
  rc.goc.Kmax = cfg.integer("goc.Kmax");
  rc.goc.Lmax = cfg.integer("goc.Lmax");
  rc.goc.gamma = cfg.num("goc.gamma");
  rc.goc.r = cfg.integer("goc.r");
  rc.kmeans_clusters = cfg.integer("kmeans.C");
  rc.kmeans_max_iter = cfg.integer("kmeans.max_iter");
  rc.geod_k = cfg.integer("geod.k");
  return rc;
}

Image crop_common(const Image& img, int h, int w) {
  Image out(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out.at(r, c) = img.at(r, c);
  return out;
}

struct MetricsRow {
  std::string image;
  std::string strategy;
  std::string task;
  double psnr_db;
  double ssim_value;
  double wall_seconds;
};

void write_metrics(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "image,strategy,task,psnr_db,ssim,wall_seconds\n";
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.4f,%.6f,%.3f", row.psnr_db, row.ssim_value,
                  row.wall_seconds);
    out << row.image << "," << row.strategy << "," << row.task << "," << buf << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

// metrics against a reference that may exceed the restored frame (the
// degradation crops to a scale multiple)
std::pair<double, double> frame_metrics(const Image& result, const Image& ref) {
  const int h = std::min(result.height, ref.height);
  const int w = std::min(result.width, ref.width);
  const Image a = crop_common(result, h, w);
  const Image b = crop_common(ref, h, w);
  return {psnr(a, b), ssim(a, b)};
}

int cmd_degrade(const RunConfig& cfg, const std::string& in, const std::string& out) {
  const Image img = read_image(in);
  const DegradationOp op = make_op(cfg);
  const Image y = degrade(img, op, cfg.seed());
  write_pgm(y, out);

  std::ofstream sidecar(out + ".op");
  if (!sidecar) throw IoError("cannot write " + out + ".op");
  sidecar << "task=" << cfg.str("task") << "\n";
  sidecar << "scale=" << op.scale << "\n";
  sidecar << "blur_size=" << op.blur.rows() << "\n";
  sidecar << "noise_sigma=" << op.noise_sigma << "\n";
  sidecar << "seed=" << cfg.seed() << "\n";
  cfg.write(out + ".cfg");
  return 0;
}

int cmd_restore(const RunConfig& cfg, const std::string& in, const std::string& out,
                const std::string& ref_path, const std::string& metrics_path) {
  if (!metrics_path.empty() && ref_path.empty())
    throw ParamError("--metrics requires --ref for quality scores");

  const Image y = read_image(in);
  const DegradationOp op = make_op(cfg);
  const RestoreConfig rc = make_restore_config(cfg);

  const auto t0 = std::chrono::steady_clock::now();
  const Image xhat = restore(y, op, rc, cfg.seed());
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_pgm(xhat, out);
  cfg.write(out + ".cfg");

  if (!metrics_path.empty()) {
    const Image ref = read_image(ref_path);
    const auto [p, s] = frame_metrics(xhat, ref);
    write_metrics({{in, cfg.str("strategy"), cfg.str("task"), p, s, wall}}, metrics_path);
  }
  return 0;
}

int cmd_rotsim(const RunConfig& cfg, const std::string& out) {
  const int lo = cfg.integer("rotsim.classes_min");
  const int hi = cfg.integer("rotsim.classes_max");
  if (lo < 1 || hi < lo) throw ParamError("invalid rotsim class range");

  std::uint64_t state = cfg.seed();
  const std::uint64_t ref_seed = split_seed(state);
  const std::uint64_t kmeans_seed = split_seed(state);

  const std::vector<Image> refs =
      reference_patches(hi, cfg.integer("rotsim.size"), ref_seed);
  const AgnnParams params = agnn_params(cfg, "rotsim");

  std::ofstream csv(out);
  if (!csv) throw IoError("cannot write " + out);
  csv << "cluster_count,agnn_rate,euclid_rate,kmeans_rate\n";
  char buf[96];
  for (int c = lo; c <= hi; ++c) {
    const std::vector<Image> sub(refs.begin(), refs.begin() + c);
    const LabeledPatches data = rotated_patch_dataset(sub, cfg.num("rotsim.step"), ref_seed);
    const RotationRates rates = rotation_experiment_rates(data, params, kmeans_seed);
    std::snprintf(buf, sizeof(buf), "%d,%.4f,%.4f,%.4f", c, rates.agnn, rates.euclid,
                  rates.kmeans);
    csv << buf << "\n";
  }
  if (!csv) throw IoError("write failed for " + out);
  cfg.write(out + ".cfg");
  return 0;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_bench(RunConfig cfg, const std::string& images, const std::string& strategies,
              const std::string& tasks, const std::string& out) {
  const std::vector<std::string> image_list = split_list(images);
  const std::vector<std::string> strategy_list = split_list(strategies);
  const std::vector<std::string> task_list = split_list(tasks);

  std::vector<MetricsRow> rows;
  std::uint64_t state = cfg.seed();
  for (const std::string& image_path : image_list) {
    const Image original = read_image(image_path);
    for (const std::string& task : task_list) {
      cfg.set("task", task);
      const DegradationOp op = make_op(cfg);
      const std::uint64_t cell_seed = split_seed(state);
      const Image y = degrade(original, op, cell_seed);
      for (const std::string& strategy : strategy_list) {
        cfg.set("strategy", strategy);
        const RestoreConfig rc = make_restore_config(cfg);
        const auto t0 = std::chrono::steady_clock::now();
        const Image xhat = restore(y, op, rc, cell_seed);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto [p, s] = frame_metrics(xhat, original);
        rows.push_back({image_path, strategy, task, p, s, wall});
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    if (a.image != b.image) return a.image < b.image;
    if (a.strategy != b.strategy) return a.strategy < b.strategy;
    return a.task < b.task;
  });
  write_metrics(rows, out);
  cfg.write(out + ".cfg");
  return 0;
}

int cmd_graph_build(const RunConfig& cfg, const std::string& in, const std::string& out,
                    bool raw) {
  const Image img = read_image(in);
  const PatchSet train =
      extract_patches(img, cfg.integer("patch_h"), cfg.integer("patch_w"), cfg.integer("stride"));
  const AffinityGraph graph = build_graph(train, cfg.integer("agnn.s"), cfg.num("agnn.c1"));
  if (raw) {
    save_graph(graph.entries, out);
  } else {
    save_graph(diffuse_graph(graph).entries, out);
  }
  cfg.write(out + ".cfg");
  return 0;
}

int cmd_goc_build(const RunConfig& cfg, const std::string& in, const std::string& prefix) {
  const Image img = read_image(in);
  const PatchSet train =
      extract_patches(img, cfg.integer("patch_h"), cfg.integer("patch_w"), cfg.integer("stride"));
  RestoreConfig rc = make_restore_config(cfg);
  const ClusterModel model = build_model(train, rc.goc, cfg.seed());
  save_model(model, prefix + "_members.csv", prefix + "_bases.bin");
  cfg.write(prefix + ".cfg");
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& ref_path, const std::string& test_path,
             const std::string& out) {
  const Image ref = read_image(ref_path);
  const Image test = read_image(test_path);
  const auto t0 = std::chrono::steady_clock::now();
  const auto [p, s] = frame_metrics(test, ref);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_metrics({{test_path, cfg.str("strategy"), cfg.str("task"), p, s, wall}}, out);
  cfg.write(out + ".cfg");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-aware neighborhood selection and image restoration"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string in_path, out_path, ref_path, metrics_path;
  std::string images, strategies = "agnn", tasks = "sr3";
  std::string task_flag, strategy_flag, seed_flag, sigma_flag;
  bool raw_graph = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file");
    cmd->add_option("--set", overrides, "config override key=value (repeatable)");
    cmd->add_option("--task", task_flag, "degradation task");
    cmd->add_option("--seed", seed_flag, "root seed");
    cmd->add_option("--sigma", sigma_flag, "noise standard deviation");
  };

  CLI::App* degrade_cmd = app.add_subcommand("degrade", "apply a degradation operator");
  degrade_cmd->add_option("--in", in_path)->required();
  degrade_cmd->add_option("--out", out_path)->required();
  add_common(degrade_cmd);

  CLI::App* restore_cmd = app.add_subcommand("restore", "restore a degraded image");
  restore_cmd->add_option("--in", in_path)->required();
  restore_cmd->add_option("--out", out_path)->required();
  restore_cmd->add_option("--ref", ref_path, "reference image for metrics");
  restore_cmd->add_option("--metrics", metrics_path, "metrics CSV output");
  restore_cmd->add_option("--strategy", strategy_flag, "agnn|goc|kmeans|geod");
  add_common(restore_cmd);

  CLI::App* rotsim_cmd = app.add_subcommand("rotsim", "rotated-patch clustering experiment");
  rotsim_cmd->add_option("--out", out_path)->required();
  add_common(rotsim_cmd);

  CLI::App* bench_cmd = app.add_subcommand("bench", "sweep strategies x images x tasks");
  bench_cmd->add_option("--images", images, "comma-separated reference images");
  bench_cmd->add_option("--strategies", strategies, "comma-separated strategies");
  bench_cmd->add_option("--tasks", tasks, "comma-separated tasks");
  bench_cmd->add_option("--out", out_path)->required();
  add_common(bench_cmd);

  CLI::App* graph_cmd = app.add_subcommand("graph-build", "build and save an affinity graph");
  graph_cmd->add_option("--in", in_path)->required();
  graph_cmd->add_option("--out", out_path)->required();
  graph_cmd->add_flag("--raw", raw_graph, "save the undiffused graph");
  add_common(graph_cmd);

  CLI::App* goc_cmd = app.add_subcommand("goc-build", "build and save a cluster model");
  goc_cmd->add_option("--in", in_path)->required();
  goc_cmd->add_option("--out", out_path, "output prefix")->required();
  add_common(goc_cmd);

  CLI::App* eval_cmd = app.add_subcommand("eval", "psnr/ssim between two images");
  eval_cmd->add_option("--ref", ref_path)->required();
  eval_cmd->add_option("--test", in_path)->required();
  eval_cmd->add_option("--out", out_path)->required();
  add_common(eval_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const std::string& pair : overrides) cfg.set_pair(pair);
    if (!task_flag.empty()) cfg.set("task", task_flag);
    if (!seed_flag.empty()) cfg.set("seed", seed_flag);
    if (!sigma_flag.empty()) cfg.set("sigma", sigma_flag);
    if (!strategy_flag.empty()) cfg.set("strategy", strategy_flag);

    if (degrade_cmd->parsed()) return cmd_degrade(cfg, in_path, out_path);
    if (restore_cmd->parsed()) return cmd_restore(cfg, in_path, out_path, ref_path, metrics_path);
    if (rotsim_cmd->parsed()) return cmd_rotsim(cfg, out_path);
    if (bench_cmd->parsed()) return cmd_bench(cfg, images, strategies, tasks, out_path);
    if (graph_cmd->parsed()) return cmd_graph_build(cfg, in_path, out_path, raw_graph);
    if (goc_cmd->parsed()) return cmd_goc_build(cfg, in_path, out_path);
    if (eval_cmd->parsed()) return cmd_eval(cfg, ref_path, in_path, out_path);
    return 2;
  } catch (const ParamError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  }
}
