// camlab command-line driver. One subcommand per experiment; every run
// writes its effective configuration next to its outputs.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "camlab/cam.hpp"
#include "camlab/checkpoint.hpp"
#include "camlab/datagen.hpp"
#include "camlab/errors.hpp"
#include "camlab/evalbench.hpp"
#include "camlab/imageio.hpp"
#include "camlab/lemma.hpp"
#include "camlab/parallel.hpp"
#include "camlab/sham.hpp"
#include "camlab/train.hpp"

namespace fs = std::filesystem;
using namespace camlab;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kConfig = 3, kIo = 4, kNumeric = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 17;
  std::size_t threads = default_threads();
  bool force = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key=value file; flags take precedence");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--seed", c.seed, "seed for all randomness");
  sub->add_option("--threads", c.threads, "worker threads");
  sub->add_flag("--force", c.force, "allow a non-empty output directory");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::map<std::string, std::string> read_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  for (std::size_t no = 1; std::getline(is, line); ++no) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(no) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

// Fills options not given on the command line from the config file.
void apply_config(CLI::App* sub, const std::string& file) {
  if (file.empty()) return;
  for (const auto& [key, value] : read_config(file)) {
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt || key == "config") throw ConfigError("config: unknown key '" + key + "' for " + sub->get_name());
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError("config: bad value for '" + key + "': " + e.what());
    }
  }
}

std::string effective_config(CLI::App* sub) {
  std::ostringstream os;
  os << "# camlab " << sub->get_name() << "\n";
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name == "force" || opt->get_expected_min() == 0) continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    os << name << " = " << value << "\n";
  }
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os || !(os << text)) throw IoError("cannot write " + path.string());
}

fs::path prepare_out(CLI::App* sub, const Common& c) {
  if (c.out.empty()) throw UsageError(sub->get_name() + ": --out is required");
  const fs::path dir = c.out;
  std::error_code ec;
  if (fs::exists(dir) && !fs::is_empty(dir) && !c.force)
    throw IoError("output directory " + dir.string() + " is not empty (pass --force to reuse it)");
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "config.txt", effective_config(sub));
  return dir;
}

void require(const std::string& value, const std::string& flag, CLI::App* sub) {
  if (value.empty()) throw UsageError(sub->get_name() + ": " + flag + " is required");
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw IoError("missing input " + path);
}

template <class T>
std::vector<T> split_list(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::istringstream is(item);
    T v;
    if (!(is >> v) || !is.eof()) throw ConfigError("cannot parse list item '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<MethodId> parse_methods(const std::string& s) {
  if (s == "all") return all_methods();
  std::vector<MethodId> out;
  for (const auto& name : split_list<std::string>(s)) out.push_back(parse_method(name));
  if (out.empty()) throw ConfigError("no methods given");
  return out;
}

Dataset load_data(const std::string& dir, std::size_t per_class) {
  require_file(dir);
  Dataset d = load_dataset(dir);
  return per_class ? take_per_class(d, per_class) : d;
}

Checkpoint load_model(const std::string& path) {
  require_file(path);
  return load_checkpoint(path);
}

Tensor to_model_input(const Tensor& img, const ModelConfig& cfg) {
  const std::size_t h = img.dim(1), w = img.dim(2);
  Tensor gray({h, w});
  for (std::size_t ch = 0; ch < img.dim(0); ++ch)
    for (std::size_t i = 0; i < h * w; ++i) gray[i] += img[ch * h * w + i] / double(img.dim(0));
  if (h != cfg.input_height || w != cfg.input_width) gray = resize_bilinear(gray, cfg.input_height, cfg.input_width);
  return gray.reshaped({1, cfg.input_height, cfg.input_width});
}

std::string summary(const ExperimentReport& r) {
  std::ostringstream os;
  char buf[256];
  os << r.name << " (" << r.rows.size() << " rows)\n";
  for (const auto& a : r.aggregates) {
    std::snprintf(buf, sizeof buf, "  %-22s %-18s n=%-5zu mean=%.6g std=%.6g\n", a.method.c_str(), a.metric.c_str(),
                  a.count, a.mean, a.std);
    os << buf;
  }
  for (const auto& t : r.tests) {
    std::snprintf(buf, sizeof buf, "  rank-sum %s vs %s [%s]: U=%.1f p=%.4g%s\n", t.method_a.c_str(),
                  t.method_b.c_str(), t.metric.c_str(), t.result.u, t.result.p, t.result.exact ? " (exact)" : "");
    os << buf;
  }
  return os.str();
}

void write_report(const ExperimentReport& r, const fs::path& dir, const std::string& format) {
  if (format != "csv" && format != "json" && format != "both") throw ConfigError("format must be csv|json|both");
  if (format != "json") export_report(r, dir / (r.name + ".csv"), ReportFormat::Csv);
  if (format != "csv") export_report(r, dir / (r.name + ".json"), ReportFormat::Json);
  const auto s = summary(r);
  write_text(dir / "summary.txt", s);
  std::cout << s;
}

ModelConfig model_config_for(const Dataset& d, const std::string& widths, std::size_t grid, std::uint64_t seed) {
  ModelConfig m;
  m.num_classes = d.num_classes;
  m.input_height = d.images.at(0).dim(1);
  m.input_width = d.images.at(0).dim(2);
  m.conv_widths = split_list<std::size_t>(widths);
  m.cam_height = m.cam_width = grid;
  m.seed = seed;
  m.validate();
  return m;
}

std::string train_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss,ce,sal,accuracy\n";
  for (const auto& e : log) os << e.epoch << ',' << e.loss << ',' << e.ce << ',' << e.sal << ',' << e.accuracy << '\n';
  return os.str();
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw ConfigError("grid must look like 7x7");
  const auto r = split_list<std::size_t>(s.substr(0, x)), c = split_list<std::size_t>(s.substr(x + 1));
  if (r.size() != 1 || c.size() != 1) throw ConfigError("grid must look like 7x7");
  return {r[0], c[0]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"camlab: CAM fooling and contrastive-CAM experiments"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::map<std::string, std::function<void(CLI::App*)>> run;
  Common c;

  // datagen
  SyntheticSpec gen;
  {
    auto* s = app.add_subcommand("datagen", "write synthetic train/val/test splits");
    s->option_defaults()->always_capture_default();
    add_common(s, c);
    s->add_option("--classes", gen.num_classes);
    s->add_option("--train-per-class", gen.train_per_class);
    s->add_option("--val-per-class", gen.val_per_class);
    s->add_option("--test-per-class", gen.test_per_class);
    s->add_option("--size", gen.image_size, "image side in pixels");
    s->add_option("--grid", gen.cam_grid, "mask side (CAM grid)");
    s->add_option("--jitter", gen.jitter);
    s->add_option("--noise", gen.noise_std);
    run["datagen"] = [&](CLI::App* sub) {
      gen.seed = c.seed;
      const auto dir = prepare_out(sub, c);
      const auto splits = generate_synthetic(gen);
      save_dataset(splits.train, dir / "train");
      save_dataset(splits.val, dir / "val");
      save_dataset(splits.test, dir / "test");
      std::cout << "train " << splits.train.size() << ", val " << splits.val.size() << ", test "
                << splits.test.size() << " images in " << dir << "\n";
    };
  }

  // train
  TrainConfig tc;
  std::string data, salience = "none", widths = "8,16,32";
  std::size_t per_class = 0, grid = 7;
  double entropy = 3.35;
  {
    auto* s = app.add_subcommand("train", "train the toy CNN (plain, mask or SHAM salience)");
    s->option_defaults()->always_capture_default();
    add_common(s, c);
    s->add_option("--data", data, "dataset directory");
    s->add_option("--per-class", per_class, "subsample per class (0 = all)");
    s->add_option("--salience", salience, "none|mask|sham");
    s->add_option("--epochs", tc.epochs);
    s->add_option("--lr", tc.learning_rate);
    s->add_option("--ce-weight", tc.ce_weight);
    s->add_option("--sal-weight", tc.sal_weight);
    s->add_option("--batch", tc.batch_size);
    s->add_option("--widths", widths, "conv block widths");
    s->add_option("--grid", grid, "CAM grid side");
    s->add_option("--entropy", entropy, "SHAM target entropy (nats)");
    run["train"] = [&](CLI::App* sub) {
      require(data, "--data", sub);
      const Dataset d = load_data(data, per_class);
      tc.salience = parse_salience_source(salience);
      tc.seed = c.seed;
      tc.threads = c.threads;
      const auto cfg = model_config_for(d, widths, grid, c.seed);
      const auto sham = generate_sham({cfg.cam_height, cfg.cam_width, entropy}).grid;
      const auto dir = prepare_out(sub, c);
      const auto r = train(build(cfg), d, tc, &sham);
      save_checkpoint(dir / "model.ckpt", r.model,
                      {{"salience", salience}, {"epochs", std::to_string(tc.epochs)}, {"seed", std::to_string(c.seed)}});
      write_text(dir / "train_log.csv", train_log_csv(r.log));
      const auto& last = r.log.empty() ? EpochLog{} : r.log.back();
      std::printf("trained %zu params, %zu epochs: loss %.4f, train accuracy %.4f\n", r.model.parameter_count(),
                  r.log.size(), last.loss, last.accuracy);
    };
  }

  // finetune-sham
  TrainConfig ft;
  ft.epochs = 1;
  ft.learning_rate = 0.015;
  ft.sal_weight = 10.0;
  std::string checkpoint;
  {
    auto* s = app.add_subcommand("finetune-sham", "fine-tune a checkpoint toward the SHAM mask");
    s->option_defaults()->always_capture_default();
    add_common(s, c);
    s->add_option("--checkpoint", checkpoint);
    s->add_option("--data", data);
    s->add_option("--per-class", per_class);
    s->add_option("--epochs", ft.epochs);
    s->add_option("--lr", ft.learning_rate);
    s->add_option("--ce-weight", ft.ce_weight);
    s->add_option("--sal-weight", ft.sal_weight);
    s->add_option("--batch", ft.batch_size);
    s->add_option("--entropy", entropy);
    run["finetune-sham"] = [&](CLI::App* sub) {
      require(checkpoint, "--checkpoint", sub);
      require(data, "--data", sub);
      const auto ck = load_model(checkpoint);
      const Dataset d = load_data(data, per_class);
      ft.seed = c.seed;
      ft.threads = c.threads;
      const auto& cfg = ck.model.config();
      const auto sham = generate_sham({cfg.cam_height, cfg.cam_width, entropy}).grid;
      const auto dir = prepare_out(sub, c);
      const auto r = finetune_sham(ck.model, d, sham, ft);
      auto meta = ck.metadata;
      meta["finetune"] = "sham";
      meta["finetune_epochs"] = std::to_string(ft.epochs);
      save_checkpoint(dir / "model.ckpt", r.model, meta);
      write_text(dir / "train_log.csv", train_log_csv(r.log));
      if (!r.log.empty())
        std::printf("fine-tuned: loss %.4f, salience MSE %.4f, accuracy %.4f\n", r.log.back().loss,
                    r.log.back().sal, r.log.back().accuracy);
    };
  }

  // cam
  std::vector<std::string> images;
  std::string indices, methods = "all";
  int cls = -1;
  double alpha = 0.5;
  {
    auto* s = app.add_subcommand("cam", "render saliency heatmaps");
    s->option_defaults()->always_capture_default();
    add_common(s, c);
    s->add_option("--checkpoint", checkpoint);
    s->add_option("--image", images, "PGM/PPM input (repeatable)");
    s->add_option("--data", data, "dataset directory, used with --indices");
    s->add_option("--indices", indices, "comma-separated dataset indices");
    s->add_option("--method", methods, "method name, comma list or all");
    s->add_option("--class", cls, "target class (-1 = predicted)");
    s->add_option("--alpha", alpha, "heatmap opacity");
    run["cam"] = [&](CLI::App* sub) {
      require(checkpoint, "--checkpoint", sub);
      const auto ck = load_model(checkpoint);
      const auto& cfg = ck.model.config();
      std::vector<std::pair<std::string, Tensor>> inputs;
      for (const auto& p : images) {
        require_file(p);
        inputs.emplace_back(fs::path(p).stem().string(), to_model_input(read_pnm(p), cfg));
      }
      if (!indices.empty()) {
        require(data, "--data", sub);
        const Dataset d = load_data(data, 0);
        for (auto i : split_list<std::size_t>(indices)) {
          if (i >= d.size()) throw ConfigError("index " + std::to_string(i) + " out of range");
          char id[32];
          std::snprintf(id, sizeof id, "%s_%05zu", to_string(d.split).c_str(), i);
          inputs.emplace_back(id, d.images[i]);
        }
      }
      if (inputs.empty()) throw UsageError("cam: give --image or --data with --indices");
      const auto ms = parse_methods(methods);
      if (cls >= int(cfg.num_classes)) throw ConfigError("class out of range");
      const auto dir = prepare_out(sub, c);
      std::size_t written = 0;
      for (const auto& [stem, img] : inputs) {
        const std::size_t target = cls >= 0 ? std::size_t(cls) : predict(ck.model, img);
        for (const auto& m : ms) {
          const auto map = run_method(ck.model, img, m, target);
          render_heatmap(map.normalized, img, dir / (stem + "_" + m.name() + ".ppm"), alpha);
          ++written;
        }
      }
      std::cout << written << " heatmaps written to " << dir << "\n";
    };
  }

  // similarity
  std::string aggregators = "mean,max,lse", format = "both";
  {
    auto* s = app.add_subcommand("similarity", "DiffGradCAM(++) vs GradCAM(++) MSE per aggregator");
    s->option_defaults()->always_capture_default();
    add_common(s, c);
    s->add_option("--checkpoint", checkpoint);
    s->add_option("--data", data);
    s->add_option("--per-class", per_class);
    s->add_option("--aggregators", aggregators);
    s->add_option("--format", format, "csv|json|both");
    run["similarity"] = [&](CLI::App* sub) {
      require(checkpoint, "--checkpoint", sub);
      require(data, "--data", sub);
      const auto ck = load_model(checkpoint);
      const Dataset d = load_data(data, per_class);
      std::vector<Aggregator> aggs;
      for (const auto& a : split_list<std::string>(aggregators)) aggs.push_back(parse_aggregator(a));
      const auto dir = prepare_out(sub, c);
      const auto r = similarity_study(ck.model, d, aggs, {fs::path(checkpoint).stem().string(), c.threads, c.seed});
      write_report(r, dir, format);
    };
  }

  // susceptibility
  std::string clean, fooled;
  {
    auto* s = app.add_subcommand("susceptibility", "clean vs SHAM-fine-tuned map MSE per method");
    s->option_defaults()->always_capture_default();
    add_common(s, c);
    s->add_option("--clean", clean, "clean checkpoint");
    s->add_option("--fooled", fooled, "SHAM fine-tuned checkpoint");
    s->add_option("--data", data);
    s->add_option("--per-class", per_class);
    s->add_option("--methods", methods);
    s->add_option("--format", format, "csv|json|both");
    run["susceptibility"] = [&](CLI::App* sub) {
      require(clean, "--clean", sub);
      require(fooled, "--fooled", sub);
      require(data, "--data", sub);
      const auto a = load_model(clean), b = load_model(fooled);
      const Dataset d = load_data(data, per_class);
      const auto ms = parse_methods(methods);
      const auto dir = prepare_out(sub, c);
      const auto r = susceptibility_study(a.model, b.model, d, ms, {fs::path(fooled).stem().string(), c.threads, c.seed});
      write_report(r, dir, format);
      const auto acc = paired_accuracy_report(a.model, b.model, d, c.threads);
      std::printf("accuracy clean %.4f, fooled %.4f\n", acc.plain, acc.sham);
    };
  }

  // bench
  std::size_t index = 0, runs = 110, discard = 10;
  {
    auto* s = app.add_subcommand("bench", "wall time per CAM method");
    s->option_defaults()->always_capture_default();
    add_common(s, c);
    s->add_option("--checkpoint", checkpoint);
    s->add_option("--data", data);
    s->add_option("--index", index, "dataset image to explain");
    s->add_option("--runs", runs);
    s->add_option("--discard", discard, "warm-up runs dropped");
    s->add_option("--methods", methods);
    s->add_option("--format", format, "csv|json|both");
    run["bench"] = [&](CLI::App* sub) {
      require(checkpoint, "--checkpoint", sub);
      require(data, "--data", sub);
      const auto ck = load_model(checkpoint);
      const Dataset d = load_data(data, 0);
      if (index >= d.size()) throw ConfigError("index out of range");
      const auto ms = parse_methods(methods);
      const auto dir = prepare_out(sub, c);
      const auto b = runtime_bench(ck.model, d.images[index], d.labels[index], ms, runs, discard,
                                   fs::path(checkpoint).stem().string());
      write_report(b.report, dir, format);
    };
  }

  // lemmas
  std::size_t trials = 100000, num_classes = 1000, gap_classes = 50;
  std::string dist = "gaussian", class_list = "10,100,1000", sigma_list = "0.5,1,3";
  double mu = 0.0, sigma = 1.0, gap_sigma = 0.05;
  {
    auto* s = app.add_subcommand("lemmas", "Monte Carlo checks of the residual-logit model");
    s->option_defaults()->always_capture_default();
    add_common(s, c);
    s->add_option("--trials", trials);
    s->add_option("--dist", dist, "gaussian|uniform|logistic");
    s->add_option("--mu", mu);
    s->add_option("--sigma", sigma);
    s->add_option("--classes", num_classes, "C for the expected-max check");
    s->add_option("--sweep-classes", class_list);
    s->add_option("--sweep-sigmas", sigma_list);
    s->add_option("--gap-sigma", gap_sigma);
    s->add_option("--gap-classes", gap_classes);
    run["lemmas"] = [&](CLI::App* sub) {
      ResidualModel rm;
      rm.dist = parse_residual_dist(dist);
      rm.mu = mu;
      rm.sigma = sigma;
      rm.num_classes = num_classes;
      rm.seed = c.seed;
      const auto classes = split_list<std::size_t>(class_list);
      const auto sigmas = split_list<double>(sigma_list);
      const auto dir = prepare_out(sub, c);

      const auto mc = run_mc(rm, trials, c.threads);
      std::ostringstream em;
      em.precision(17);
      em << "C,mu,sigma,mc_mean,mc_stderr,closed_form\n"
         << num_classes << ',' << mu << ',' << sigma << ',' << mc.expected_max.value << ','
         << mc.expected_max.stderr_ << ',' << expected_max_closed_form(mu, sigma, num_classes) << '\n';
      write_text(dir / "expected_max.csv", em.str());

      std::ostringstream dv;
      dv.precision(17);
      dv << "aggregator,delta_variance,delta_variance_stderr,beta_variance,beta_variance_stderr\n";
      for (const auto& st : mc.per_agg)
        dv << to_string(st.agg) << ',' << st.delta_variance.value << ',' << st.delta_variance.stderr_ << ','
           << st.beta_variance.value << ',' << st.beta_variance.stderr_ << '\n';
      write_text(dir / "delta_variance.csv", dv.str());

      const auto sweep = variance_sweep(classes, sigmas, trials, c.seed, c.threads);
      write_text(dir / "variance_sweep.csv", sweep_to_csv(sweep));

      std::ostringstream lg;
      lg.precision(17);
      lg << "sigma,C,gap,stderr,gap_over_sigma2\n";
      for (double s : {gap_sigma, gap_sigma / 2.0}) {
        const auto g = lse_mean_gap(s, gap_classes, trials, c.seed, c.threads);
        lg << s << ',' << gap_classes << ',' << g.value << ',' << g.stderr_ << ',' << g.value / (s * s) << '\n';
      }
      write_text(dir / "lse_gap.csv", lg.str());

      std::printf("E[max] over %zu trials: %.5f +- %.5f (closed form %.5f)\n", trials, mc.expected_max.value,
                  mc.expected_max.stderr_, expected_max_closed_form(mu, sigma, num_classes));
      for (const auto& st : mc.per_agg)
        std::printf("Var[Delta_%s] = %.6g +- %.2g\n", std::string(to_string(st.agg)).c_str(),
                    st.delta_variance.value, st.delta_variance.stderr_);
      std::printf("Jensen violations: %zu\n", mc.jensen_violations);
    };
  }

  // sham
  std::string grid_str = "7x7";
  {
    auto* s = app.add_subcommand("sham", "emit a SHAM mask");
    s->option_defaults()->always_capture_default();
    add_common(s, c);
    s->add_option("--grid", grid_str, "rows x cols");
    s->add_option("--entropy", entropy, "target entropy (nats)");
    run["sham"] = [&](CLI::App* sub) {
      const auto [rows, cols] = parse_grid(grid_str);
      const auto mask = generate_sham({rows, cols, entropy});
      const auto dir = prepare_out(sub, c);
      write_text(dir / "sham.txt", sham_to_text(mask.grid));
      write_pgm(dir / "sham.pgm", mask.grid);
      std::printf("%zu of %zu cells set, entropy %.4f nats\n", mask.ones, rows * cols, mask.entropy);
    };
  }

  CLI::App* sub = nullptr;
  try {
    app.parse(argc, argv);
    sub = app.get_subcommands().front();
    apply_config(sub, c.config);
    run.at(sub->get_name())(sub);
    return kOk;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "camlab: usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "camlab: usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "camlab: io error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "camlab: io error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "camlab: numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "camlab: config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::out_of_range& e) {
    std::cerr << "camlab: config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "camlab: error: " << e.what() << "\n";
    return kFailure;
  }
}
