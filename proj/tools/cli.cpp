#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "maskexplain/baselines.hpp"
#include "maskexplain/imaging.hpp"
#include "maskexplain/neuromask.hpp"
#include "maskexplain/train.hpp"

namespace maskexplain::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kOverlayAlpha = 0.6;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every option value after flags, config file and defaults are merged.
struct RunConfig {
  std::string model;
  std::string image;
  std::string out_dir = ".";
  std::string out;  // train: model file
  std::string manifest;
  std::string config;

  ExplainConfig explain;
  bool lambda_sp_set = false;
  bool lambda_sm_set = false;
  bool lambda_p_set = false;

  std::string method = "saliency";
  std::size_t n = 25;
  double sigma = 0.1;
  std::size_t patch = 8;
  std::size_t stride = 4;
  double fill = 0.5;

  std::size_t epochs = 10;
  double lr = 0.05;
  std::size_t batch_size = 8;
  std::size_t n_train = 200;
  std::size_t n_test = 50;
  std::size_t size = 32;
  std::size_t count = 50;
  std::size_t jobs = 1;
  bool oracles = false;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::ContractViolation:
      return kExitUsage;
    case ErrorCode::OptimizationDiverged:
      return kExitDiverged;
    default:
      return kExitIo;
  }
}

// key=value lines, '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string label_of(const Model& model, std::size_t k) {
  const auto& names = model.spec().label_names;
  return k < names.size() ? names[k] : std::to_string(k);
}

json explain_config_json(const ExplainConfig& c) {
  return json{{"lambda_p", c.lambda_p},       {"lambda_sp", c.lambda_sp},
              {"lambda_sm", c.lambda_sm},     {"tau", c.tau},
              {"iters", c.iterations},        {"alpha", c.alpha},
              {"beta", c.beta},               {"epsilon", c.epsilon},
              {"seed", c.seed},               {"snapshot_every", c.snapshot_every},
              {"sparse_form", c.sparse_form == SparseForm::Shifted ? "shifted" : "unshifted"}};
}

Model load_model_or_io(const std::string& path) {
  if (path.empty()) throw UsageError("--model is required");
  return load_model(path);
}

Image load_image_for(const Model& model, const std::string& path) {
  if (path.empty()) throw UsageError("--image is required");
  Image img = load_image(path);
  if (img.pixels.shape() != model.spec().input_shape) {
    throw UsageError("--image " + path + " has shape " + shape_to_string(img.pixels.shape()) +
                     " but the model expects " + shape_to_string(model.spec().input_shape));
  }
  return img;
}

// Fills lambdas not given on the command line or in the config file.
std::optional<RefineResult> resolve_lambdas(const RunConfig& rc, const Model& model,
                                            const Tensor& image, ExplainConfig& cfg) {
  if (rc.lambda_sp_set && rc.lambda_sm_set) return std::nullopt;
  RefineOptions opts;
  opts.base = cfg;
  RefineResult refined = refine_defaults(model, image, opts);
  if (!rc.lambda_sp_set) cfg.lambda_sp = refined.lambda_sp;
  if (!rc.lambda_sm_set) cfg.lambda_sm = refined.lambda_sm;
  if (!rc.lambda_p_set) cfg.lambda_p = refined.lambda_p;
  return refined;
}

json refine_json(const RefineResult& r) {
  json grid = json::array();
  for (const auto& p : r.grid) {
    grid.push_back({{"lambda_sp", p.lambda_sp},
                    {"lambda_sm", p.lambda_sm},
                    {"class_preserved", p.class_preserved},
                    {"mask_mean", p.mask_mean},
                    {"final_pred", std::isfinite(p.final_pred) ? json(p.final_pred) : json(nullptr)}});
  }
  return json{{"lambda_p", r.lambda_p},
              {"lambda_sp", r.lambda_sp},
              {"lambda_sm", r.lambda_sm},
              {"warning", r.warning},
              {"grid", grid}};
}

json loss_json(const std::vector<LossTerms>& history) {
  json total = json::array(), pred = json::array(), sparse = json::array(), smooth = json::array();
  for (const auto& t : history) {
    total.push_back(t.total);
    pred.push_back(t.pred);
    sparse.push_back(t.sparse);
    smooth.push_back(t.smooth);
  }
  return json{{"total", total}, {"pred", pred}, {"sparse", sparse}, {"smooth", smooth}};
}

// ---------------------------------------------------------------- train

int cmd_train(const RunConfig& rc, std::ostream& out) {
  if (rc.out.empty()) throw UsageError("--out is required");
  if (rc.size < 16) throw UsageError("--size must be at least 16");
  {
    // Fail on an unwritable destination before spending time on training.
    std::ofstream probe(rc.out, std::ios::binary | std::ios::app);
    if (!probe) throw IoError("cannot write model file " + rc.out);
  }
  const auto train_set = generate_shapes(rc.n_train, rc.size, rc.explain.seed);
  const auto test_set = generate_shapes(rc.n_test, rc.size, rc.explain.seed + 1);
  TrainOptions opts;
  opts.epochs = rc.epochs;
  opts.learning_rate = rc.lr;
  opts.batch_size = rc.batch_size;
  opts.seed = rc.explain.seed;
  const auto result = train_tiny_cnn(train_set, test_set, shape_labels(), opts);
  save_model(result.model, rc.out);
  out << "parameters: " << result.model.parameter_count() << "\n";
  out << "test accuracy: " << std::fixed << std::setprecision(4) << result.test_accuracy << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- dataset

int cmd_dataset(const RunConfig& rc, std::ostream& out) {
  if (rc.size < 16) throw UsageError("--size must be at least 16");
  if (rc.n == 0) throw UsageError("--n must be positive");
  const fs::path dir = rc.out_dir;
  ensure_dir(dir);
  const auto samples = generate_shapes(rc.n, rc.size, rc.explain.seed);
  write_shapes_dataset(samples, dir);
  out << "wrote " << samples.size() << " images and " << (dir / "manifest.jsonl").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- explain

int cmd_explain(const RunConfig& rc, std::ostream& out) {
  ExplainConfig cfg = rc.explain;
  cfg.validate();
  const Model model = load_model_or_io(rc.model);
  const Image image = load_image_for(model, rc.image);
  const fs::path dir = rc.out_dir;
  ensure_dir(dir);

  json report;
  const auto refined = resolve_lambdas(rc, model, image.pixels, cfg);
  report["config"] = {{"model", rc.model},
                      {"image", rc.image},
                      {"out_dir", rc.out_dir},
                      {"config", rc.config},
                      {"explain", explain_config_json(cfg)},
                      {"lambda_source", refined ? "refined" : "given"}};
  if (refined) report["refine"] = refine_json(*refined);
  report["iterations"] = cfg.iterations;
  if (cfg.iterations == 0) report["note"] = "zero iterations: mask is sigmoid of the initial weights";

  try {
    const ExplanationResult result = explain(model, image.pixels, cfg);
    save_mask(result.mask, dir / "mask.pgm");
    save_image(render_overlay(image, result.mask, kOverlayAlpha), dir / "overlay.ppm");
    json snapshots = json::array();
    for (const auto& s : result.snapshots) {
      const std::string name = "step_" + std::to_string(s.step) + ".pgm";
      save_mask(s.mask, dir / name);
      snapshots.push_back({{"step", s.step}, {"file", name}});
    }
    report["status"] = "ok";
    report["original_class"] = result.original_class;
    report["original_label"] = label_of(model, result.original_class);
    report["masked_class"] = result.masked_class;
    report["masked_label"] = label_of(model, result.masked_class);
    report["class_preserved"] = result.class_preserved();
    report["mask_mean"] = mean(result.mask);
    report["loss_history"] = loss_json(result.loss_history);
    report["outputs"] = {{"mask", "mask.pgm"}, {"overlay", "overlay.ppm"}, {"snapshots", snapshots}};
    write_text(dir / "report.json", report.dump(2) + "\n");
    out << "class " << label_of(model, result.original_class) << " -> "
        << label_of(model, result.masked_class)
        << (result.class_preserved() ? " (preserved)" : " (changed)") << ", mask mean "
        << mean(result.mask) << "\n";
    return kExitOk;
  } catch (const DivergedError& e) {
    report["status"] = "diverged";
    report["error"] = e.what();
    report["diverged_step"] = e.step();
    report["class_preserved"] = false;
    report["loss_history"] = loss_json(e.history());
    write_text(dir / "report.json", report.dump(2) + "\n");
    throw;
  }
}

// ---------------------------------------------------------------- baselines

void validate_baseline(const RunConfig& rc, const Shape& input) {
  if (rc.method == "smoothgrad") {
    if (rc.n == 0) throw UsageError("--n must be at least 1");
    if (!(rc.sigma >= 0.0)) throw UsageError("--sigma must be nonnegative");
  } else if (rc.method == "occlusion") {
    const std::size_t extent = std::min(input[0], input[1]);
    if (rc.patch == 0 || rc.patch > extent) {
      throw UsageError("--patch must lie in [1, " + std::to_string(extent) + "]");
    }
    if (rc.stride == 0 || rc.stride > extent) {
      throw UsageError("--stride must lie in [1, " + std::to_string(extent) + "]");
    }
    if (!(rc.fill >= 0.0 && rc.fill <= 1.0)) throw UsageError("--fill must lie in [0,1]");
  } else if (rc.method != "saliency") {
    throw UsageError("--method must be one of saliency, smoothgrad, occlusion");
  }
}

HeatmapResult run_baseline(const std::string& method, const RunConfig& rc, const Model& model,
                           const Tensor& image) {
  if (method == "saliency") return saliency(model, image);
  if (method == "smoothgrad") return smoothgrad(model, image, {rc.n, rc.sigma, rc.explain.seed});
  OcclusionOptions opts;
  opts.patch = rc.patch;
  opts.stride = rc.stride;
  opts.fill = rc.fill;
  return occlusion(model, image, opts);
}

int cmd_baseline(const RunConfig& rc, std::ostream& out) {
  if (rc.method != "saliency" && rc.method != "smoothgrad" && rc.method != "occlusion") {
    throw UsageError("--method must be one of saliency, smoothgrad, occlusion");
  }
  const Model model = load_model_or_io(rc.model);
  const Image image = load_image_for(model, rc.image);
  validate_baseline(rc, image.pixels.shape());
  const fs::path dir = rc.out_dir;
  ensure_dir(dir);

  const HeatmapResult heat = run_baseline(rc.method, rc, model, image.pixels);
  const Tensor shown = heat.normalized();
  save_mask(shown, dir / "heatmap.pgm");
  save_image(render_overlay(image, shown, kOverlayAlpha), dir / "overlay.ppm");
  json report{{"method", heat.method},
              {"config",
               {{"model", rc.model},
                {"image", rc.image},
                {"out_dir", rc.out_dir},
                {"config", rc.config},
                {"n", rc.n},
                {"sigma", rc.sigma},
                {"patch", rc.patch},
                {"stride", rc.stride},
                {"fill", rc.fill},
                {"seed", rc.explain.seed}}},
              {"normalization", {{"min", heat.min}, {"max", heat.max}}},
              {"outputs", {{"heatmap", "heatmap.pgm"}, {"overlay", "overlay.ppm"}}}};
  if (heat.method == "occlusion") report["forward_passes"] = heat.forward_passes;
  write_text(dir / "report.json", report.dump(2) + "\n");
  out << heat.method << " heatmap range [" << heat.min << ", " << heat.max << "]\n";
  return kExitOk;
}

// ---------------------------------------------------------------- compare

Tensor compose_sheet(const std::vector<Tensor>& panels, std::size_t gap) {
  const std::size_t h = panels.front().dim(0), w = panels.front().dim(1);
  const std::size_t total_w = panels.size() * w + (panels.size() - 1) * gap;
  Tensor sheet(Shape{h, total_w, 3}, 1.0);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const std::size_t x0 = p * (w + gap);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        for (std::size_t k = 0; k < 3; ++k) sheet.at(r, x0 + c, k) = panels[p].at(r, c, k);
      }
    }
  }
  return sheet;
}

int cmd_compare(const RunConfig& rc, std::ostream& out) {
  ExplainConfig cfg = rc.explain;
  cfg.validate();
  const Model model = load_model_or_io(rc.model);
  const Image image = load_image_for(model, rc.image);
  const fs::path dir = rc.out_dir;
  ensure_dir(dir);

  std::vector<Tensor> panels{image.pixels};
  json sidecar_panels = json::array();
  sidecar_panels.push_back({{"index", 0}, {"caption", "original"}, {"status", "ok"}});

  auto add_panel = [&](const std::string& caption, const std::function<Tensor()>& make) {
    json entry{{"index", panels.size()}, {"caption", caption}};
    try {
      panels.push_back(render_overlay(image, make(), kOverlayAlpha).pixels);
      entry["status"] = "ok";
    } catch (const std::exception& e) {
      panels.push_back(Tensor(image.pixels.shape(), 0.5));
      entry["status"] = "failed";
      entry["error"] = e.what();
    }
    sidecar_panels.push_back(entry);
  };

  add_panel("neuromask", [&] {
    ExplainConfig c = cfg;
    resolve_lambdas(rc, model, image.pixels, c);
    return explain(model, image.pixels, c).mask;
  });
  RunConfig sal = rc;
  add_panel("saliency", [&] { return run_baseline("saliency", sal, model, image.pixels).normalized(); });
  add_panel("smoothgrad",
            [&] { return run_baseline("smoothgrad", rc, model, image.pixels).normalized(); });
  add_panel("occlusion", [&] {
    validate_baseline([&] { RunConfig o = rc; o.method = "occlusion"; return o; }(),
                      image.pixels.shape());
    return run_baseline("occlusion", rc, model, image.pixels).normalized();
  });

  const Tensor sheet = compose_sheet(panels, 2);
  save_image(Image{sheet, std::nullopt}, dir / "compare.ppm");
  const std::size_t ok = static_cast<std::size_t>(std::count_if(
      sidecar_panels.begin(), sidecar_panels.end(), [](const json& p) { return p["status"] == "ok"; }));
  json sidecar{{"sheet", "compare.ppm"},
               {"width", sheet.dim(1)},
               {"height", sheet.dim(0)},
               {"separator_px", 2},
               {"panels", sidecar_panels},
               {"ok_panels", ok},
               {"config",
                {{"model", rc.model},
                 {"image", rc.image},
                 {"explain", explain_config_json(cfg)},
                 {"n", rc.n},
                 {"sigma", rc.sigma},
                 {"patch", rc.patch},
                 {"stride", rc.stride},
                 {"fill", rc.fill}}}};
  write_text(dir / "compare.json", sidecar.dump(2) + "\n");
  out << "sheet " << sheet.dim(1) << "x" << sheet.dim(0) << ", " << ok << "/" << panels.size()
      << " panels ok\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalRow {
  std::string method;
  double mass = 0.0;
  double preserved = 0.0;
  double seconds = 0.0;
};

int cmd_eval(const RunConfig& rc, std::ostream& out) {
  ExplainConfig cfg = rc.explain;
  cfg.validate();
  const Model model = load_model_or_io(rc.model);
  const Shape& input = model.spec().input_shape;

  struct Item {
    Tensor image;
    BBox bbox;
  };
  std::vector<Item> items;
  if (!rc.manifest.empty()) {
    for (const auto& e : read_dataset_manifest(rc.manifest)) {
      Image img = load_image(e.path);
      if (img.pixels.shape() != input) throw UsageError("dataset image " + e.path.string() + " does not match the model input");
      if (e.bbox.row1 >= input[0] || e.bbox.col1 >= input[1] || e.bbox.row0 > e.bbox.row1 ||
          e.bbox.col0 > e.bbox.col1) {
        throw UsageError("dataset bbox outside image for " + e.path.string());
      }
      items.push_back({std::move(img.pixels), e.bbox});
    }
  } else if (rc.count > 0) {
    const std::size_t per_class = (rc.count + shape_labels().size() - 1) / shape_labels().size();
    auto samples = generate_shapes(per_class, input[0], rc.explain.seed + 1000);
    samples.resize(rc.count);
    for (auto& s : samples) items.push_back({std::move(s.image.pixels), s.bbox});
  }
  if (items.empty()) throw UsageError("empty dataset");
  validate_baseline([&] { RunConfig o = rc; o.method = "occlusion"; return o; }(), input);

  std::vector<std::string> methods = {"neuromask", "saliency", "smoothgrad", "occlusion"};
  if (rc.oracles) {
    methods.push_back("oracle-bbox");
    methods.push_back("uniform");
  }
  const std::size_t m_count = methods.size();
  // per image x method: mass, preserved, seconds
  std::vector<std::array<double, 3>> cells(items.size() * m_count);

  auto process = [&](std::size_t i) {
    const Item& item = items[i];
    const std::size_t original = argmax(model.predict(item.image).data());
    for (std::size_t m = 0; m < m_count; ++m) {
      const auto t0 = std::chrono::steady_clock::now();
      Tensor mask;
      const std::string& name = methods[m];
      if (name == "neuromask") {
        ExplainConfig c = cfg;
        resolve_lambdas(rc, model, item.image, c);
        mask = explain(model, item.image, c).mask;
      } else if (name == "oracle-bbox") {
        mask = Tensor(Shape{input[0], input[1]});
        for (std::size_t r = 0; r < input[0]; ++r)
          for (std::size_t c = 0; c < input[1]; ++c) mask.at(r, c) = item.bbox.contains(r, c) ? 1.0 : 0.0;
      } else if (name == "uniform") {
        mask = Tensor(Shape{input[0], input[1]}, 1.0);
      } else {
        mask = run_baseline(name, rc, model, item.image).normalized();
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const std::size_t masked = argmax(model.predict(apply_mask(item.image, mask)).data());
      cells[i * m_count + m] = {mass_inside_bbox(mask, item.bbox), masked == original ? 1.0 : 0.0, secs};
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(rc.jobs, items.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < items.size(); ++i) process(i);
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t j = 0; j < jobs; ++j) {
      workers.emplace_back([&, j] {
        try {
          for (std::size_t i = j; i < items.size(); i += jobs) process(i);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<EvalRow> rows;
  for (std::size_t m = 0; m < m_count; ++m) {
    EvalRow row{methods[m]};
    for (std::size_t i = 0; i < items.size(); ++i) {
      row.mass += cells[i * m_count + m][0];
      row.preserved += cells[i * m_count + m][1];
      row.seconds += cells[i * m_count + m][2];
    }
    const double n = static_cast<double>(items.size());
    row.mass /= n;
    row.preserved /= n;
    row.seconds /= n;
    rows.push_back(row);
  }
  double area = 0.0;
  for (const auto& item : items) {
    area += static_cast<double>(item.bbox.area()) / static_cast<double>(input[0] * input[1]);
  }
  area /= static_cast<double>(items.size());

  out << std::left << std::setw(14) << "method" << std::right << std::setw(16) << "mass_in_bbox"
      << std::setw(16) << "class_kept" << std::setw(14) << "ms/image" << "\n";
  json table = json::array();
  for (const auto& r : rows) {
    out << std::left << std::setw(14) << r.method << std::right << std::fixed << std::setprecision(4)
        << std::setw(16) << r.mass << std::setw(16) << r.preserved << std::setprecision(1)
        << std::setw(14) << r.seconds * 1e3 << "\n";
    table.push_back({{"method", r.method},
                     {"mean_mass_inside_bbox", r.mass},
                     {"class_preservation_rate", r.preserved},
                     {"seconds_per_image", r.seconds}});
  }
  out << "images: " << items.size() << ", mean bbox area fraction: " << std::setprecision(4) << area << "\n";

  const fs::path dir = rc.out_dir;
  ensure_dir(dir);
  json doc{{"images", items.size()},
           {"mean_bbox_area_fraction", area},
           {"methods", table},
           {"config",
            {{"model", rc.model},
             {"manifest", rc.manifest},
             {"count", rc.count},
             {"explain", explain_config_json(cfg)},
             {"lambda_source", rc.lambda_sp_set && rc.lambda_sm_set ? "given" : "refined"},
             {"n", rc.n},
             {"sigma", rc.sigma},
             {"patch", rc.patch},
             {"stride", rc.stride},
             {"fill", rc.fill}}}};
  write_text(dir / "eval.json", doc.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------- parsing

struct Parsed {
  std::string command;
  RunConfig rc;
};

void add_explain_options(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--iters", rc.explain.iterations, "optimization steps T");
  sub->add_option("--alpha", rc.explain.alpha, "RMSProp learning rate");
  sub->add_option("--beta", rc.explain.beta, "RMSProp decay");
  sub->add_option("--epsilon", rc.explain.epsilon, "RMSProp stabilizer");
  sub->add_option("--tau", rc.explain.tau, "sparseness shift");
  sub->add_option("--lambda-p", rc.explain.lambda_p, "prediction cost weight");
  sub->add_option("--lambda-sp", rc.explain.lambda_sp, "sparseness cost weight (refined when omitted)");
  sub->add_option("--lambda-sm", rc.explain.lambda_sm, "smoothness cost weight (refined when omitted)");
  sub->add_option("--snapshot-every", rc.explain.snapshot_every, "write step_<k>.pgm every N steps");
}

void add_baseline_options(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--n", rc.n, "smoothgrad sample count");
  sub->add_option("--sigma", rc.sigma, "smoothgrad noise stddev");
  sub->add_option("--patch", rc.patch, "occlusion patch side");
  sub->add_option("--stride", rc.stride, "occlusion stride");
  sub->add_option("--fill", rc.fill, "occlusion fill gray value");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  rc.explain.seed = 0;
  CLI::App app{"Learned relevance masks and baseline saliency for a frozen image classifier",
               "maskexplain"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::map<std::string, CLI::App*> subs;
  auto make = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", rc.config, "key=value defaults file (env MASKEXPLAIN_CONFIG)");
    sub->add_option("--seed", rc.explain.seed, "random seed");
    subs[name] = sub;
    return sub;
  };

  CLI::App* train = make("train", "train the tiny CNN on generated shapes");
  train->add_option("--out", rc.out, "model file to write");
  train->add_option("--epochs", rc.epochs);
  train->add_option("--lr", rc.lr);
  train->add_option("--batch-size", rc.batch_size);
  train->add_option("--n-train", rc.n_train, "training images per class");
  train->add_option("--n-test", rc.n_test, "test images per class");
  train->add_option("--size", rc.size, "image side in pixels");

  CLI::App* dataset = make("dataset", "write a synthetic shapes dataset with manifest");
  dataset->add_option("--out-dir", rc.out_dir);
  dataset->add_option("--n", rc.n, "images per class");
  dataset->add_option("--size", rc.size, "image side in pixels");

  CLI::App* explain_cmd = make("explain", "learn a relevance mask for one image");
  explain_cmd->add_option("--model", rc.model);
  explain_cmd->add_option("--image", rc.image);
  explain_cmd->add_option("--out-dir", rc.out_dir);
  add_explain_options(explain_cmd, rc);

  CLI::App* baseline = make("baseline", "gradient or occlusion heatmap for one image");
  baseline->add_option("--model", rc.model);
  baseline->add_option("--image", rc.image);
  baseline->add_option("--out-dir", rc.out_dir);
  baseline->add_option("--method", rc.method, "saliency | smoothgrad | occlusion");
  add_baseline_options(baseline, rc);

  CLI::App* compare = make("compare", "side-by-side sheet of every explainer");
  compare->add_option("--model", rc.model);
  compare->add_option("--image", rc.image);
  compare->add_option("--out-dir", rc.out_dir);
  add_explain_options(compare, rc);
  add_baseline_options(compare, rc);

  CLI::App* eval = make("eval", "localization metrics over a dataset");
  eval->add_option("--model", rc.model);
  eval->add_option("--manifest", rc.manifest, "dataset manifest (JSON lines)");
  eval->add_option("--count", rc.count, "generated test images when no manifest is given");
  eval->add_option("--out-dir", rc.out_dir);
  eval->add_option("--jobs", rc.jobs, "worker threads");
  eval->add_flag("--oracles", rc.oracles, "add bbox-oracle and uniform-mask rows");
  add_explain_options(eval, rc);
  add_baseline_options(eval, rc);

  try {
    // Locate the subcommand and --config by hand so file values can be
    // injected ahead of the user's flags (later values win).
    std::vector<std::string> argv = args;
    std::string config_path;
    if (const char* env = std::getenv("MASKEXPLAIN_CONFIG"); env && *env) config_path = env;
    for (std::size_t i = 0; i < argv.size(); ++i) {
      if (argv[i] == "--config" && i + 1 < argv.size()) config_path = argv[i + 1];
      if (argv[i].rfind("--config=", 0) == 0) config_path = argv[i].substr(9);
    }
    auto sub_it = std::find_if(argv.begin(), argv.end(), [&](const std::string& a) { return subs.contains(a); });
    if (!config_path.empty() && sub_it != argv.end()) {
      CLI::App* sub = subs[*sub_it];
      std::set<std::string> known;
      for (const auto& [name, s] : subs) {
        for (const CLI::Option* opt : s->get_options()) {
          for (const auto& lname : opt->get_lnames()) known.insert(lname);
        }
      }
      std::vector<std::string> injected;
      for (const auto& [key, value] : read_config_file(config_path)) {
        if (!known.contains(key)) throw UsageError("unknown key '" + key + "' in config file " + config_path);
        if (key == "config") continue;
        const CLI::Option* opt = nullptr;
        try {
          opt = sub->get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
          continue;  // belongs to another subcommand
        }
        if (opt->get_type_size() == 0) {
          if (value == "true" || value == "1") injected.push_back("--" + key);
        } else {
          injected.push_back("--" + key);
          injected.push_back(value);
        }
      }
      argv.insert(sub_it + 1, injected.begin(), injected.end());
      rc.config = config_path;
    }
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }

  auto given = [&](CLI::App* sub, const std::string& name) {
    try {
      return sub->get_option(name)->count() > 0;
    } catch (const CLI::OptionNotFound&) {
      return false;
    }
  };

  try {
    for (const auto& [name, sub] : subs) {
      if (!sub->parsed()) continue;
      rc.lambda_sp_set = given(sub, "--lambda-sp");
      rc.lambda_sm_set = given(sub, "--lambda-sm");
      rc.lambda_p_set = given(sub, "--lambda-p");
      if (name == "train") {
        if (!given(sub, "--seed")) rc.explain.seed = 7;
        return cmd_train(rc, out);
      }
      if (name == "dataset") return cmd_dataset(rc, out);
      if (name == "explain") return cmd_explain(rc, out);
      if (name == "baseline") return cmd_baseline(rc, out);
      if (name == "compare") return cmd_compare(rc, out);
      if (name == "eval") return cmd_eval(rc, out);
    }
    err << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace maskexplain::cli
