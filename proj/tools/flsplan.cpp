// flsplan: plan FLS deployments and motion encodings from the command line.
//
//   flsplan deploy    CLOUD     [display] [--algo mindist|quota|both]
//   flsplan conflicts CLOUD     [display] [--algo ...] [--resolve]
//   flsplan encode    MANIFEST  [display] [--variant ...] [--theta N] [--omega N]
//   flsplan verify    ENCODING MANIFEST
//
// Exit codes: 0 ok, 1 bad input, 2 infeasible, 3 replay mismatch.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flsplan/flsplan.hpp"

namespace fs = std::filesystem;
using namespace flsplan;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitMismatch = 3;

struct DisplayOptions {
  std::string dims{"100,100,100"};
  std::string dispatchers{"corners8"};
  std::optional<std::size_t> inventory;
  double rate{10.0};
  double speed{4.0};
  double threshold{0.2};
  std::size_t workers{1};
  std::string out;
  std::string format{"csv"};
};

void add_display_options(CLI::App& cmd, DisplayOptions& o) {
  cmd.add_option("--dims", o.dims, "display size L,H,D in cells")->capture_default_str();
  cmd.add_option("--dispatchers", o.dispatchers,
                 "corners8, corners4-bottom, or a file of 'x y z [inventory]' lines")
      ->capture_default_str();
  cmd.add_option("--inventory", o.inventory, "FLSs per corner dispatcher (default unbounded)");
  cmd.add_option("--rate", o.rate, "FLSs launched per second per dispatcher")->capture_default_str();
  cmd.add_option("--speed", o.speed, "FLS speed in cells per second")->capture_default_str();
  cmd.add_option("--threshold", o.threshold, "conflict distance in cells")->capture_default_str();
  cmd.add_option("--workers", o.workers, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--out", o.out, "output directory (default: stdout)");
  cmd.add_option("--format", o.format, "report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
}

Dims parse_dims(const std::string& text) {
  std::vector<int> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ValidationError("--dims expects L,H,D integers, got '" + text + "'");
    }
  }
  if (v.size() != 3) throw ValidationError("--dims expects L,H,D integers, got '" + text + "'");
  return {v[0], v[1], v[2]};
}

std::vector<Dispatcher> load_dispatchers(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io::IoError("cannot open dispatcher file " + path.string());
  std::vector<Dispatcher> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::istringstream fields(raw.substr(0, raw.find('#')));
    std::vector<std::string> f;
    for (std::string s; fields >> s;) f.push_back(s);
    if (f.empty()) continue;
    if (f.size() != 3 && f.size() != 4) {
      throw io::ParseError(path.string(), line, "expected 'x y z [inventory]'");
    }
    Dispatcher d;
    d.id = static_cast<int>(out.size()) + 1;
    try {
      d.position = {std::stod(f[0]), std::stod(f[1]), std::stod(f[2])};
      if (f.size() == 4) d.inventory = std::stoull(f[3]);
    } catch (const std::exception&) {
      throw io::ParseError(path.string(), line, "bad number");
    }
    out.push_back(d);
  }
  return out;
}

DisplayConfig make_display(const DisplayOptions& o) {
  const Dims dims = parse_dims(o.dims);
  DisplayConfig cfg;
  if (o.dispatchers == "corners8") {
    cfg = DisplayConfig::corners8(dims, o.rate, o.speed, o.inventory);
  } else if (o.dispatchers == "corners4-bottom") {
    cfg = DisplayConfig::corners4_bottom(dims, o.rate, o.speed, o.inventory);
  } else {
    cfg.dims = dims;
    cfg.deploy_rate = o.rate;
    cfg.fls_speed = o.speed;
    cfg.dispatchers = load_dispatchers(o.dispatchers);
  }
  cfg.conflict_threshold = o.threshold;
  cfg.validate();
  return cfg;
}

std::uint64_t sampling_seed() {
  if (const char* env = std::getenv("FLSPLAN_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ValidationError(std::string("FLSPLAN_SEED must be an unsigned integer, got '") + env + "'");
    }
  }
  return 0;
}

/// Point clouds come from .xyz/.ply point files or, for .off and with
/// --mesh, from sampling a mesh.
PointCloud load_input(const fs::path& path, const Dims& dims, bool mesh, std::size_t density) {
  auto ext = path.extension().string();
  if (mesh || ext == ".off") {
    return io::sample_mesh_to_cloud(io::load_mesh(path), dims, density, sampling_seed());
  }
  return io::load_cloud(path);
}

std::vector<Assigner> algorithms(const std::string& algo) {
  if (algo == "mindist") return {Assigner::MinDist};
  if (algo == "quota") return {Assigner::QuotaBalanced};
  return {Assigner::MinDist, Assigner::QuotaBalanced};
}

/// Writes `text` to DIR/name, or to stdout when no directory was given.
void emit(const DisplayOptions& o, const std::string& name, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  fs::create_directories(o.out);
  const fs::path path = fs::path(o.out) / name;
  std::ofstream out(path);
  if (!out) throw io::IoError("cannot write " + path.string());
  out << text;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

int run_deploy(const std::string& input, const DisplayOptions& o, const std::string& algo,
               bool mesh, std::size_t density) {
  const DisplayConfig display = make_display(o);
  const PointCloud cloud = load_input(input, display.dims, mesh, density);
  cloud.check_within(display.dims);

  std::vector<io::MetricsReport> reports;
  for (const Assigner a : algorithms(algo)) {
    const auto t0 = std::chrono::steady_clock::now();
    const DeploymentPlan plan = assign(cloud, display, a);
    const DeploymentSchedule schedule = order_deployments(plan, display);
    const double ms = elapsed_ms(t0);
    DetectOptions opts;
    opts.workers = o.workers;
    const ConflictReport conflicts = detect_conflicts(schedule, display.conflict_threshold, opts);

    io::MetricsReport r;
    r.algorithm = to_string(a);
    r.latency_seconds = compute_latency(schedule);
    r.total_distance_cells = total_distance(plan, display);
    r.intersecting_paths = conflicts.intersecting.size();
    r.conflicts = conflicts.conflicts.size();
    r.execution_time_ms = ms;
    r.dispatcher_counts = plan.counts();
    r.quota_resets = plan.quota_resets;
    reports.push_back(r);
  }
  std::ostringstream text;
  if (o.format == "json") {
    io::write_metrics_json(text, reports);
  } else {
    io::write_metrics_csv(text, reports);
  }
  emit(o, "metrics." + o.format, text.str());
  return 0;
}

int run_conflicts(const std::string& input, const DisplayOptions& o, const std::string& algo,
                  bool resolve, bool mesh, std::size_t density) {
  const DisplayConfig display = make_display(o);
  const PointCloud cloud = load_input(input, display.dims, mesh, density);
  cloud.check_within(display.dims);

  io::Json doc = io::Json::array();
  for (const Assigner a : algorithms(algo)) {
    const DeploymentSchedule schedule = order_deployments(assign(cloud, display, a), display);
    DetectOptions opts;
    opts.workers = o.workers;
    const ConflictReport report = detect_conflicts(schedule, display.conflict_threshold, opts);
    io::Json entry = io::conflicts_to_json(report);
    entry["algorithm"] = to_string(a);
    entry["latency_seconds"] = compute_latency(schedule);
    if (resolve) {
      const Resolution fixed = resolve_by_delay(schedule, report);
      const ConflictReport after = detect_conflicts(fixed.schedule, display.conflict_threshold, opts);
      entry["resolution"] = {{"rounds", fixed.rounds},
                             {"conflicts", after.conflicts.size()},
                             {"latency_seconds", compute_latency(fixed.schedule)}};
    }
    doc.push_back(std::move(entry));
  }
  emit(o, "conflicts.json", doc.dump(2) + "\n");
  return 0;
}

int run_encode(const std::string& manifest_path, const DisplayOptions& o, const std::string& algo,
               const std::string& variant, std::optional<std::size_t> theta,
               std::optional<std::size_t> omega) {
  const DisplayConfig display = make_display(o);
  const io::SceneManifest manifest = io::load_manifest(manifest_path);
  const Scene scene = io::load_scene(manifest);

  GpcConfig config;
  config.variant = variant == "simple" ? Variant::Simple
                   : variant == "icl"  ? Variant::Icl
                                       : Variant::Icf;
  config.theta = theta;
  config.omega = omega ? omega : manifest.gpc_size;
  if (!theta) {
    std::cerr << "note: cuboid capacity unbounded, " << variant
              << (config.variant == Variant::Simple ? "" : " runs as SIMPLE (one cuboid)") << "\n";
  }
  const Assigner initial = algo == "quota" ? Assigner::QuotaBalanced : Assigner::MinDist;
  const SceneEncoding enc = encode_scene(scene, display, config, initial, o.workers);

  emit(o, "encoding.json", io::encoding_to_json(enc, display.fls_speed).dump() + "\n");

  std::vector<std::pair<std::size_t, double>> distance;
  std::vector<std::pair<std::size_t, double>> time;
  std::vector<std::pair<std::size_t, double>> flights;
  for (std::size_t i = 0; i < enc.metrics.size(); ++i) {
    distance.emplace_back(i + 1, enc.metrics[i].distance);
    time.emplace_back(i + 1, enc.metrics[i].elapsed_ms);
    flights.emplace_back(i + 1, static_cast<double>(enc.metrics[i].flights));
  }
  std::ostringstream d;
  std::ostringstream t;
  std::ostringstream f;
  io::write_series_csv(d, "distance_cells", distance);
  io::write_series_csv(t, "execution_time_ms", time);
  io::write_series_csv(f, "flight_paths", flights);
  if (o.out.empty()) {
    std::cout << d.str();
  } else {
    emit(o, "series_distance.csv", d.str());
    emit(o, "series_time.csv", t.str());
    emit(o, "series_flights.csv", f.str());
  }
  return 0;
}

int run_verify(const std::string& encoding_path, const std::string& manifest_path) {
  const SceneEncoding enc = io::load_encoding(encoding_path);
  const Scene scene = io::load_scene(io::load_manifest(manifest_path));
  const ReplayReport report = verify_encoding(enc, scene);
  if (report.passed) {
    std::cout << "PASS " << scene.clouds.size() << " clouds replayed\n";
    return 0;
  }
  std::cout << "FAIL cloud " << report.cloud_index;
  if (report.cell) std::cout << " cell " << to_string(*report.cell);
  std::cout << ": " << report.detail << "\n";
  return kExitMismatch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plan FLS deployments and motion encodings"};
  app.require_subcommand(1);

  DisplayOptions opts;
  std::string input;
  std::string second;
  std::string algo = "both";
  std::string variant = "icf";
  std::optional<std::size_t> theta;
  std::optional<std::size_t> omega;
  bool resolve = false;
  bool mesh = false;
  std::size_t density = 0;

  auto* deploy = app.add_subcommand("deploy", "static illumination metrics for one cloud");
  auto* conflicts = app.add_subcommand("conflicts", "intersections and conflicts of a deployment");
  auto* encode = app.add_subcommand("encode", "encode a scene of point clouds");
  auto* verify = app.add_subcommand("verify", "replay an encoding against its scene");

  for (auto* cmd : {deploy, conflicts}) {
    cmd->add_option("cloud", input, "point cloud (.xyz, .ply) or mesh (.off)")->required();
    add_display_options(*cmd, opts);
    cmd->add_option("--algo", algo, "assignment algorithm")
        ->check(CLI::IsMember({"mindist", "quota", "both"}))
        ->capture_default_str();
    cmd->add_flag("--mesh", mesh, "treat a .ply input as a mesh and sample it");
    cmd->add_option("--density", density, "sample meshes up to this many points");
  }
  conflicts->add_flag("--resolve", resolve, "delay launches until no conflicts remain");

  encode->add_option("manifest", input, "scene manifest JSON")->required();
  add_display_options(*encode, opts);
  encode->add_option("--algo", algo, "assignment for the first cloud")
      ->check(CLI::IsMember({"mindist", "quota"}));
  encode->add_option("--variant", variant, "motion variant")
      ->check(CLI::IsMember({"simple", "icf", "icl"}))
      ->capture_default_str();
  encode->add_option("--theta", theta, "cuboid capacity (default unbounded)")->check(CLI::PositiveNumber);
  encode->add_option("--omega", omega, "clouds per group")->check(CLI::PositiveNumber);

  verify->add_option("encoding", input, "encoding JSON")->required();
  verify->add_option("manifest", second, "scene manifest JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*deploy) return run_deploy(input, opts, algo, mesh, density);
    if (*conflicts) return run_conflicts(input, opts, algo, resolve, mesh, density);
    if (*encode) return run_encode(input, opts, algo == "both" ? "mindist" : algo, variant, theta, omega);
    if (*verify) return run_verify(input, second);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
