// Command-line front end. Talks to the library only through tetzero.h.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tetzero/tetzero.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct Failure {
  int code;
  std::string message;
};

void check(tz_status s, const std::string& what, bool usage_on_invalid = false) {
  if (s == TZ_OK) return;
  const int code = (usage_on_invalid && s == TZ_INVALID_ARGUMENT) ? kUsage : kRuntime;
  throw Failure{code, what + ": " + tz_last_error()};
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw Failure{kUsage, std::string(what) + " not found: " + path};
}

std::string take_string(char* s) {
  std::string out = s ? s : "";
  tz_string_free(s);
  return out;
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};
using Config = Handle<tz_config, tz_config_free>;
using Model = Handle<tz_model, tz_model_free>;
using MeshH = Handle<tz_mesh, tz_mesh_free>;

// Options shared by commands that build a run configuration.
struct ConfigFlags {
  std::string config, preset, shape, out;
  std::optional<long long> seed, epochs, samples;
  bool no_precond = false;

  void add(CLI::App* app, bool training) {
    app->add_option("--config", config, "run configuration JSON");
    app->add_option("--preset", preset, "grid preset: small, medium or large");
    app->add_option("--out", out, "output directory");
    if (!training) return;
    app->add_option("--shape", shape, "shape preset: sphere, box, torus or csg");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--samples", samples, "training samples");
    app->add_flag("--no-precond", no_precond, "disable the input preconditioner");
  }

  void build(Config& c) const {
    if (!config.empty()) {
      require_file(config, "config");
      check(tz_config_load(config.c_str(), c.out()), "config", true);
    } else {
      check(tz_config_default(c.out()), "config");
    }
    auto set = [&](const char* k, const std::string& v) { check(tz_config_set(c.get(), k, v.c_str()), k, true); };
    if (!preset.empty()) set("preset", preset);
    if (!shape.empty()) set("shape", shape);
    if (!out.empty()) set("out_dir", out);
    if (seed) set("seed", std::to_string(*seed));
    if (epochs) set("epochs", std::to_string(*epochs));
    if (samples) set("samples", std::to_string(*samples));
    if (no_precond) set("precondition", "false");
  }
};

std::string out_dir_of(const Config& c) {
  char* js = nullptr;
  check(tz_config_to_json(c.get(), &js), "config");
  return json::parse(take_string(js)).at("out_dir").get<std::string>();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw Failure{kRuntime, "cannot write " + p.string()};
  f << text;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool is_weight_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  char magic[4] = {};
  f.read(magic, 4);
  return f.gcount() == 4 && std::memcmp(magic, "TSDF", 4) == 0;
}

int cmd_train(const ConfigFlags& flags) {
  Config c;
  flags.build(c);
  const fs::path dir = out_dir_of(c);
  fs::create_directories(dir);
  char* js = nullptr;
  check(tz_config_to_json(c.get(), &js), "config");
  write_text(dir / "config.json", take_string(js) + "\n");
  Model m;
  check(tz_model_create(c.get(), m.out()), "model");
  double loss[3];
  const auto t0 = std::chrono::steady_clock::now();
  check(tz_model_train(m.get(), c.get(), (dir / "train_log.csv").string().c_str(), loss), "train");
  const fs::path w = dir / "weights.tsdf";
  check(tz_model_save(m.get(), w.string().c_str()), "save");
  std::printf("final l1=%.6g eikonal=%.6g total=%.6g (%.1f s)\nweights: %s\n", loss[0], loss[1], loss[2],
              seconds_since(t0), w.string().c_str());
  return 0;
}

int cmd_extract(const ConfigFlags& flags, std::string weights, std::string cache, bool no_cache) {
  Config c;
  flags.build(c);
  const fs::path dir = out_dir_of(c);
  if (weights.empty()) weights = (dir / "weights.tsdf").string();
  require_file(weights, "weights");
  if (cache.empty()) cache = (dir / "cache").string();
  fs::create_directories(dir);
  Model m;
  check(tz_model_load(weights.c_str(), m.out()), "weights");
  MeshH mesh;
  char* report = nullptr;
  check(tz_extract(m.get(), c.get(), no_cache ? nullptr : cache.c_str(), mesh.out(), &report), "extract");
  const std::string rep = take_string(report);
  check(tz_mesh_save(mesh.get(), (dir / "mesh.obj").string().c_str()), "write obj");
  check(tz_mesh_save(mesh.get(), (dir / "mesh.ply").string().c_str()), "write ply");
  write_text(dir / "extract.json", rep + "\n");
  const json j = json::parse(rep);
  std::printf("vertices=%zu triangles=%zu closed=%s skeleton=%.2fs subdivide=%.2fs faces=%.2fs cache=%s\n",
              tz_mesh_vertex_count(mesh.get()), tz_mesh_triangle_count(mesh.get()),
              j["topology"]["closed_manifold"].get<bool>() ? "yes" : "no", j["seconds_skeleton"].get<double>(),
              j["seconds"]["subdivide"].get<double>(), j["seconds"]["faces"].get<double>(),
              j["skeleton_cache_hit"].get<bool>() ? "hit" : "miss");
  std::printf("mesh: %s\n", (dir / "mesh.obj").string().c_str());
  return 0;
}

int cmd_mc(const ConfigFlags& flags, const std::string& weights, int resolution, std::string output) {
  if (resolution < 2) throw Failure{kUsage, "--resolution must be >= 2"};
  Config c;
  flags.build(c);
  const auto t0 = std::chrono::steady_clock::now();
  MeshH mesh;
  if (!weights.empty()) {
    require_file(weights, "weights");
    Model m;
    check(tz_model_load(weights.c_str(), m.out()), "weights");
    check(tz_mc_model(m.get(), resolution, mesh.out()), "marching cubes");
  } else {
    check(tz_mc_shape(c.get(), resolution, mesh.out()), "marching cubes", true);
  }
  if (output.empty()) output = (fs::path(out_dir_of(c)) / ("mc" + std::to_string(resolution) + ".obj")).string();
  if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());
  check(tz_mesh_save(mesh.get(), output.c_str()), "write mesh");
  std::printf("vertices=%zu triangles=%zu seconds=%.2f\nmesh: %s\n", tz_mesh_vertex_count(mesh.get()),
              tz_mesh_triangle_count(mesh.get()), seconds_since(t0), output.c_str());
  return 0;
}

int cmd_eval(const std::string& mesh_path, const std::string& other, std::size_t samples, long long seed,
             std::string name, const std::string& csv, const std::string& json_path) {
  require_file(mesh_path, "mesh");
  require_file(other, "reference");
  if (samples < 1) throw Failure{kUsage, "--samples must be >= 1"};
  if (name.empty()) name = fs::path(mesh_path).stem().string();
  const auto t0 = std::chrono::steady_clock::now();
  MeshH mesh;
  check(tz_mesh_load(mesh_path.c_str(), mesh.out()), "mesh");
  json j;
  j["name"] = name;
  std::string cd_s, ssdf_s, vsdf_s, ad_s;
  auto fmt = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  if (is_weight_file(other)) {
    Model m;
    check(tz_model_load(other.c_str(), m.out()), "weights");
    double s[3];
    check(tz_self_consistency(mesh.get(), m.get(), samples, uint64_t(seed), s), "self-consistency");
    j["ssdf"] = s[0];
    j["vsdf"] = s[1];
    j["ad_deg"] = s[2];
    ssdf_s = fmt(s[0]), vsdf_s = fmt(s[1]), ad_s = fmt(s[2]);
  } else {
    MeshH ref;
    check(tz_mesh_load(other.c_str(), ref.out()), "reference mesh");
    double cd = 0;
    check(tz_chamfer(mesh.get(), ref.get(), samples, uint64_t(seed), &cd), "chamfer");
    j["cd"] = cd;
    j["cd_x1e6"] = cd * 1e6;
    cd_s = fmt(cd * 1e6);
  }
  j["vertices"] = tz_mesh_vertex_count(mesh.get());
  j["triangles"] = tz_mesh_triangle_count(mesh.get());
  j["seconds"] = seconds_since(t0);
  const std::string header = "name,cd_x1e6,ssdf,vsdf,ad_deg,vertices,triangles,seconds";
  const std::string row = name + "," + cd_s + "," + ssdf_s + "," + vsdf_s + "," + ad_s + "," +
                          std::to_string(tz_mesh_vertex_count(mesh.get())) + "," +
                          std::to_string(tz_mesh_triangle_count(mesh.get())) + "," + fmt(j["seconds"].get<double>());
  std::printf("%s\n%s\n%s\n", header.c_str(), row.c_str(), j.dump(2).c_str());
  if (!csv.empty()) {
    const bool fresh = !fs::exists(csv) || fs::file_size(csv) == 0;
    std::ofstream f(csv, std::ios::app);
    if (!f) throw Failure{kRuntime, "cannot write " + csv};
    if (fresh) f << header << "\n";
    f << row << "\n";
  }
  if (!json_path.empty()) write_text(json_path, j.dump(2) + "\n");
  return 0;
}

int cmd_skeleton(const ConfigFlags& flags, std::string cache, bool no_cache) {
  Config c;
  flags.build(c);
  if (cache.empty()) cache = (fs::path(out_dir_of(c)) / "cache").string();
  char* csv = nullptr;
  check(tz_skeleton_report(c.get(), no_cache ? nullptr : cache.c_str(), &csv), "skeleton");
  std::fputs(take_string(csv).c_str(), stdout);
  return 0;
}

int cmd_precond_report() {
  char* csv = nullptr;
  check(tz_precond_report(&csv), "precond-report");
  std::fputs(take_string(csv).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact zero-level-set meshes from tetrahedral-grid SDF networks"};
  app.footer("Environment: TETZERO_THREADS sets the worker thread count.");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tz_version()));

  ConfigFlags train_flags, extract_flags, mc_flags, skel_flags;
  std::string weights, cache, output, mc_weights;
  bool no_cache = false;
  int resolution = 256;

  auto* train = app.add_subcommand("train", "sample the shape, train, write weights and a loss log");
  train_flags.add(train, true);

  auto* extract = app.add_subcommand("extract", "exact mesh of the zero set (OBJ, PLY, JSON report)");
  extract_flags.add(extract, false);
  extract->add_option("--weights", weights, "weight file (default <out>/weights.tsdf)");
  extract->add_option("--cache", cache, "skeleton cache directory (default <out>/cache)");
  extract->add_flag("--no-cache", no_cache, "always rebuild the skeleton");

  auto* mc = app.add_subcommand("mc", "Marching Cubes of a network or of the analytic shape");
  mc_flags.add(mc, true);
  mc->add_option("--weights", mc_weights, "network weights; without it the configured shape is used");
  mc->add_option("--resolution", resolution, "cells per axis")->capture_default_str();
  mc->add_option("-o,--output", output, "mesh file (.obj or .ply)");

  std::string mesh_a, mesh_b, eval_name, eval_csv, eval_json;
  std::size_t eval_samples = 100000;
  long long eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Chamfer distance (mesh vs mesh) or self-consistency (mesh vs weights)");
  eval->add_option("mesh", mesh_a, "mesh to evaluate")->required();
  eval->add_option("reference", mesh_b, "reference mesh or weight file")->required();
  eval->add_option("--samples", eval_samples, "surface samples")->capture_default_str();
  eval->add_option("--seed", eval_seed, "sampling seed")->capture_default_str();
  eval->add_option("--name", eval_name, "row name (default: mesh file stem)");
  eval->add_option("--csv", eval_csv, "append the CSV row to this file");
  eval->add_option("--json", eval_json, "write the JSON report here");

  std::string skel_cache;
  bool skel_no_cache = false;
  auto* skel = app.add_subcommand("skeleton", "initial skeleton size and timing (CSV)");
  skel_flags.add(skel, false);
  skel->add_option("--cache", skel_cache, "skeleton cache directory (default <out>/cache)");
  skel->add_flag("--no-cache", skel_no_cache, "do not read or write the cache");

  auto* pre = app.add_subcommand("precond-report", "condition numbers before and after the preconditioner (CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*train) return cmd_train(train_flags);
    if (*extract) return cmd_extract(extract_flags, weights, cache, no_cache);
    if (*mc) return cmd_mc(mc_flags, mc_weights, resolution, output);
    if (*eval) return cmd_eval(mesh_a, mesh_b, eval_samples, eval_seed, eval_name, eval_csv, eval_json);
    if (*skel) return cmd_skeleton(skel_flags, skel_cache, skel_no_cache);
    if (*pre) return cmd_precond_report();
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
