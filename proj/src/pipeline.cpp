#include "tetzero/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tetzero/error.hpp"
#include "tetzero/precond.hpp"
#include "tetzero/skeleton.hpp"

namespace tetzero {

static_assert(std::endian::native == std::endian::little, "weight files assume a little-endian host");

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
Vec3 json_vec(const json& j) {
  TZ_REQUIRE(j.is_array() && j.size() == 3, invalid_argument, "expected a 3-vector, got ", j.dump());
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const char* where) {
  TZ_REQUIRE(j.is_object(), invalid_argument, where, " must be an object");
  for (const auto& [k, v] : j.items()) {
    (void)v;
    const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* n) { return k == n; });
    TZ_REQUIRE(known, invalid_argument, "unknown key '", k, "' in ", where);
  }
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <class T>
void put(std::ostream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  TZ_REQUIRE(f.good(), io, "weight file is truncated");
  return v;
}

void put_floats(std::ostream& f, const std::vector<double>& v) {
  std::vector<float> buf(v.begin(), v.end());
  f.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
}
void get_floats(std::istream& f, std::vector<double>& v) {
  std::vector<float> buf(v.size());
  f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
  TZ_REQUIRE(f.good(), io, "weight file is truncated");
  std::copy(buf.begin(), buf.end(), v.begin());
}

constexpr uint32_t kWeightVersion = 1;

json weights_meta(const Model& m) {
  json j;
  j["format"] = "TSDF";
  j["version"] = kWeightVersion;
  j["levels"] = m.grid().levels();
  j["features"] = m.encoder.features();
  j["log2_table"] = m.encoder.config().log2_table;
  json lv = json::array();
  for (int l = 0; l < m.grid().levels(); ++l) {
    const FeatureTable& t = m.encoder.table(l);
    lv.push_back({{"resolution", t.resolution}, {"rows", t.rows}, {"dense", t.dense}});
  }
  j["grid"] = lv;
  j["widths"] = m.mlp.hidden_widths();
  j["box_lo"] = vec_json(m.box_lo);
  j["box_hi"] = vec_json(m.box_hi);
  j["preconditioned"] = m.preconditioned;
  j["grid_digest"] = grid_digest(m.grid());
  return j;
}

}  // namespace

GridConfig preset_grid(const std::string& name) {
  const std::string n = lower(name);
  GridConfig g;
  g.levels = 4;
  if (n == "small") {
    g.n_min = 2, g.n_max = 32;
  } else if (n == "medium") {
    g.n_min = 4, g.n_max = 64;
  } else if (n == "large") {
    g.n_min = 8, g.n_max = 128;
  } else {
    detail::raise(ErrorCode::invalid_argument, "unknown preset '", name, "' (expected small, medium or large)");
  }
  return g;
}

void RunConfig::set_preset(const std::string& name) {
  grid = preset_grid(name);
  preset = lower(name);
}

void RunConfig::set_shape(const std::string& name) {
  shape = shape_preset(lower(name));
  shape_name = lower(name);
}

void RunConfig::validate() const {
  TZ_REQUIRE(grid.levels >= 1 && grid.n_min >= 1 && grid.n_max >= grid.n_min, invalid_argument,
             "grid needs levels >= 1 and 1 <= n_min <= n_max");
  TZ_REQUIRE(grid.resolutions.empty() || int(grid.resolutions.size()) == grid.levels, invalid_argument,
             "grid.resolutions must have one entry per level");
  TZ_REQUIRE(encoder.features >= 1 && encoder.log2_table >= 1 && encoder.log2_table <= 30, invalid_argument,
             "encoder needs features >= 1 and log2_table in [1, 30]");
  TZ_REQUIRE(!widths.empty(), invalid_argument, "net.widths must not be empty");
  for (int w : widths) TZ_REQUIRE(w >= 1, invalid_argument, "hidden widths must be >= 1");
  TZ_REQUIRE(train.epochs >= 0 && train.batch >= 1, invalid_argument, "train needs epochs >= 0 and batch >= 1");
  TZ_REQUIRE(train.lambda_eik >= 0 && train.lr_features > 0 && train.lr_mlp > 0, invalid_argument,
             "train needs lambda_eik >= 0 and positive learning rates");
  TZ_REQUIRE(samples.n >= 1 && samples.p_near >= 0 && samples.p_near <= 1 && samples.sigma >= 0, invalid_argument,
             "samples need n >= 1, p_near in [0, 1], sigma >= 0");
  for (int k = 0; k < 3; ++k)
    TZ_REQUIRE(samples.hi[k] > samples.lo[k], invalid_argument, "scene box is empty along axis ", k);
  TZ_REQUIRE(extract.eps_s > 0 && extract.eps_b > 0 && extract.eps_f > 0, invalid_argument, "all eps must be > 0");
}

std::string RunConfig::to_json() const {
  json j;
  j["preset"] = preset;
  json g{{"levels", grid.levels}, {"n_min", grid.n_min}, {"n_max", grid.n_max}};
  if (!grid.resolutions.empty()) g["resolutions"] = grid.resolutions;
  j["grid"] = g;
  j["encoder"] = {{"features", encoder.features}, {"log2_table", encoder.log2_table}};
  j["net"] = {{"widths", widths}};
  j["train"] = {{"epochs", train.epochs},       {"batch", train.batch},   {"lr_features", train.lr_features},
                {"lr_mlp", train.lr_mlp},       {"lambda_eik", train.lambda_eik}};
  j["samples"] = {{"n", samples.n},
                  {"p_near", samples.p_near},
                  {"sigma", samples.sigma},
                  {"box_lo", vec_json(samples.lo)},
                  {"box_hi", vec_json(samples.hi)}};
  j["shape"] = {{"name", shape_name}, {"spec", json::parse(shape_to_json(shape))}};
  j["precondition"] = precondition;
  j["eps"] = {{"s", extract.eps_s}, {"b", extract.eps_b}, {"f", extract.eps_f}};
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  RunConfig c;
  try {
    const json j = json::parse(text);
    only_keys(j, {"preset", "grid", "encoder", "net", "train", "samples", "shape", "precondition", "eps", "seed",
                  "out_dir"},
              "config");
    if (j.contains("preset") && lower(j["preset"].get<std::string>()) != "custom")
      c.set_preset(j["preset"].get<std::string>());
    if (j.contains("grid")) {
      const json& g = j["grid"];
      only_keys(g, {"levels", "n_min", "n_max", "resolutions"}, "grid");
      GridConfig gc = c.grid;
      take(g, "levels", gc.levels);
      take(g, "n_min", gc.n_min);
      take(g, "n_max", gc.n_max);
      take(g, "resolutions", gc.resolutions);
      if (!gc.resolutions.empty() && !g.contains("levels")) {
        gc.levels = int(gc.resolutions.size());
        gc.n_min = gc.resolutions.front();
        gc.n_max = gc.resolutions.back();
      }
      if (gc.levels != c.grid.levels || gc.n_min != c.grid.n_min || gc.n_max != c.grid.n_max ||
          !gc.resolutions.empty())
        c.preset = "custom";
      c.grid = gc;
    }
    if (j.contains("encoder")) {
      only_keys(j["encoder"], {"features", "log2_table"}, "encoder");
      take(j["encoder"], "features", c.encoder.features);
      take(j["encoder"], "log2_table", c.encoder.log2_table);
    }
    if (j.contains("net")) {
      only_keys(j["net"], {"widths"}, "net");
      take(j["net"], "widths", c.widths);
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      only_keys(t, {"epochs", "batch", "lr_features", "lr_mlp", "lambda_eik"}, "train");
      take(t, "epochs", c.train.epochs);
      take(t, "batch", c.train.batch);
      take(t, "lr_features", c.train.lr_features);
      take(t, "lr_mlp", c.train.lr_mlp);
      take(t, "lambda_eik", c.train.lambda_eik);
    }
    if (j.contains("samples")) {
      const json& s = j["samples"];
      only_keys(s, {"n", "p_near", "sigma", "box_lo", "box_hi"}, "samples");
      take(s, "n", c.samples.n);
      take(s, "p_near", c.samples.p_near);
      take(s, "sigma", c.samples.sigma);
      if (s.contains("box_lo")) c.samples.lo = json_vec(s["box_lo"]);
      if (s.contains("box_hi")) c.samples.hi = json_vec(s["box_hi"]);
    }
    if (j.contains("shape")) {
      const json& s = j["shape"];
      if (s.is_string()) {
        c.set_shape(s.get<std::string>());
      } else {
        only_keys(s, {"name", "spec"}, "shape");
        if (s.contains("spec")) {
          c.shape = shape_from_json(s["spec"].dump());
          c.shape_name = s.value("name", std::string("custom"));
        } else {
          c.set_shape(s.at("name").get<std::string>());
        }
      }
    }
    take(j, "precondition", c.precondition);
    if (j.contains("eps")) {
      only_keys(j["eps"], {"s", "b", "f"}, "eps");
      take(j["eps"], "s", c.extract.eps_s);
      take(j["eps"], "b", c.extract.eps_b);
      take(j["eps"], "f", c.extract.eps_f);
    }
    take(j, "seed", c.seed);
    take(j, "out_dir", c.out_dir);
  } catch (const json::exception& e) {
    detail::raise(ErrorCode::invalid_argument, "config: ", e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  TZ_REQUIRE(f.good(), io, "cannot read config ", path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

Model make_model(const RunConfig& cfg) {
  cfg.validate();
  const Grid grid(cfg.grid);
  Encoder enc(grid, cfg.encoder);
  std::mt19937_64 rng(cfg.seed);
  enc.init_uniform(rng);
  Mlp mlp(enc.output_dim(), cfg.widths);
  mlp.init_uniform(rng);
  Model m(enc, mlp);
  m.box_lo = cfg.samples.lo;
  m.box_hi = cfg.samples.hi;
  m.preconditioned = cfg.precondition;
  if (cfg.precondition) {
    const Mat3 a = solve_preconditioner(symmetrize(cube_average_metric())).A;
    m.input = make_input_map(m.box_lo, m.box_hi, &a);
  } else {
    m.input = make_input_map(m.box_lo, m.box_hi, nullptr);
  }
  return m;
}

void write_weights(const std::string& path, const Model& m) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    TZ_REQUIRE(f.good(), io, "cannot write ", path);
    f.write("TSDF", 4);
    put(f, kWeightVersion);
    put(f, uint32_t(m.grid().levels()));
    put(f, uint32_t(m.encoder.features()));
    put(f, uint32_t(m.encoder.config().log2_table));
    for (int l = 0; l < m.grid().levels(); ++l) {
      const FeatureTable& t = m.encoder.table(l);
      put(f, uint32_t(t.resolution));
      put(f, uint32_t(t.rows));
      put(f, uint8_t(t.dense));
    }
    for (int l = 0; l < m.grid().levels(); ++l) put_floats(f, m.encoder.table(l).data);
    const auto& layers = m.mlp.layers();
    put(f, uint32_t(layers.size()));
    for (const DenseLayer& L : layers) {
      put(f, uint32_t(L.in));
      put(f, uint32_t(L.out));
      put_floats(f, L.W);
      put_floats(f, L.b);
    }
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) put(f, m.input.M(r, c));
    for (int k = 0; k < 3; ++k) put(f, m.input.t[k]);
    for (int k = 0; k < 3; ++k) put(f, m.box_lo[k]);
    for (int k = 0; k < 3; ++k) put(f, m.box_hi[k]);
    put(f, uint8_t(m.preconditioned));
    TZ_REQUIRE(f.good(), io, "write failed for ", path);
  }
  std::filesystem::rename(tmp, path);
  std::ofstream side(path + ".json");
  TZ_REQUIRE(side.good(), io, "cannot write ", path, ".json");
  side << weights_meta(m).dump(2) << "\n";
}

Model read_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  TZ_REQUIRE(f.good(), io, "cannot read weights ", path);
  char magic[4] = {};
  f.read(magic, 4);
  TZ_REQUIRE(f.good() && std::memcmp(magic, "TSDF", 4) == 0, io, path, " is not a weight file");
  const auto version = get<uint32_t>(f);
  TZ_REQUIRE(version == kWeightVersion, io, "unsupported weight file version ", version);
  const auto L = get<uint32_t>(f), d = get<uint32_t>(f), log2 = get<uint32_t>(f);
  TZ_REQUIRE(L >= 1 && L <= 64 && d >= 1 && d <= 1024 && log2 >= 1 && log2 <= 30, io, "corrupt weight header");
  std::vector<int> res(L);
  std::vector<uint32_t> rows(L);
  std::vector<bool> dense(L);
  for (uint32_t l = 0; l < L; ++l) {
    res[l] = int(get<uint32_t>(f));
    rows[l] = get<uint32_t>(f);
    dense[l] = get<uint8_t>(f) != 0;
    TZ_REQUIRE(res[l] >= 1 && res[l] <= 4096, io, "corrupt level resolution");
  }
  Encoder enc(Grid(GridConfig::explicit_levels(res)), {int(d), int(log2)});
  for (uint32_t l = 0; l < L; ++l) {
    FeatureTable& t = enc.table(int(l));
    TZ_REQUIRE(t.rows == rows[l] && t.dense == dense[l], io, "level ", l, " table layout does not match header");
    get_floats(f, t.data);
  }
  const auto nl = get<uint32_t>(f);
  TZ_REQUIRE(nl >= 2 && nl <= 1024, io, "corrupt layer count");
  std::vector<int> widths;
  std::vector<DenseLayer> layers(nl);
  for (uint32_t k = 0; k < nl; ++k) {
    DenseLayer& D = layers[k];
    D.in = int(get<uint32_t>(f));
    D.out = int(get<uint32_t>(f));
    TZ_REQUIRE(D.in >= 1 && D.out >= 1 && D.in <= 65536 && D.out <= 65536, io, "corrupt layer shape");
    D.W.resize(std::size_t(D.in) * D.out);
    D.b.resize(D.out);
    get_floats(f, D.W);
    get_floats(f, D.b);
    if (k + 1 < nl) widths.push_back(D.out);
  }
  Mlp mlp(enc.output_dim(), widths);
  TZ_REQUIRE(layers.front().in == enc.output_dim() && layers.back().out == 1, io, "MLP shape does not match encoder");
  for (uint32_t k = 0; k < nl; ++k) {
    TZ_REQUIRE(mlp.layers()[k].in == layers[k].in, io, "MLP layer chain is inconsistent");
    mlp.layers()[k] = std::move(layers[k]);
  }
  Model m(enc, mlp);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m.input.M(r, c) = get<double>(f);
  for (int k = 0; k < 3; ++k) m.input.t[k] = get<double>(f);
  for (int k = 0; k < 3; ++k) m.box_lo[k] = get<double>(f);
  for (int k = 0; k < 3; ++k) m.box_hi[k] = get<double>(f);
  m.preconditioned = get<uint8_t>(f) != 0;
  f.peek();
  TZ_REQUIRE(f.eof(), io, "trailing bytes in weight file ", path);
  return m;
}

TrainOutcome train_model(Model& m, const RunConfig& cfg, const std::string& log_csv) {
  cfg.validate();
  const auto t0 = Clock::now();
  SampleConfig sc = cfg.samples;
  sc.seed = cfg.seed;
  const SampleSet data = sample_training(cfg.shape, sc);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  TrainOutcome out;
  out.epochs = train(m, data, tc);
  out.seconds = since(t0);
  if (!out.epochs.empty()) {
    const EpochStats& e = out.epochs.back();
    out.final_loss = {e.l1, e.eik, e.total};
  } else {
    out.final_loss = evaluate_loss(m, data, tc.lambda_eik);
  }
  if (!log_csv.empty()) {
    std::ofstream f(log_csv);
    TZ_REQUIRE(f.good(), io, "cannot write ", log_csv);
    f.precision(10);
    f << "epoch,l1,eikonal,total\n";
    for (const EpochStats& e : out.epochs) f << e.epoch << ',' << e.l1 << ',' << e.eik << ',' << e.total << '\n';
  }
  return out;
}

std::string ExtractOutcome::to_json() const {
  json j = json::parse(report.to_json());
  j["mesh_vertices"] = mesh.vertices.size();
  j["mesh_triangles"] = mesh.triangles.size();
  j["topology"] = {{"edges", topology.edges},
                   {"boundary_edges", topology.boundary_edges},
                   {"nonmanifold_edges", topology.nonmanifold_edges},
                   {"misoriented_edges", topology.misoriented_edges},
                   {"closed_manifold", topology.closed_manifold()}};
  j["skeleton_cache_hit"] = cache_hit;
  j["seconds_skeleton"] = seconds_skeleton;
  return j.dump(2);
}

ExtractOutcome extract_model(const Model& m, const ExtractConfig& cfg, const std::string& cache_dir) {
  ExtractOutcome out;
  auto t0 = Clock::now();
  Skeleton sk;
  if (cache_dir.empty()) {
    sk = extract_skeleton(m.grid());
  } else {
    std::filesystem::create_directories(cache_dir);
    sk = cached_skeleton(m.grid(), cache_dir, &out.cache_hit);
  }
  out.seconds_skeleton = since(t0);
  out.mesh = extract_mesh(m, sk, cfg, &out.report);
  out.topology = check_topology(out.mesh);
  return out;
}

Mesh mc_model(const Model& m, int resolution) {
  const McGrid g{resolution, m.box_lo, m.box_hi};
  const double lip = estimate_lipschitz(m, g);
  return marching_cubes_banded([&](const Vec3& x) { return m.eval(x); }, g, lip);
}

std::string SkeletonStats::csv_header() { return "setting,levels,n_min,n_max,vertices,edges,seconds,peak_mb,cache_hit"; }

std::string SkeletonStats::csv_row(const std::string& name) const {
  std::ostringstream os;
  os.precision(6);
  os << name << ',' << resolutions.size() << ',' << resolutions.front() << ',' << resolutions.back() << ',' << vertices
     << ',' << edges << ',' << seconds << ',' << peak_mb << ',' << (cache_hit ? 1 : 0);
  return os.str();
}

SkeletonStats skeleton_stats(const GridConfig& g, const std::string& cache_dir) {
  const Grid grid(g);
  SkeletonStats st;
  st.resolutions = grid.resolutions();
  const auto t0 = Clock::now();
  Skeleton sk;
  if (cache_dir.empty()) {
    sk = extract_skeleton(grid);
  } else {
    std::filesystem::create_directories(cache_dir);
    sk = cached_skeleton(grid, cache_dir, &st.cache_hit);
  }
  st.seconds = since(t0);
  st.vertices = sk.vertices.size();
  st.edges = sk.edges.size();
  const double bytes = double(sk.vertices.size()) * (sizeof(Vec3) + sizeof(sk.incidence[0])) +
                       double(sk.edges.size()) * sizeof(sk.edges[0]);
  st.peak_mb = bytes / (1024.0 * 1024.0);
  return st;
}

std::string precond_report_csv() {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << "case,kappa_before,kappa_after\n";
  for (const ConditionRow& r : condition_table()) os << r.name << ',' << r.before << ',' << r.after << '\n';
  return os.str();
}

}  // namespace tetzero
