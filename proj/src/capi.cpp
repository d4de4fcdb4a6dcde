#include "tetzero/tetzero.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <string>

#include "tetzero/error.hpp"
#include "tetzero/pipeline.hpp"

struct tz_config {
  tetzero::RunConfig c;
};
struct tz_model {
  tetzero::Model m;
};
struct tz_mesh {
  tetzero::Mesh m;
};

namespace {

thread_local std::string g_error;

template <class F>
tz_status guarded(F&& f) {
  try {
    f();
    g_error.clear();
    return TZ_OK;
  } catch (const tetzero::Error& e) {
    g_error = e.what();
    return static_cast<tz_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return TZ_INTERNAL;
  } catch (const std::exception& e) {
    g_error = e.what();
    return TZ_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  TZ_REQUIRE(p != nullptr, invalid_argument, what, " is null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  tetzero::detail::raise(tetzero::ErrorCode::invalid_argument, "expected a boolean, got '", v, "'");
}

long long parse_int(const std::string& v, const char* key) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  TZ_REQUIRE(used == v.size() && !v.empty(), invalid_argument, key, " expects an integer, got '", v, "'");
  return x;
}

double parse_double(const std::string& v, const char* key) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  TZ_REQUIRE(used == v.size() && !v.empty(), invalid_argument, key, " expects a number, got '", v, "'");
  return x;
}

}  // namespace

extern "C" {

const char* tz_version(void) { return "0.1.0"; }
const char* tz_last_error(void) { return g_error.c_str(); }

const char* tz_status_name(tz_status s) {
  switch (s) {
    case TZ_OK: return "ok";
    case TZ_INVALID_ARGUMENT: return "invalid_argument";
    case TZ_DOMAIN: return "domain";
    case TZ_SINGULAR: return "singular";
    case TZ_NON_FINITE: return "non_finite";
    case TZ_IO: return "io";
    case TZ_BLOW_UP: return "blow_up";
    case TZ_INTERNAL: return "internal";
  }
  return "unknown";
}

void tz_string_free(char* s) { std::free(s); }

tz_status tz_config_default(tz_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new tz_config{};
  });
}

tz_status tz_config_load(const char* path, tz_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new tz_config{tetzero::RunConfig::load(path)};
  });
}

tz_status tz_config_from_json(const char* text, tz_config** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = new tz_config{tetzero::RunConfig::from_json(text)};
  });
}

tz_status tz_config_set(tz_config* c, const char* key, const char* value) {
  return guarded([&] {
    need(c, "config");
    need(key, "key");
    need(value, "value");
    const std::string k = key, v = value;
    tetzero::RunConfig next = c->c;
    if (k == "preset") {
      next.set_preset(v);
    } else if (k == "shape") {
      next.set_shape(v);
    } else if (k == "precondition") {
      next.precondition = parse_bool(v);
    } else if (k == "seed") {
      const long long s = parse_int(v, key);
      TZ_REQUIRE(s >= 0, invalid_argument, "seed must be >= 0");
      next.seed = uint64_t(s);
    } else if (k == "epochs") {
      next.train.epochs = int(parse_int(v, key));
    } else if (k == "batch") {
      next.train.batch = int(parse_int(v, key));
    } else if (k == "samples") {
      const long long n = parse_int(v, key);
      TZ_REQUIRE(n >= 1, invalid_argument, "samples must be >= 1");
      next.samples.n = std::size_t(n);
    } else if (k == "lambda_eik") {
      next.train.lambda_eik = parse_double(v, key);
    } else if (k == "widths") {
      std::vector<int> w;
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) w.push_back(int(parse_int(item, key)));
      next.widths = w;
    } else if (k == "out_dir") {
      next.out_dir = v;
    } else {
      tetzero::detail::raise(tetzero::ErrorCode::invalid_argument, "unknown config key '", k, "'");
    }
    next.validate();
    c->c = std::move(next);
  });
}

tz_status tz_config_to_json(const tz_config* c, char** out) {
  return guarded([&] {
    need(c, "config");
    need(out, "out");
    *out = dup(c->c.to_json());
  });
}

void tz_config_free(tz_config* c) { delete c; }

tz_status tz_model_create(const tz_config* c, tz_model** out) {
  return guarded([&] {
    need(c, "config");
    need(out, "out");
    *out = new tz_model{tetzero::make_model(c->c)};
  });
}

tz_status tz_model_load(const char* path, tz_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new tz_model{tetzero::read_weights(path)};
  });
}

tz_status tz_model_save(const tz_model* m, const char* path) {
  return guarded([&] {
    need(m, "model");
    need(path, "path");
    tetzero::write_weights(path, m->m);
  });
}

tz_status tz_model_eval(const tz_model* m, const double* xyz, size_t n, double* out) {
  return guarded([&] {
    need(m, "model");
    if (n == 0) return;
    need(xyz, "xyz");
    need(out, "out");
    for (size_t i = 0; i < n; ++i) out[i] = m->m.eval({xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]});
  });
}

tz_status tz_model_train(tz_model* m, const tz_config* c, const char* log_csv, double* losses) {
  return guarded([&] {
    need(m, "model");
    need(c, "config");
    const auto r = tetzero::train_model(m->m, c->c, log_csv ? log_csv : "");
    if (losses) {
      losses[0] = r.final_loss.l1;
      losses[1] = r.final_loss.eik;
      losses[2] = r.final_loss.total;
    }
  });
}

void tz_model_free(tz_model* m) { delete m; }

tz_status tz_extract(const tz_model* m, const tz_config* c, const char* cache_dir, tz_mesh** out,
                     char** report_json) {
  return guarded([&] {
    need(m, "model");
    need(out, "out");
    const tetzero::ExtractConfig ec = c ? c->c.extract : tetzero::ExtractConfig{};
    auto r = tetzero::extract_model(m->m, ec, cache_dir ? cache_dir : "");
    char* rep = report_json ? dup(r.to_json()) : nullptr;
    *out = new tz_mesh{std::move(r.mesh)};
    if (report_json) *report_json = rep;
  });
}

tz_status tz_mc_model(const tz_model* m, int resolution, tz_mesh** out) {
  return guarded([&] {
    need(m, "model");
    need(out, "out");
    *out = new tz_mesh{tetzero::mc_model(m->m, resolution)};
  });
}

tz_status tz_mc_shape(const tz_config* c, int resolution, tz_mesh** out) {
  return guarded([&] {
    need(c, "config");
    need(out, "out");
    *out = new tz_mesh{tetzero::gt_mesh(c->c.shape, resolution, c->c.samples.lo, c->c.samples.hi)};
  });
}

tz_status tz_mesh_load(const char* path, tz_mesh** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new tz_mesh{tetzero::read_mesh(path)};
  });
}

tz_status tz_mesh_save(const tz_mesh* m, const char* path) {
  return guarded([&] {
    need(m, "mesh");
    need(path, "path");
    tetzero::write_mesh(path, m->m);
  });
}

size_t tz_mesh_vertex_count(const tz_mesh* m) { return m ? m->m.vertices.size() : 0; }
size_t tz_mesh_triangle_count(const tz_mesh* m) { return m ? m->m.triangles.size() : 0; }

tz_status tz_mesh_vertices(const tz_mesh* m, double* out) {
  return guarded([&] {
    need(m, "mesh");
    if (m->m.vertices.empty()) return;
    need(out, "out");
    for (size_t i = 0; i < m->m.vertices.size(); ++i)
      for (int k = 0; k < 3; ++k) out[3 * i + k] = m->m.vertices[i][k];
  });
}

tz_status tz_mesh_triangles(const tz_mesh* m, uint32_t* out) {
  return guarded([&] {
    need(m, "mesh");
    if (m->m.triangles.empty()) return;
    need(out, "out");
    for (size_t i = 0; i < m->m.triangles.size(); ++i)
      for (int k = 0; k < 3; ++k) out[3 * i + k] = m->m.triangles[i][k];
  });
}

tz_status tz_mesh_topology(const tz_mesh* m, size_t* counts) {
  return guarded([&] {
    need(m, "mesh");
    need(counts, "counts");
    const auto t = tetzero::check_topology(m->m);
    counts[0] = t.edges;
    counts[1] = t.boundary_edges;
    counts[2] = t.nonmanifold_edges;
    counts[3] = t.misoriented_edges;
  });
}

void tz_mesh_free(tz_mesh* m) { delete m; }

tz_status tz_chamfer(const tz_mesh* a, const tz_mesh* b, size_t samples, uint64_t seed, double* cd) {
  return guarded([&] {
    need(a, "mesh a");
    need(b, "mesh b");
    need(cd, "cd");
    TZ_REQUIRE(samples >= 1, invalid_argument, "samples must be >= 1");
    *cd = tetzero::chamfer(a->m, b->m, samples, seed);
  });
}

tz_status tz_self_consistency(const tz_mesh* mesh, const tz_model* m, size_t samples, uint64_t seed,
                              double* out) {
  return guarded([&] {
    need(mesh, "mesh");
    need(m, "model");
    need(out, "out");
    TZ_REQUIRE(samples >= 1, invalid_argument, "samples must be >= 1");
    const auto s = tetzero::self_consistency(mesh->m, m->m, samples, seed);
    out[0] = s.ssdf;
    out[1] = s.vsdf;
    out[2] = s.ad;
  });
}

tz_status tz_skeleton_report(const tz_config* c, const char* cache_dir, char** csv) {
  return guarded([&] {
    need(c, "config");
    need(csv, "csv");
    const auto st = tetzero::skeleton_stats(c->c.grid, cache_dir ? cache_dir : "");
    *csv = dup(tetzero::SkeletonStats::csv_header() + "\n" + st.csv_row(c->c.preset) + "\n");
  });
}

tz_status tz_precond_report(char** csv) {
  return guarded([&] {
    need(csv, "csv");
    *csv = dup(tetzero::precond_report_csv());
  });
}

}  // extern "C"
