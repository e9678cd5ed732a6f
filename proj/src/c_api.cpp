#include "qtube/qtube.h"

#include "qtube/broken_line.hpp"
#include "qtube/cross_section.hpp"
#include "qtube/error.hpp"
#include "qtube/study.hpp"

#include <algorithm>
#include <cstring>
#include <new>
#include <string>

struct qtube_config {
  qtube::StudyConfig cfg;
};

struct qtube_section {
  qtube::CrossSectionMesh mesh;
  qtube::SpectralResult spectrum;
};

struct qtube_potential {
  qtube::StepPotential v;
};

namespace {

thread_local std::string g_last_error;

qtube_status status_of(qtube::ErrorCode code) {
  using qtube::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidInput: return QTUBE_E_INVALID_INPUT;
    case ErrorCode::DegenerateSpectrum: return QTUBE_E_DEGENERATE_SPECTRUM;
    case ErrorCode::Numerical: return QTUBE_E_NUMERICAL;
    case ErrorCode::ContractViolation: return QTUBE_E_CONTRACT;
    case ErrorCode::Resolution: return QTUBE_E_RESOLUTION;
    case ErrorCode::MustProject: return QTUBE_E_MUST_PROJECT;
    case ErrorCode::Inconclusive: return QTUBE_E_INCONCLUSIVE;
    case ErrorCode::DegenerateFreeLine: return QTUBE_E_FREE_LINE;
    case ErrorCode::Io: return QTUBE_E_IO;
  }
  return QTUBE_E_INTERNAL;
}

template <class F>
qtube_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return QTUBE_OK;
  } catch (const qtube::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return QTUBE_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return QTUBE_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return QTUBE_E_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) qtube::fail(qtube::ErrorCode::InvalidInput, std::string(what) + " is NULL");
}

void copy_out(const std::string& s, char* buf, std::size_t cap) {
  if (!buf || cap == 0) return;
  const std::size_t n = std::min(s.size(), cap - 1);
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
}

}  // namespace

extern "C" {

const char* qtube_version(void) { return qtube::version_string(); }

const char* qtube_last_error(void) { return g_last_error.c_str(); }

int qtube_exit_code(qtube_status status) {
  switch (status) {
    case QTUBE_OK: return 0;
    case QTUBE_E_NUMERICAL:
    case QTUBE_E_RESOLUTION:
    case QTUBE_E_INCONCLUSIVE:
    case QTUBE_E_INTERNAL: return 2;
    default: return 1;
  }
}

qtube_status qtube_config_from_text(const char* text, qtube_config** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = new qtube_config{qtube::StudyConfig::parse(text)};
  });
}

qtube_status qtube_config_from_file(const char* path, qtube_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new qtube_config{qtube::StudyConfig::from_file(path)};
  });
}

qtube_status qtube_config_from_preset(const char* name, qtube_config** out) {
  return guarded([&] {
    need(name, "name");
    need(out, "out");
    *out = new qtube_config{qtube::StudyConfig::preset(name)};
  });
}

qtube_status qtube_config_set(qtube_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "config");
    need(key, "key");
    need(value, "value");
    cfg->cfg.set(key, value);
  });
}

qtube_status qtube_config_canonical(const qtube_config* cfg, char* buf, size_t cap,
                                    size_t* length) {
  return guarded([&] {
    need(cfg, "config");
    const std::string s = cfg->cfg.canonical();
    copy_out(s, buf, cap);
    if (length) *length = s.size();
  });
}

qtube_status qtube_config_hash(const qtube_config* cfg, uint64_t* hash) {
  return guarded([&] {
    need(cfg, "config");
    need(hash, "hash");
    *hash = cfg->cfg.hash();
  });
}

void qtube_config_free(qtube_config* cfg) { delete cfg; }

size_t qtube_preset_count(void) { return qtube::StudyConfig::preset_names().size(); }

const char* qtube_preset_name(size_t index) {
  static const std::vector<std::string> names = qtube::StudyConfig::preset_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

qtube_status qtube_run(const char* command, const qtube_config* cfg, const char* out_dir,
                       char* summary, size_t cap) {
  return guarded([&] {
    need(cfg, "config");
    need(out_dir, "out_dir");
    const auto outcome = qtube::run_study(command ? command : "", cfg->cfg, out_dir);
    copy_out(outcome.summary, summary, cap);
  });
}

qtube_status qtube_section_build(const char* shape, double h, int modes, qtube_section** out) {
  return guarded([&] {
    need(shape, "shape");
    need(out, "out");
    qtube::require(modes >= 1, "modes must be positive");
    auto mesh = qtube::CrossSectionMesh::build(qtube::ShapeSpec::parse(shape), h);
    auto spec = qtube::dirichlet_eigenpairs(mesh, modes);
    *out = new qtube_section{std::move(mesh), std::move(spec)};
  });
}

qtube_status qtube_section_size(const qtube_section* s, size_t* nodes) {
  return guarded([&] {
    need(s, "section");
    need(nodes, "nodes");
    *nodes = s->mesh.size();
  });
}

namespace {
const qtube::EigenPair& pair_of(const qtube_section* s, int k) {
  need(s, "section");
  qtube::require(k >= 0 && k < static_cast<int>(s->spectrum.pairs.size()), "mode index out of range");
  return s->spectrum.pairs[static_cast<std::size_t>(k)];
}
}  // namespace

qtube_status qtube_section_eigenvalue(const qtube_section* s, int k, double* lambda) {
  return guarded([&] {
    need(lambda, "lambda");
    *lambda = pair_of(s, k).lam;
  });
}

qtube_status qtube_section_twist_coefficient(const qtube_section* s, int k, double* c_n) {
  return guarded([&] {
    need(c_n, "c_n");
    *c_n = qtube::twist_coefficient(s->mesh, pair_of(s, k));
  });
}

qtube_status qtube_section_is_simple(const qtube_section* s, int k, int* simple) {
  return guarded([&] {
    need(simple, "simple");
    pair_of(s, k);
    *simple = s->spectrum.is_simple(k) ? 1 : 0;
  });
}

void qtube_section_free(qtube_section* s) { delete s; }

qtube_status qtube_potential_from_cells(const double* values, size_t cells, double s0, double h,
                                        qtube_potential** out) {
  return guarded([&] {
    need(values, "values");
    need(out, "out");
    qtube::require(cells > 0 && h > 0.0, "need cells > 0 and h > 0");
    qtube::StepPotential v;
    v.s0 = s0;
    v.h = h;
    v.values.assign(values, values + cells);
    *out = new qtube_potential{std::move(v)};
  });
}

qtube_status qtube_potential_square_well(double depth, double halfwidth, int cells,
                                         qtube_potential** out) {
  return guarded([&] {
    need(out, "out");
    *out = new qtube_potential{qtube::StepPotential::square_well(depth, halfwidth, cells)};
  });
}

qtube_status qtube_potential_scale(const qtube_potential* base, double delta,
                                   qtube_potential** out) {
  return guarded([&] {
    need(base, "potential");
    need(out, "out");
    *out = new qtube_potential{qtube::scale_potential(base->v, delta).values};
  });
}

qtube_status qtube_resonance(const qtube_potential* v, int* resonant, double* exit_slope) {
  return guarded([&] {
    need(v, "potential");
    const auto st = qtube::detect_resonance(v->v);
    if (resonant) *resonant = st.resonant ? 1 : 0;
    if (exit_slope) *exit_slope = st.exit_slope;
  });
}

qtube_status qtube_limit_operator(const qtube_potential* v, qtube_vertex_kind* kind, double* c1,
                                  double* c2) {
  return guarded([&] {
    need(v, "potential");
    const auto vc = qtube::limit_operator(v->v, qtube::detect_resonance(v->v));
    const bool coupled = vc.kind == qtube::VertexCondition::Kind::ScaledCoupling;
    if (kind)
      *kind = coupled ? QTUBE_VERTEX_SCALED_COUPLING
              : vc.kind == qtube::VertexCondition::Kind::Free ? QTUBE_VERTEX_FREE
                                                              : QTUBE_VERTEX_DIRICHLET;
    if (c1) *c1 = coupled ? vc.c1 : 0.0;
    if (c2) *c2 = coupled ? vc.c2 : 0.0;
  });
}

qtube_status qtube_scattering(const qtube_potential* v, double k, double r[2], double t[2]) {
  return guarded([&] {
    need(v, "potential");
    need(r, "r");
    need(t, "t");
    const auto s = qtube::scattering_1d(v->v, k);
    r[0] = s.r.real();
    r[1] = s.r.imag();
    t[0] = s.t.real();
    t[1] = s.t.imag();
  });
}

void qtube_potential_free(qtube_potential* v) { delete v; }

}  // extern "C"
