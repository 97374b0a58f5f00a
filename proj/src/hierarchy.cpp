#include "pyrafove/hierarchy.hpp"

#include <algorithm>
#include <cmath>

#include "pyrafove/errors.hpp"
#include "pyrafove/rng.hpp"

namespace pyrafove {

std::string to_string(PoolFunction p) { return p == PoolFunction::Max ? "max" : "mean"; }

PoolFunction pool_function_from_string(const std::string& s) {
  if (s == "max") return PoolFunction::Max;
  if (s == "mean") return PoolFunction::Mean;
  throw ConfigError("unknown pool function '" + s + "' (expected max or mean)");
}

StageArray stage_one(const IPFragment& f) {
  StageArray a;
  a.data = f.data;
  a.stage = 1;
  a.two_d = f.two_d;
  a.spacing_arcsec = f.band_radii_arcsec;
  return a;
}

std::optional<StageArray> c_pool(const StageArray& arr, const StageSpec& spec) {
  const LatticeTensor& in = arr.data;
  if (in.width < 2) return std::nullopt;
  const bool pool_s = spec.scale_pool && in.n_s > 1;
  const bool pool_y = in.height > 1;
  const int ns = pool_s ? (in.n_s + 1) / 2 : in.n_s;
  const int w = (in.width + 1) / 2;
  const int h = pool_y ? (in.height + 1) / 2 : 1;

  StageArray out;
  out.data = LatticeTensor(ns, w, h, in.channels);
  out.stage = spec.index;
  out.two_d = arr.two_d;
  for (int s = 0; s < ns; ++s) {
    const int s0 = pool_s ? 2 * s : s;
    const int s1 = pool_s ? std::min(2 * s + 1, in.n_s - 1) : s;
    out.spacing_arcsec.push_back(2.0 * arr.spacing_arcsec[s0]);
    for (int x = 0; x < w; ++x) {
      const int xs[2] = {2 * x, std::min(2 * x + 1, in.width - 1)};
      for (int y = 0; y < h; ++y) {
        const int ys[2] = {pool_y ? 2 * y : y, pool_y ? std::min(2 * y + 1, in.height - 1) : y};
        const int ss[2] = {s0, s1};
        for (int c = 0; c < in.channels; ++c) {
          double best = -HUGE_VAL;
          double sum = 0.0;
          std::uint8_t flag = 0;
          int count = 0;
          for (int a = 0; a < (pool_s ? 2 : 1); ++a)
            for (int i = 0; i < 2; ++i)
              for (int j = 0; j < (pool_y ? 2 : 1); ++j) {
                const std::size_t k = in.index(ss[a], xs[i], ys[j], c);
                best = std::max(best, in.values[k]);
                sum += in.values[k];
                flag |= in.flags[k];
                ++count;
              }
          const std::size_t o = out.data.index(s, x, y, c);
          out.data.values[o] = spec.pool == PoolFunction::Max ? best : sum / count;
          out.data.flags[o] = flag;
        }
      }
    }
  }
  return out;
}

namespace {

void check_templates(const StageArray& arr, const std::vector<StageTemplate>& templates) {
  if (templates.empty()) throw ConfigError("S stage needs at least one template");
  const StageTemplate& t0 = templates.front();
  for (const auto& t : templates) {
    if (t.sx != t0.sx || t.sy != t0.sy || t.channels != t0.channels ||
        t.weights.size() != static_cast<std::size_t>(t.sx) * t.sy * t.channels)
      throw ConfigError("S-stage templates must share one shape");
  }
  if (t0.channels != arr.data.channels)
    throw ConfigError("S-stage template channels differ from the array channels");
  if (t0.sx > arr.data.width || t0.sy > arr.data.height)
    throw ConfigError("S-stage template is larger than the array");
}

// Neighbourhood of (s, x, y) in template layout; zeros beyond the edges.
void gather(const LatticeTensor& in, int s, int x, int y, int sx, int sy, double* out,
            std::uint8_t* flag) {
  const int ox = (sx - 1) / 2;
  const int oy = (sy - 1) / 2;
  std::size_t k = 0;
  for (int i = 0; i < sx; ++i) {
    const int xx = x + i - ox;
    for (int j = 0; j < sy; ++j) {
      const int yy = y + j - oy;
      const bool inside = xx >= 0 && xx < in.width && yy >= 0 && yy < in.height;
      for (int c = 0; c < in.channels; ++c, ++k) {
        if (inside) {
          const std::size_t idx = in.index(s, xx, yy, c);
          out[k] = in.values[idx];
          if (flag) *flag |= in.flags[idx];
        } else {
          out[k] = 0.0;
        }
      }
    }
  }
}

}  // namespace

StageArray s_stage(const StageArray& arr, const std::vector<StageTemplate>& templates,
                   SNormalization normalization, double sharpness) {
  check_templates(arr, templates);
  if (!(sharpness > 0.0)) throw ParameterError("S-stage sharpness must be positive");
  const LatticeTensor& in = arr.data;
  const int sx = templates.front().sx;
  const int sy = templates.front().sy;
  const int K = static_cast<int>(templates.size());
  const std::size_t n = templates.front().weights.size();
  std::vector<double> tnorm(K);
  for (int k = 0; k < K; ++k) {
    double q = 0.0;
    for (double v : templates[k].weights) q += v * v;
    tnorm[k] = std::sqrt(q);
  }

  StageArray out;
  out.data = LatticeTensor(in.n_s, in.width, in.height, K);
  out.stage = arr.stage;
  out.two_d = arr.two_d;
  out.spacing_arcsec = arr.spacing_arcsec;
  std::vector<double> nb(n);
  for (int s = 0; s < in.n_s; ++s)
    for (int x = 0; x < in.width; ++x)
      for (int y = 0; y < in.height; ++y) {
        std::uint8_t flag = 0;
        gather(in, s, x, y, sx, sy, nb.data(), &flag);
        double nn = 0.0;
        for (double v : nb) nn += v * v;
        nn = std::sqrt(nn);
        if (nn == 0.0) {
          for (int k = 0; k < K; ++k) out.data.flags[out.data.index(s, x, y, k)] = flag;
          continue;
        }
        for (int k = 0; k < K; ++k) {
          const auto& w = templates[k].weights;
          double dot = 0.0;
          for (std::size_t i = 0; i < n; ++i) dot += nb[i] * w[i];
          double r = 0.0;
          if (tnorm[k] > 0.0) {
            if (normalization == SNormalization::TemplateOnly) {
              r = dot / tnorm[k];
            } else if (nn > 0.0) {
              r = std::min(dot / (nn * tnorm[k]), 1.0);
              if (sharpness != 1.0) r = std::pow(std::max(r, 0.0), sharpness);
            }
          }
          const std::size_t o = out.data.index(s, x, y, k);
          out.data.values[o] = r;
          out.data.flags[o] = flag;
        }
      }
  return out;
}

Signature flatten(const StageArray& arr) {
  return Signature{arr.data.values, arr.data.n_s, arr.data.width, arr.data.height,
                   arr.data.channels};
}

HierarchyResult run_hierarchy(const StageArray& input, const std::vector<StageSpec>& stages,
                              const std::vector<std::vector<StageTemplate>>& templates) {
  HierarchyResult r;
  r.stages.push_back(input);
  StageArray cur = input;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const StageSpec& spec = stages[k];
    if (spec.s_stage) {
      if (k >= templates.size() || templates[k].empty())
        throw ConfigError("stage " + std::to_string(spec.index) + " has no S templates");
      cur = s_stage(cur, templates[k], spec.normalization, spec.sharpness);
    }
    auto pooled = c_pool(cur, spec);
    if (!pooled) break;
    cur = std::move(*pooled);
    r.stages.push_back(cur);
  }
  r.signature = flatten(r.stages.back());
  return r;
}

HierarchyResult run_hierarchy(const IPFragment& f, const std::vector<StageSpec>& stages,
                              const std::vector<std::vector<StageTemplate>>& templates) {
  return run_hierarchy(stage_one(f), stages, templates);
}

double stage_rf_slope(int stage, double a) {
  if (stage < 1) throw ParameterError("stage index starts at 1");
  return a * std::ldexp(1.0, stage - 1);
}

std::vector<int> width_chain(int w, int pools) {
  std::vector<int> chain{w};
  for (int i = 0; i < pools && w >= 2; ++i) chain.push_back(w = (w + 1) / 2);
  return chain;
}

int stage_unit(int column, int stage) {
  if (stage < 1) throw ParameterError("stage index starts at 1");
  return column >> (stage - 1);
}

std::pair<int, int> stage_span(int unit, int stage) {
  if (stage < 1) throw ParameterError("stage index starts at 1");
  const int step = 1 << (stage - 1);
  return {unit * step, (unit + 1) * step};
}

std::vector<std::vector<StageTemplate>> learn_templates(const std::vector<StageArray>& corpus,
                                                        const std::vector<StageSpec>& stages,
                                                        std::uint64_t seed,
                                                        double random_fraction) {
  if (corpus.empty()) throw ParameterError("template corpus is empty");
  std::vector<std::vector<StageTemplate>> out(stages.size());
  std::vector<StageArray> cur = corpus;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const StageSpec& spec = stages[k];
    if (spec.s_stage) {
      const LatticeTensor& ref = cur.front().data;
      StageTemplate shape;
      shape.sx = spec.template_size;
      shape.sy = ref.height > 1 ? spec.template_size : 1;
      shape.channels = ref.channels;
      const std::size_t n = static_cast<std::size_t>(shape.sx) * shape.sy * shape.channels;
      Rng rng(mix_seed(seed, k));
      const int n_random = static_cast<int>(std::lround(spec.n_templates * random_fraction));
      for (int i = 0; i < spec.n_templates; ++i) {
        StageTemplate t = shape;
        t.weights.assign(n, 0.0);
        bool found = false;
        if (i < spec.n_templates - n_random) {
          for (int attempt = 0; attempt < 200 && !found; ++attempt) {
            const auto& a = cur[rng.below(cur.size())].data;
            const int s = static_cast<int>(rng.below(a.n_s));
            const int x = static_cast<int>(rng.below(a.width));
            const int y = static_cast<int>(rng.below(a.height));
            gather(a, s, x, y, t.sx, t.sy, t.weights.data(), nullptr);
            double q = 0.0;
            for (double v : t.weights) q += v * v;
            found = q > 1e-12;
          }
        }
        if (!found)
          for (double& v : t.weights) v = rng.uniform();
        out[k].push_back(std::move(t));
      }
    }
    std::vector<StageArray> next;
    for (const auto& a : cur) {
      StageArray b = spec.s_stage ? s_stage(a, out[k], spec.normalization, spec.sharpness) : a;
      auto pooled = c_pool(b, spec);
      if (!pooled) return out;
      next.push_back(std::move(*pooled));
    }
    cur = std::move(next);
  }
  return out;
}

}  // namespace pyrafove
