#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "topoband/common.hpp"

namespace topoband {

// Material coefficient on a single piece: either a constant or a uniformly
// sampled continuous function with linear interpolation between samples.
struct Coefficient {
  double value = 1.0;
  std::vector<double> samples;  // size >= 2 when sampled, spanning the piece

  bool is_constant() const { return samples.empty(); }

  // t in [0,1] is the relative position within the piece.
  double eval(double t) const {
    if (samples.empty()) return value;
    double s = std::clamp(t, 0.0, 1.0) * double(samples.size() - 1);
    auto i = std::size_t(s);
    if (i + 1 >= samples.size()) return samples.back();
    double w = s - double(i);
    return samples[i] * (1.0 - w) + samples[i + 1] * w;
  }

  double min_value() const {
    if (samples.empty()) return value;
    return *std::min_element(samples.begin(), samples.end());
  }
  double max_value() const {
    if (samples.empty()) return value;
    return *std::max_element(samples.begin(), samples.end());
  }
  double sup_abs() const { return std::max(std::abs(min_value()), std::abs(max_value())); }

  static Coefficient constant(double v) { return Coefficient{v, {}}; }
  static Coefficient sampled(std::vector<double> s) { return Coefficient{0.0, std::move(s)}; }

  // Restriction to the relative sub-interval [t0, t1] of the piece.
  Coefficient slice(double t0, double t1) const {
    if (samples.empty()) return *this;
    std::size_t n_old = samples.size();
    auto n = std::size_t(std::ceil((t1 - t0) * double(n_old - 1))) + 1;
    n = std::max<std::size_t>(n, 2);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = eval(t0 + (t1 - t0) * double(i) / double(n - 1));
    return sampled(std::move(out));
  }
};

struct Piece {
  double width = 0.0;
  Coefficient eps;
  Coefficient mu;
};

// One period of a crystal on [0,1).  eps and mu are piecewise defined and
// extended 1-periodically.
struct MediumProfile {
  std::vector<Piece> pieces;
  std::string label;

  // Cumulative piece boundaries 0 = b_0 < b_1 < ... < b_m = 1.
  std::vector<double> breakpoints() const {
    std::vector<double> b{0.0};
    double acc = 0.0;
    for (const auto& p : pieces) {
      acc += p.width;
      b.push_back(acc);
    }
    b.back() = 1.0;
    return b;
  }

  bool piecewise_constant() const {
    for (const auto& p : pieces)
      if (!p.eps.is_constant() || !p.mu.is_constant()) return false;
    return true;
  }

  // Index of the piece containing x (x already reduced to [0,1)) and the
  // relative position within it.
  std::pair<std::size_t, double> locate(double x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      double next = acc + pieces[i].width;
      if (x < next || i + 1 == pieces.size())
        return {i, std::clamp((x - acc) / pieces[i].width, 0.0, 1.0)};
      acc = next;
    }
    return {0, 0.0};
  }

  double eps(double x) const {
    auto [i, t] = locate(reduce(x));
    return pieces[i].eps.eval(t);
  }
  double mu(double x) const {
    auto [i, t] = locate(reduce(x));
    return pieces[i].mu.eval(t);
  }

  static double reduce(double x) {
    double r = x - std::floor(x);
    return r >= 1.0 ? 0.0 : r;
  }
};

// Signed perturbation shapes (eps_tilde, mu_tilde) on one period, rescaled on
// construction so that sup|mu_tilde| + sup|eps_tilde| == 1 unless identically
// zero.  `normalization` records the factor divided out.
struct PerturbationProfile {
  std::vector<Piece> pieces;  // Piece::eps holds eps_tilde, Piece::mu holds mu_tilde
  double normalization = 0.0;

  static PerturbationProfile from_pieces(std::vector<Piece> raw);

  bool is_zero() const { return normalization == 0.0; }
};

struct DefectLayer {
  double width = 0.0;
  double eps = 1.0;
  double mu = 1.0;
};

// Compactly supported modification of an interface: on (d1, d2) the medium is
// replaced by the given constant layers; outside, the two crystals continue
// with their cells aligned at d1 and d2.
struct DefectSpec {
  double d1 = 0.0;
  double d2 = 0.0;
  std::vector<DefectLayer> layers;

  double width() const { return d2 - d1; }
  bool empty() const { return layers.empty() && d2 - d1 == 0.0; }
};

// Finite slab: N1 <= -1 periods of `left` on (N1, 0), N2 >= 1 periods of
// `right` on (0, N2), vacuum (eps = mu = 1) outside.
struct FiniteStructure {
  MediumProfile left;
  MediumProfile right;
  int n1 = -1;  // negative
  int n2 = 1;   // positive
};

namespace detail {

inline void require(bool ok, const std::string& where, const std::string& what) {
  if (!ok) throw ValidationError(where + ": " + what);
}

inline Coefficient parse_coefficient(const nlohmann::json& j, const std::string& where,
                                     bool require_positive) {
  if (j.is_number()) {
    double v = j.get<double>();
    require(!require_positive || v > 0.0, where, "must be positive");
    require(std::isfinite(v), where, "must be finite");
    return Coefficient::constant(v);
  }
  if (j.is_object()) {
    require(j.contains("grid"), where, "object form needs a \"grid\" array");
    const auto& g = j.at("grid");
    require(g.is_array() && g.size() >= 2, where + ".grid", "need an array of two or more numbers");
    std::vector<double> s;
    s.reserve(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      require(g[i].is_number(), where + ".grid[" + std::to_string(i) + "]", "must be a number");
      double v = g[i].get<double>();
      require(std::isfinite(v), where + ".grid[" + std::to_string(i) + "]", "must be finite");
      require(!require_positive || v > 0.0, where + ".grid[" + std::to_string(i) + "]",
              "must be positive");
      s.push_back(v);
    }
    return Coefficient::sampled(std::move(s));
  }
  throw ValidationError(where + ": expected a number or {\"grid\": [...]}");
}

inline std::vector<Piece> parse_pieces(const nlohmann::json& arr, const std::string& where,
                                       bool require_positive) {
  require(arr.is_array() && !arr.empty(), where, "need a non-empty array");
  std::vector<Piece> pieces;
  double total = 0.0;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    std::string at = where + "[" + std::to_string(i) + "]";
    const auto& L = arr[i];
    require(L.is_object(), at, "must be an object");
    require(L.contains("w"), at + ".w", "missing");
    require(L.at("w").is_number(), at + ".w", "must be a number");
    double w = L.at("w").get<double>();
    require(w > 0.0 && std::isfinite(w), at + ".w", "must be positive and finite");
    Piece p;
    p.width = w;
    p.eps = L.contains("eps") ? parse_coefficient(L.at("eps"), at + ".eps", require_positive)
                              : Coefficient::constant(require_positive ? 1.0 : 0.0);
    p.mu = L.contains("mu") ? parse_coefficient(L.at("mu"), at + ".mu", require_positive)
                            : Coefficient::constant(require_positive ? 1.0 : 0.0);
    total += w;
    pieces.push_back(std::move(p));
  }
  require(std::abs(total - 1.0) <= 1e-12, where, "widths must sum to 1, got " + std::to_string(total));
  // Absorb the rounding residue into the last piece so breakpoints end at 1 exactly.
  pieces.back().width += 1.0 - total;
  return pieces;
}

inline nlohmann::json coefficient_to_json(const Coefficient& c) {
  if (c.is_constant()) return c.value;
  return nlohmann::json{{"grid", c.samples}};
}

}  // namespace detail

inline MediumProfile shift_origin(const MediumProfile& p, double x0);

// Parses the one-period structure description:
//   {"layers":[{"w":..,"eps":..,"mu":..},...], "origin_shift":.., "label":".."}
// eps/mu entries are positive numbers or {"grid":[...]} sampled functions.
inline MediumProfile parse_structure(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("structure: invalid JSON: ") + e.what());
  }
  detail::require(j.is_object(), "structure", "top level must be an object");
  detail::require(j.contains("layers"), "structure.layers", "missing");
  MediumProfile p;
  p.pieces = detail::parse_pieces(j.at("layers"), "structure.layers", true);
  if (j.contains("label")) {
    detail::require(j.at("label").is_string(), "structure.label", "must be a string");
    p.label = j.at("label").get<std::string>();
  }
  if (j.contains("origin_shift")) {
    detail::require(j.at("origin_shift").is_number(), "structure.origin_shift",
                    "must be a number");
    p = shift_origin(p, j.at("origin_shift").get<double>());
  }
  return p;
}

inline std::string serialize_structure(const MediumProfile& p) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& piece : p.pieces)
    layers.push_back({{"w", piece.width},
                      {"eps", detail::coefficient_to_json(piece.eps)},
                      {"mu", detail::coefficient_to_json(piece.mu)}});
  nlohmann::json j{{"layers", layers}};
  if (!p.label.empty()) j["label"] = p.label;
  return j.dump();
}

// Perturbation description: {"tilde_layers":[{"w":..,"eps":..,"mu":..},...]}.
// Coefficients may be negative; the profile is normalized on construction.
inline PerturbationProfile parse_perturbation(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("perturbation: invalid JSON: ") + e.what());
  }
  detail::require(j.is_object(), "perturbation", "top level must be an object");
  detail::require(j.contains("tilde_layers"), "perturbation.tilde_layers", "missing");
  return PerturbationProfile::from_pieces(
      detail::parse_pieces(j.at("tilde_layers"), "perturbation.tilde_layers", false));
}

// Defect description: {"d1":.., "d2":.., "layers":[{"w":..,"eps":..,"mu":..},...]}.
inline DefectSpec parse_defect(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("defect: invalid JSON: ") + e.what());
  }
  detail::require(j.is_object(), "defect", "top level must be an object");
  for (const char* key : {"d1", "d2"}) {
    detail::require(j.contains(key), std::string("defect.") + key, "missing");
    detail::require(j.at(key).is_number(), std::string("defect.") + key, "must be a number");
  }
  DefectSpec d;
  d.d1 = j.at("d1").get<double>();
  d.d2 = j.at("d2").get<double>();
  detail::require(d.d1 <= 0.0 && d.d2 >= 0.0, "defect", "need d1 <= 0 <= d2");
  double total = 0.0;
  if (j.contains("layers")) {
    const auto& arr = j.at("layers");
    detail::require(arr.is_array(), "defect.layers", "must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      std::string at = "defect.layers[" + std::to_string(i) + "]";
      const auto& L = arr[i];
      detail::require(L.is_object(), at, "must be an object");
      DefectLayer layer;
      detail::require(L.contains("w") && L.at("w").is_number(), at + ".w",
                      "must be a positive number");
      layer.width = L.at("w").get<double>();
      detail::require(layer.width > 0.0, at + ".w", "must be positive");
      if (L.contains("eps")) layer.eps = L.at("eps").get<double>();
      if (L.contains("mu")) layer.mu = L.at("mu").get<double>();
      detail::require(layer.eps > 0.0 && layer.mu > 0.0, at, "eps and mu must be positive");
      total += layer.width;
      d.layers.push_back(layer);
    }
  }
  detail::require(std::abs(total - d.width()) <= 1e-12 * (1.0 + std::abs(d.width())),
                  "defect.layers", "widths must sum to d2 - d1");
  return d;
}

// result(x) = p(x + x0): the new period starts at x0 in the old coordinates.
inline MediumProfile shift_origin(const MediumProfile& p, double x0) {
  double off = MediumProfile::reduce(x0);
  MediumProfile out;
  out.label = p.label;
  if (off == 0.0) {
    out.pieces = p.pieces;
    return out;
  }
  auto b = p.breakpoints();
  // Sub-pieces of [off, 1) then [0, off), slicing the pieces the cuts land in.
  auto emit = [&](double lo, double hi) {
    for (std::size_t i = 0; i < p.pieces.size(); ++i) {
      double a = std::max(lo, b[i]), z = std::min(hi, b[i + 1]);
      if (z - a <= 1e-15) continue;
      Piece q;
      q.width = z - a;
      double t0 = (a - b[i]) / p.pieces[i].width;
      double t1 = (z - b[i]) / p.pieces[i].width;
      q.eps = p.pieces[i].eps.slice(t0, t1);
      q.mu = p.pieces[i].mu.slice(t0, t1);
      out.pieces.push_back(std::move(q));
    }
  };
  emit(off, 1.0);
  emit(0.0, off);
  double total = 0.0;
  for (const auto& q : out.pieces) total += q.width;
  out.pieces.back().width += 1.0 - total;
  return out;
}

// Checks eps(x) == eps(-x) and mu(x) == mu(-x) (period 1) up to tol, probing
// midpoints away from piece boundaries.
inline bool is_inversion_symmetric(const MediumProfile& p, double tol = 1e-9) {
  const int n = 4096;
  auto near_breakpoint = [&](double x) {
    for (double bp : p.breakpoints()) {
      if (std::abs(x - bp) < 2e-4 || std::abs(x - bp - 1.0) < 2e-4 ||
          std::abs(x - bp + 1.0) < 2e-4)
        return true;
    }
    return false;
  };
  for (int i = 0; i < n; ++i) {
    double x = (i + 0.5) / double(n);
    if (near_breakpoint(x) || near_breakpoint(1.0 - x)) continue;
    if (std::abs(p.eps(x) - p.eps(1.0 - x)) > tol) return false;
    if (std::abs(p.mu(x) - p.mu(1.0 - x)) > tol) return false;
  }
  return true;
}

inline PerturbationProfile PerturbationProfile::from_pieces(std::vector<Piece> raw) {
  double total = 0.0;
  for (const auto& p : raw) total += p.width;
  if (std::abs(total - 1.0) > 1e-12)
    throw ValidationError("perturbation: widths must sum to 1");
  double se = 0.0, sm = 0.0;
  for (const auto& p : raw) {
    se = std::max(se, p.eps.sup_abs());
    sm = std::max(sm, p.mu.sup_abs());
  }
  PerturbationProfile out;
  out.normalization = se + sm;
  out.pieces = std::move(raw);
  if (out.normalization > 0.0) {
    for (auto& p : out.pieces) {
      if (p.eps.is_constant())
        p.eps.value /= out.normalization;
      else
        for (auto& v : p.eps.samples) v /= out.normalization;
      if (p.mu.is_constant())
        p.mu.value /= out.normalization;
      else
        for (auto& v : p.mu.samples) v /= out.normalization;
    }
  }
  return out;
}

// Merged sorted breakpoints of several piece lists (values in [0,1]).
inline std::vector<double> merge_breakpoints(const std::vector<std::vector<double>>& lists) {
  std::vector<double> all;
  for (const auto& l : lists) all.insert(all.end(), l.begin(), l.end());
  std::sort(all.begin(), all.end());
  std::vector<double> out;
  for (double v : all)
    if (out.empty() || v - out.back() > 1e-13) out.push_back(v);
  if (!out.empty()) {
    out.front() = 0.0;
    out.back() = 1.0;
  }
  return out;
}

// p + delta * q, realized on the merged piece grid.  Sampled content is
// re-sampled at `samples_per_piece` nodes per merged piece.
inline MediumProfile apply_perturbation(const MediumProfile& p, const PerturbationProfile& q,
                                        double delta, std::size_t samples_per_piece = 1025) {
  MediumProfile qp{q.pieces, ""};
  auto cuts = merge_breakpoints({p.breakpoints(), qp.breakpoints()});
  MediumProfile out;
  out.label = p.label;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i], z = cuts[i + 1];
    double mid = 0.5 * (a + z);
    auto [ip, tp] = p.locate(mid);
    auto [iq, tq] = q.pieces.empty() ? std::pair<std::size_t, double>{0, 0.0} : qp.locate(mid);
    (void)tp;
    (void)tq;
    const Piece& pp = p.pieces[ip];
    const Piece* qq = q.pieces.empty() ? nullptr : &q.pieces[iq];
    Piece o;
    o.width = z - a;
    bool const_ok = pp.eps.is_constant() && pp.mu.is_constant() &&
                    (!qq || (qq->eps.is_constant() && qq->mu.is_constant()));
    if (const_ok) {
      o.eps = Coefficient::constant(pp.eps.value + (qq ? delta * qq->eps.value : 0.0));
      o.mu = Coefficient::constant(pp.mu.value + (qq ? delta * qq->mu.value : 0.0));
    } else {
      std::vector<double> es(samples_per_piece), ms(samples_per_piece);
      for (std::size_t k = 0; k < samples_per_piece; ++k) {
        double x = a + (z - a) * double(k) / double(samples_per_piece - 1);
        x = std::min(x, std::nextafter(z, a));  // stay inside the merged piece
        es[k] = p.eps(x) + (qq ? delta * qp.eps(x) : 0.0);
        ms[k] = p.mu(x) + (qq ? delta * qp.mu(x) : 0.0);
      }
      o.eps = Coefficient::sampled(std::move(es));
      o.mu = Coefficient::sampled(std::move(ms));
    }
    if (o.eps.min_value() <= 0.0 || o.mu.min_value() <= 0.0)
      throw ValidationError("apply_perturbation: perturbed coefficients must stay positive");
    out.pieces.push_back(std::move(o));
  }
  return out;
}

// Convenience constructor for piecewise constant crystals.
inline MediumProfile make_layered(std::vector<std::array<double, 3>> layers,
                                  const std::string& label = "") {
  MediumProfile p;
  p.label = label;
  double total = 0.0;
  for (const auto& l : layers) total += l[0];
  for (const auto& l : layers)
    p.pieces.push_back({l[0] / total, Coefficient::constant(l[1]), Coefficient::constant(l[2])});
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < p.pieces.size(); ++i) acc += p.pieces[i].width;
  p.pieces.back().width = 1.0 - acc;
  return p;
}

}  // namespace topoband
