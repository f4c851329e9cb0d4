// Command-line front end: each subcommand loads JSON structure files, runs
// one analysis, and writes deterministic CSV tables plus a summary.json into
// --out.  Exit codes: 0 success, 2 invalid input, 3 numerical failure (with a
// diagnostics.txt next to the outputs).
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "topoband/csvio.hpp"
#include "topoband/perturbation.hpp"
#include "topoband/resonance.hpp"

using namespace topoband;
using nlohmann::json;

namespace {

struct Options {
  std::string structure, left, right, defect, perturbation;
  std::string out = ".";
  double emax = 150.0;
  double delta = 0.01;
  double omega_min = 0.0, omega_max = 0.0;
  int nk = 128;
  int band = 0;  // 0 = automatic
  int omega_steps = 400;
  std::vector<int> sizes;
};

struct Inputs {
  std::optional<MediumProfile> structure, left, right;
  std::optional<DefectSpec> defect;
  std::optional<PerturbationProfile> perturbation;
  std::uint64_t hash = 0;
};

int thread_budget() {
  const char* s = std::getenv("TOPOBAND_THREADS");
  if (s == nullptr || *s == '\0') return 1;
  char* end = nullptr;
  long v = std::strtol(s, &end, 10);
  if (end == s || *end != '\0') throw ValidationError("TOPOBAND_THREADS must be an integer");
  return int(std::clamp(v, 1L, 64L));
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json coefficient_json(const Coefficient& c) {
  if (c.is_constant()) return c.value;
  return json{{"grid", c.samples}};
}

std::string canonical_defect(const DefectSpec& d) {
  json layers = json::array();
  for (const auto& l : d.layers) layers.push_back({{"w", l.width}, {"eps", l.eps}, {"mu", l.mu}});
  return json{{"d1", d.d1}, {"d2", d.d2}, {"layers", layers}}.dump();
}

std::string canonical_perturbation(const PerturbationProfile& q) {
  json layers = json::array();
  for (const auto& pc : q.pieces)
    layers.push_back({{"w", pc.width},
                      {"eps", coefficient_json(pc.eps)},
                      {"mu", coefficient_json(pc.mu)}});
  return json{{"tilde_layers", layers}, {"normalization", q.normalization}}.dump();
}

// Load whatever paths the subcommand supplied; the combined canonical form of
// all inputs feeds the structure-hash stamped onto every CSV.
Inputs load_inputs(const Options& o) {
  Inputs in;
  std::string canon;
  if (!o.structure.empty()) {
    in.structure = parse_structure(read_file(o.structure));
    canon += serialize_structure(*in.structure);
  }
  if (!o.left.empty()) {
    in.left = parse_structure(read_file(o.left));
    canon += serialize_structure(*in.left);
  }
  if (!o.right.empty()) {
    in.right = parse_structure(read_file(o.right));
    canon += serialize_structure(*in.right);
  }
  if (!o.defect.empty()) {
    in.defect = parse_defect(read_file(o.defect));
    canon += canonical_defect(*in.defect);
  }
  if (!o.perturbation.empty()) {
    in.perturbation = parse_perturbation(read_file(o.perturbation));
    canon += canonical_perturbation(*in.perturbation);
  }
  in.hash = fnv1a(canon);
  return in;
}

std::string fd(double v) { return format_double(v); }

void write_summary(const std::string& out_dir, const json& j) {
  std::string path = out_dir + "/summary.json";
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot write " + tmp);
    f << j.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

using Rows = std::vector<std::vector<std::string>>;

void run_bands(const Options& o, const Inputs& in) {
  const auto& p = *in.structure;
  auto es = band_edges(p, o.emax);
  Rows brows, erows;
  json gaps = json::array();
  for (const auto& b : es.bands) {
    for (const auto& pt : dispersion(p, b.index, std::size_t(o.nk)).points)
      brows.push_back({std::to_string(b.index), fd(pt.k), fd(pt.energy)});
    erows.push_back({std::to_string(b.index), fd(b.e_minus), fd(b.e_plus), fd(b.k_minus)});
  }
  for (std::size_t i = 0; i + 1 < es.bands.size(); ++i) {
    double lo = es.bands[i].e_plus, hi = es.bands[i + 1].e_minus;
    if (es.bands[i].upper_kind != EdgeKind::touching && hi > lo)
      gaps.push_back(json::array({lo, hi}));
  }
  write_csv(o.out + "/bands.csv", {"j", "k", "E"}, brows, in.hash);
  write_csv(o.out + "/edges.csv", {"j", "E_minus", "E_plus", "kstar"}, erows, in.hash);
  json s{{"bands", es.bands.size()}, {"gaps", gaps}, {"e_max", o.emax}};
  if (!es.warning.empty()) s["warning"] = es.warning;
  write_summary(o.out, s);
}

void run_dirac(const Options& o, const Inputs& in) {
  auto scan = find_dirac_points(*in.structure, o.emax);
  Rows rows;
  json estars = json::array();
  for (const auto& dp : scan.points) {
    rows.push_back({fd(dp.k_star), fd(dp.e_star), fd(dp.d2), fd(dp.slope)});
    estars.push_back(dp.e_star);
  }
  write_csv(o.out + "/dirac.csv", {"kstar", "Estar", "D2", "slope"}, rows, in.hash);
  write_summary(o.out, json{{"points", scan.points.size()}, {"e_stars", estars}});
}

void run_zak(const Options& o, const Inputs& in) {
  const auto& p = *in.structure;
  bool symmetric = is_inversion_symmetric(p);
  auto es = band_edges(p, o.emax);
  Rows zrows, prows;
  json bands = json::array(), thetas = json::array();
  for (const auto& b : es.bands) {
    if (o.band != 0 && b.index != o.band) continue;
    if (b.lower_kind == EdgeKind::touching || b.upper_kind == EdgeKind::touching) continue;
    auto zw = zak_wilson(p, b.index);
    zrows.push_back(
        {std::to_string(b.index), fd(zw.theta), "wilson", std::to_string(zw.grid_size)});
    if (symmetric) {
      auto zp = zak_parity(p, b.index);
      zrows.push_back(
          {std::to_string(b.index), fd(zp.theta), "parity", std::to_string(zp.grid_size)});
      auto lower = edge_parity(p, b.index, b.k_minus);
      auto upper = edge_parity(p, b.index, b.k_plus);
      prows.push_back({std::to_string(b.index), fd(b.k_minus),
                       lower.parity == Parity::even ? "even" : "odd", fd(lower.witness)});
      prows.push_back({std::to_string(b.index), fd(b.k_plus),
                       upper.parity == Parity::even ? "even" : "odd", fd(upper.witness)});
    }
    bands.push_back(b.index);
    thetas.push_back(zw.theta);
  }
  write_csv(o.out + "/zak.csv", {"j", "theta", "method", "N"}, zrows, in.hash);
  if (symmetric) write_csv(o.out + "/parity.csv", {"j", "edge_k", "parity", "witness"}, prows, in.hash);
  write_summary(o.out, json{{"bands", bands}, {"thetas", thetas}, {"symmetric", symmetric}});
}

void run_index(const Options& o, const Inputs& in) {
  const auto& p = *in.structure;
  if (!is_inversion_symmetric(p))
    throw ValidationError("index: the crystal must be inversion-symmetric");
  auto es = band_edges(p, o.emax);
  Rows rows;
  json gammas = json::array(), bands = json::array();
  for (std::size_t i = 0; i + 1 < es.bands.size(); ++i) {
    int j = es.bands[i].index;
    BulkIndex bi;
    try {
      bi = bulk_index(p, j);
    } catch (const ValidationError&) {
      continue;  // gap above j closed by a touching: carries no index
    }
    rows.push_back({std::to_string(j), fd(bi.gamma), std::to_string(bi.ell), fd(bi.zak_sum)});
    gammas.push_back(bi.gamma);
    bands.push_back(j);
  }
  write_csv(o.out + "/bulk_index.csv", {"j", "gamma", "ell", "zak_sum"}, rows, in.hash);
  write_summary(o.out, json{{"bands", bands}, {"gammas", gammas}});
}

void run_interface(const Options& o, const Inputs& in) {
  const auto& L = *in.left;
  const auto& R = *in.right;
  auto gaps = common_gaps(L, R, o.emax);
  Rows irows, mrows;
  for (const auto& g : gaps) {
    for (int i = 0; i < 64; ++i) {
      double E = g.lo + (g.hi - g.lo) * (double(i) + 0.5) / 64.0;
      try {
        double xl = impedance(L, Side::left, E);
        double xr = impedance(R, Side::right, E);
        irows.push_back({fd(E), fd(xl), fd(xr), fd(xr - xl)});
      } catch (const NumericalError&) {
        // impedance pole between samples: skip the row
      }
    }
  }
  auto modes = find_interface_modes(L, R, o.emax);
  json energies = json::array(), omegas = json::array(), jgaps = json::array();
  for (const auto& m : modes) {
    mrows.push_back({fd(m.energy), fd(m.omega), fd(m.decay_left), fd(m.decay_right),
                     fd(m.residual)});
    energies.push_back(m.energy);
    omegas.push_back(m.omega);
  }
  for (const auto& g : gaps) jgaps.push_back(json::array({g.lo, g.hi}));
  write_csv(o.out + "/impedance.csv", {"E", "xi_L_1", "xi_R_2", "xi_diff"}, irows, in.hash);
  write_csv(o.out + "/interface_modes.csv", {"E", "omega", "decayL", "decayR", "residual"},
            mrows, in.hash);
  write_summary(o.out, json{{"count", modes.size()},
                            {"energies", energies},
                            {"omegas", omegas},
                            {"common_gaps", jgaps}});
}

void run_defect(const Options& o, const Inputs& in) {
  const auto& L = *in.left;
  const auto& R = *in.right;
  auto r = defect_mode_search(L, R, *in.defect, o.emax);
  Rows srows, mrows;
  for (const auto& s : r.samples) srows.push_back({fd(s.first), fd(s.second)});
  json energies = json::array();
  for (const auto& m : r.modes) {
    mrows.push_back({fd(m.energy), fd(m.omega), fd(m.decay_left), fd(m.decay_right),
                     fd(m.residual)});
    energies.push_back(m.energy);
  }
  json bounds = json::array();
  for (const auto& g : common_gaps(L, R, o.emax)) {
    auto b = stability_bound(*in.defect, g.hi);
    bounds.push_back(json{{"gap", json::array({g.lo, g.hi})},
                          {"bound", b.value},
                          {"guaranteed", b.guaranteed}});
  }
  write_csv(o.out + "/defect_scan.csv", {"E", "h"}, srows, in.hash);
  write_csv(o.out + "/interface_modes.csv", {"E", "omega", "decayL", "decayR", "residual"},
            mrows, in.hash);
  write_summary(o.out, json{{"count", r.modes.size()}, {"energies", energies},
                            {"stability", bounds}});
}

void run_perturb(const Options& o, const Inputs& in) {
  const auto& p = *in.structure;
  const auto& q = *in.perturbation;
  auto scan = find_dirac_points(p, o.emax);
  const DiracPoint* dp = nullptr;
  for (const auto& c : scan.points)
    if (o.band == 0 || c.lower_band == o.band) {
      dp = &c;
      break;
    }
  if (dp == nullptr)
    throw ValidationError("perturb: no conical band touching found below --emax");
  Rows grows, mrows;
  json s;
  for (double dk : {o.delta, 0.5 * o.delta, 0.25 * o.delta}) {
    auto dm = dirac_interface_mode(p, q, dk, *dp);
    auto pp = apply_perturbation(p, q, dk);
    auto es = band_edges_for(pp, std::size_t(dp->lower_band) + 1);
    double lo = es.bands[std::size_t(dp->lower_band) - 1].e_plus;
    double hi = es.bands[std::size_t(dp->lower_band)].e_minus;
    grows.push_back({fd(dk), fd(lo), fd(hi), fd(dm.predicted_lo), fd(dm.predicted_hi)});
    mrows.push_back({fd(dk), fd(dm.mode.energy), fd(dm.mode.residual)});
    if (dk == o.delta)
      s = json{{"e_star", dm.prediction.e_star},
               {"sigma", dm.prediction.sigma},
               {"eta_minus", dm.prediction.eta_minus},
               {"eta_plus", dm.prediction.eta_plus},
               {"assumption_branch", dm.assumption.branch},
               {"assumption_satisfied", dm.assumption.satisfied},
               {"mode_energy", dm.mode.energy}};
  }
  write_csv(o.out + "/gap_open.csv",
            {"delta", "edge_minus", "edge_plus", "predicted_minus", "predicted_plus"}, grows,
            in.hash);
  write_csv(o.out + "/dirac_mode.csv", {"delta", "E_root", "xi_residual"}, mrows, in.hash);
  write_summary(o.out, s);
}

void run_resonance(const Options& o, const Inputs& in) {
  const auto& L = *in.left;
  const auto& R = *in.right;
  auto modes = find_interface_modes(L, R, o.emax);
  if (o.omega_max > o.omega_min) {
    std::erase_if(modes, [&](const InterfaceMode& m) {
      return m.omega < o.omega_min || m.omega > o.omega_max;
    });
  }
  if (modes.empty())
    throw ValidationError("resonance: no interface mode in the requested window");
  double omega_inf = modes.front().omega;
  std::vector<int> sizes = o.sizes.empty() ? std::vector<int>{2, 4, 8, 16} : o.sizes;
  auto family = resonance_family(L, R, sizes, omega_inf);
  Rows rows;
  json list = json::array();
  for (const auto& r : family) {
    rows.push_back({std::to_string(r.n1), std::to_string(r.n2), fd(r.omega.real()),
                    fd(r.omega.imag()), fd(r.residual)});
    list.push_back(json::array({r.omega.real(), r.omega.imag()}));
  }
  json s{{"omega_inf", omega_inf}, {"resonances", list}};
  std::vector<int> uniq = sizes;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() >= 3) {
    auto fit = decay_fit(family, omega_inf);
    s["decay"] = json{{"alpha", fit.alpha}, {"c", fit.c}, {"r_squared", fit.r_squared}};
  }
  write_csv(o.out + "/resonances.csv", {"N1", "N2", "re_omega", "im_omega", "residual"}, rows,
            in.hash);
  write_summary(o.out, s);
}

void run_transmit(const Options& o, const Inputs& in) {
  if (o.sizes.size() != 1)
    throw ValidationError("transmit: --sizes must name exactly one truncation size");
  if (o.sizes[0] < 1) throw ValidationError("transmit: the size must be >= 1");
  if (!(o.omega_max > o.omega_min) || !(o.omega_min > 0.0))
    throw ValidationError("transmit: need 0 < --omega-min < --omega-max");
  if (o.omega_steps < 2) throw ValidationError("transmit: --omega-steps must be >= 2");
  FiniteStructure fs{*in.left, *in.right, -o.sizes[0], o.sizes[0]};
  Rows rows;
  double peak_w = 0.0, peak_t = -1.0;
  for (int i = 0; i < o.omega_steps; ++i) {
    double w = o.omega_min + (o.omega_max - o.omega_min) * double(i) / double(o.omega_steps - 1);
    auto sc = transmission(fs, w);
    rows.push_back({fd(w), fd(std::abs(sc.t)), fd(std::abs(sc.r)), fd(sc.t.real()),
                    fd(sc.t.imag())});
    if (std::abs(sc.t) > peak_t) {
      peak_t = std::abs(sc.t);
      peak_w = w;
    }
  }
  write_csv(o.out + "/transmission.csv", {"omega", "abs_t", "abs_r", "re_t", "im_t"}, rows,
            in.hash);
  write_summary(o.out, json{{"peak_omega", peak_w},
                            {"peak_abs_t", peak_t},
                            {"steps", o.omega_steps}});
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Band topology and interface modes of 1D layered photonic crystals"};
  app.require_subcommand(1);

  auto add_out = [&](CLI::App* c) {
    c->add_option("--out", o.out, "output directory");
    c->add_option("--emax", o.emax, "energy ceiling for band analysis");
  };
  auto* bands = app.add_subcommand("bands", "band edges and dispersion curves");
  bands->add_option("--structure", o.structure, "crystal JSON")->required();
  bands->add_option("--nk", o.nk, "quasimomentum samples per band");
  add_out(bands);

  auto* dirac = app.add_subcommand("dirac", "certified conical band touchings");
  dirac->add_option("--structure", o.structure, "crystal JSON")->required();
  add_out(dirac);

  auto* zak = app.add_subcommand("zak", "Zak phases by Wilson loop and by parity");
  zak->add_option("--structure", o.structure, "crystal JSON")->required();
  zak->add_option("--band", o.band, "restrict to one band (default: all isolated)");
  add_out(zak);

  auto* index = app.add_subcommand("index", "gap indices of a symmetric crystal");
  index->add_option("--structure", o.structure, "crystal JSON")->required();
  add_out(index);

  auto* interface_cmd = app.add_subcommand("interface", "interface modes of a junction");
  interface_cmd->add_option("--left", o.left, "left crystal JSON")->required();
  interface_cmd->add_option("--right", o.right, "right crystal JSON")->required();
  add_out(interface_cmd);

  auto* defect = app.add_subcommand("defect", "junction modes with an inserted defect");
  defect->add_option("--left", o.left, "left crystal JSON")->required();
  defect->add_option("--right", o.right, "right crystal JSON")->required();
  defect->add_option("--defect", o.defect, "defect JSON")->required();
  add_out(defect);

  auto* perturb = app.add_subcommand("perturb", "gap opening at a conical touching");
  perturb->add_option("--structure", o.structure, "crystal JSON")->required();
  perturb->add_option("--perturbation", o.perturbation, "perturbation JSON")->required();
  perturb->add_option("--delta", o.delta, "perturbation strength");
  perturb->add_option("--band", o.band, "touching above this band (default: lowest)");
  add_out(perturb);

  auto* resonance = app.add_subcommand("resonance", "complex resonances of truncations");
  resonance->add_option("--left", o.left, "left crystal JSON")->required();
  resonance->add_option("--right", o.right, "right crystal JSON")->required();
  resonance->add_option("--sizes", o.sizes, "truncation sizes N")->delimiter(',');
  resonance->add_option("--omega-min", o.omega_min, "mode window lower edge");
  resonance->add_option("--omega-max", o.omega_max, "mode window upper edge");
  add_out(resonance);

  auto* transmit = app.add_subcommand("transmit", "transmission of one finite truncation");
  transmit->add_option("--left", o.left, "left crystal JSON")->required();
  transmit->add_option("--right", o.right, "right crystal JSON")->required();
  transmit->add_option("--sizes", o.sizes, "single truncation size N")->delimiter(',');
  transmit->add_option("--omega-min", o.omega_min, "frequency grid start")->required();
  transmit->add_option("--omega-max", o.omega_max, "frequency grid end")->required();
  transmit->add_option("--omega-steps", o.omega_steps, "frequency grid size");
  add_out(transmit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    (void)thread_budget();  // validate and clamp; the schedule is serial
    auto in = load_inputs(o);
    std::error_code ec;
    std::filesystem::create_directories(o.out, ec);
    if (bands->parsed()) run_bands(o, in);
    else if (dirac->parsed()) run_dirac(o, in);
    else if (zak->parsed()) run_zak(o, in);
    else if (index->parsed()) run_index(o, in);
    else if (interface_cmd->parsed()) run_interface(o, in);
    else if (defect->parsed()) run_defect(o, in);
    else if (perturb->parsed()) run_perturb(o, in);
    else if (resonance->parsed()) run_resonance(o, in);
    else if (transmit->parsed()) run_transmit(o, in);
    return 0;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::error_code ec;
    std::filesystem::create_directories(o.out, ec);
    std::ofstream f(o.out + "/diagnostics.txt", std::ios::trunc);
    if (f) f << e.what() << "\n";
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
}
