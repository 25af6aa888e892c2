#ifndef RWCRE_RUNNER_HPP
#define RWCRE_RUNNER_HPP

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "rwcre/block_law.hpp"
#include "rwcre/environment.hpp"
#include "rwcre/errors.hpp"
#include "rwcre/estimators.hpp"
#include "rwcre/limitlaws.hpp"
#include "rwcre/parallel.hpp"
#include "rwcre/resampling.hpp"
#include "rwcre/walker.hpp"

#ifndef RWCRE_VERSION
#define RWCRE_VERSION "0.0.0"
#endif

namespace rwcre::lab {

using json = nlohmann::json;

inline constexpr const char* kVersion = RWCRE_VERSION;

enum ExitCode { kOk = 0, kConfigError = 2, kRuntimeError = 3 };

//---------------------------------------------------------------------------//
// Config schema
//---------------------------------------------------------------------------//

enum class ExperimentKind {
  moments,
  profile,
  scgf,
  rate_function,
  recurrence_trace,
  fluctuation_test,
  mass_game,
  counterexample
};

inline const std::vector<std::pair<std::string, ExperimentKind>>& experiment_kinds() {
  static const std::vector<std::pair<std::string, ExperimentKind>> kinds{
      {"moments", ExperimentKind::moments},
      {"profile", ExperimentKind::profile},
      {"scgf", ExperimentKind::scgf},
      {"rate-function", ExperimentKind::rate_function},
      {"recurrence-trace", ExperimentKind::recurrence_trace},
      {"fluctuation-test", ExperimentKind::fluctuation_test},
      {"mass-game", ExperimentKind::mass_game},
      {"counterexample", ExperimentKind::counterexample}};
  return kinds;
}

inline std::string kind_name(ExperimentKind k) {
  for (const auto& [name, kind] : experiment_kinds()) {
    if (kind == k) return name;
  }
  return "?";
}

struct MassGameSpec {
  std::vector<Wide> masses;
  bool alternating = true;
  double constant = 0.0;
  std::vector<Wide> times;  ///< empty: t = tau(K) for every K
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::moments;
  std::vector<Tick> horizons;
  std::uint64_t replicas = 0;
  std::vector<double> theta;
  std::vector<double> x;
  SamplingMode mode = SamplingMode::annealed;
  std::uint64_t env_seed = 0;
  ScgfMethod method = ScgfMethod::blockwise;
  double theta_max = 3.0;
  Tick oracle_depth = Tick{1} << 14;
  std::uint64_t oracle_calibration = 2000;
  std::uint64_t mixture_draws = 0;  ///< 0: same as replicas
  std::uint64_t blocks = 10000;
  double base = 4.0;
  MassGameSpec mass_game;
};

struct Config {
  json document;  ///< parsed input, used for the hash
  std::optional<EnvironmentLaw> law;
  std::optional<ResamplingMap> map;
  ExperimentSpec experiment;
  std::uint64_t seed = 0;
  std::string output;
};

namespace detail {

inline std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const EllipticityViolation*>(&e)) return "EllipticityViolation";
  if (dynamic_cast<const DegenerateLaw*>(&e)) return "DegenerateLaw";
  if (dynamic_cast<const UnboundedSupport*>(&e)) return "UnboundedSupport";
  if (dynamic_cast<const BracketFailure*>(&e)) return "BracketFailure";
  return "InvalidValue";
}

/// Library messages of the form "atoms[i]: ..." name a sub-field.
inline ConfigError rethrow_at(const std::string& base, const std::exception& e) {
  std::string msg = e.what();
  std::string path = base;
  if (msg.rfind("atoms[", 0) == 0 || msg.rfind("increments[", 0) == 0) {
    const auto colon = msg.find(": ");
    if (colon != std::string::npos) {
      path += "." + msg.substr(0, colon);
      msg = msg.substr(colon + 2);
    }
  }
  return ConfigError(path, error_kind(e) + ": " + msg);
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "must be an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(path + "." + key, "is required");
  return *it;
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
  return d;
}

inline std::uint64_t unsigned_int(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto i = v.get<std::int64_t>();
    if (i < 0) throw ConfigError(path, "must be a nonnegative integer");
    return static_cast<std::uint64_t>(i);
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d < 1.8e19 && std::floor(d) == d) return static_cast<std::uint64_t>(d);
  }
  throw ConfigError(path, "must be a nonnegative integer");
}

/// Nonnegative integer that may exceed 64 bits; given as a number or a
/// decimal string.
inline Wide wide_int(const json& v, const std::string& path) {
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s.empty() || s.size() > 38) throw ConfigError(path, "must be a decimal integer below 1e38");
    Wide acc = 0;
    for (char c : s) {
      if (c < '0' || c > '9') throw ConfigError(path, "must be a decimal integer");
      acc = acc * 10 + static_cast<Wide>(c - '0');
    }
    return acc;
  }
  return unsigned_int(v, path);
}

inline std::string string_field(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "must be a string");
  return v.get<std::string>();
}

inline double optional_number(const json& obj, const std::string& key, const std::string& path,
                              double fallback) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, path + "." + key);
}

inline std::uint64_t optional_unsigned(const json& obj, const std::string& key,
                                       const std::string& path, std::uint64_t fallback) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : unsigned_int(*it, path + "." + key);
}

/// A grid is a list of numbers or {"min", "max", "step"}.
inline std::vector<double> grid(const json& v, const std::string& path) {
  std::vector<double> out;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
    }
  } else if (v.is_object()) {
    const double lo = number(require(v, "min", path), path + ".min");
    const double hi = number(require(v, "max", path), path + ".max");
    const double step = number(require(v, "step", path), path + ".step");
    if (!(step > 0.0)) throw ConfigError(path + ".step", "must be positive");
    if (hi < lo) throw ConfigError(path + ".max", "must be >= min");
    const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    if (count > 1000000) throw ConfigError(path, "has more than 10^6 points");
    for (long i = 0; i <= count; ++i) out.push_back(lo + step * static_cast<double>(i));
  } else {
    throw ConfigError(path, "must be a list of numbers or {min, max, step}");
  }
  if (out.empty()) throw ConfigError(path, "must not be empty");
  return out;
}

}  // namespace detail

inline EnvironmentLaw parse_law(const json& v, const std::string& path = "law") {
  using namespace detail;
  const std::string type = string_field(require(v, "type", path), path + ".type");
  std::optional<EnvironmentLaw> law;
  try {
    if (type == "two_point") {
      const double lo = number(require(v, "p_low", path), path + ".p_low");
      const double hi = number(require(v, "p_high", path), path + ".p_high");
      if (v.contains("s")) {
        if (v.contains("weight_low")) {
          throw ConfigError(path + ".s", "give either weight_low or s, not both");
        }
        const double s = number(v["s"], path + ".s");
        if (!(s > 0.0)) throw ConfigError(path + ".s", "must be positive");
        law = two_point_law_with_s(lo, hi, s);
      } else {
        law = make_two_point_law(lo, hi, number(require(v, "weight_low", path), path + ".weight_low"));
      }
    } else if (type == "atoms") {
      const json& atoms = require(v, "atoms", path);
      if (!atoms.is_array()) throw ConfigError(path + ".atoms", "must be a list");
      std::vector<Atom> list;
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        const std::string p = path + ".atoms[" + std::to_string(i) + "]";
        list.push_back({number(require(atoms[i], "omega", p), p + ".omega"),
                        number(require(atoms[i], "weight", p), p + ".weight")});
      }
      law = EnvironmentLaw::finite(std::move(list));
    } else if (type == "clipped_beta") {
      law = EnvironmentLaw::clipped_beta(number(require(v, "alpha", path), path + ".alpha"),
                                         number(require(v, "beta", path), path + ".beta"),
                                         number(require(v, "clip", path), path + ".clip"));
    } else {
      throw ConfigError(path + ".type", "must be one of two_point, atoms, clipped_beta");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw rethrow_at(path, e);
  }
  if (v.contains("non_lattice")) {
    if (!v["non_lattice"].is_boolean()) throw ConfigError(path + ".non_lattice", "must be a boolean");
    law->assert_non_lattice(v["non_lattice"].get<bool>());
  }
  return *law;
}

inline ResamplingMap parse_map(const json& v, const std::filesystem::path& base_dir,
                               const std::string& path = "map") {
  using namespace detail;
  const std::string type = string_field(require(v, "type", path), path + ".type");
  try {
    if (type == "identity") return ResamplingMap::identity();
    if (type == "frozen") return ResamplingMap::frozen();
    if (type == "polynomial") {
      const double A = optional_number(v, "A", path, 1.0);
      const double a = number(require(v, "a", path), path + ".a");
      if (!(A > 0.0)) throw ConfigError(path + ".A", "must be positive");
      if (!(a > 0.0)) throw ConfigError(path + ".a", "must be positive");
      return ResamplingMap::polynomial(A, a);
    }
    if (type == "exponential") {
      const double B = optional_number(v, "B", path, 1.0);
      const double b = number(require(v, "b", path), path + ".b");
      if (!(B > 0.0)) throw ConfigError(path + ".B", "must be positive");
      if (!(b > 0.0)) throw ConfigError(path + ".b", "must be positive");
      return ResamplingMap::exponential(B, b);
    }
    if (type == "explicit") {
      std::vector<Tick> inc;
      if (v.contains("increments")) {
        const json& list = v["increments"];
        if (!list.is_array()) throw ConfigError(path + ".increments", "must be a list");
        for (std::size_t i = 0; i < list.size(); ++i) {
          inc.push_back(unsigned_int(list[i], path + ".increments[" + std::to_string(i) + "]"));
        }
      } else if (v.contains("file")) {
        const std::filesystem::path file = base_dir / string_field(v["file"], path + ".file");
        std::ifstream in(file);
        if (!in) throw ConfigError(path + ".file", "cannot open " + file.string());
        std::string token;
        while (in >> token) {
          try {
            std::size_t used = 0;
            const unsigned long long t = std::stoull(token, &used);
            if (used != token.size()) throw std::invalid_argument(token);
            inc.push_back(t);
          } catch (const std::exception&) {
            throw ConfigError(path + ".file", "entry " + std::to_string(inc.size()) +
                                                  " is not a nonnegative integer");
          }
        }
      } else {
        throw ConfigError(path + ".increments", "is required (or give map.file)");
      }
      ListTail tail = ListTail::freeze;
      if (v.contains("tail")) {
        const std::string t = string_field(v["tail"], path + ".tail");
        if (t == "cycle") {
          tail = ListTail::cycle;
        } else if (t != "freeze") {
          throw ConfigError(path + ".tail", "must be freeze or cycle");
        }
      }
      return ResamplingMap::explicit_list(std::move(inc), tail);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw rethrow_at(path, e);
  }
  throw ConfigError(path + ".type", "must be one of identity, frozen, polynomial, exponential, explicit");
}

inline MassGameSpec parse_mass_game(const json& v, const std::string& path) {
  using namespace detail;
  MassGameSpec spec;
  const json& masses = require(v, "masses", path);
  if (masses.is_array()) {
    for (std::size_t i = 0; i < masses.size(); ++i) {
      const Wide m = wide_int(masses[i], path + ".masses[" + std::to_string(i) + "]");
      if (m == 0) throw ConfigError(path + ".masses[" + std::to_string(i) + "]", "must be >= 1");
      spec.masses.push_back(m);
    }
  } else if (masses.is_object()) {
    const std::string type = string_field(require(masses, "type", path + ".masses"), path + ".masses.type");
    if (type != "doubly_exponential") throw ConfigError(path + ".masses.type", "must be doubly_exponential");
    const std::uint64_t K = unsigned_int(require(masses, "K", path + ".masses"), path + ".masses.K");
    if (K < 1 || K > 6) throw ConfigError(path + ".masses.K", "must lie in 1..6 (m_k = 2^(2^k) fits 128 bits)");
    for (std::uint64_t k = 1; k <= K; ++k) spec.masses.push_back(Wide{1} << (1u << k));
  } else {
    throw ConfigError(path + ".masses", "must be a list or {type: doubly_exponential, K}");
  }
  if (spec.masses.empty()) throw ConfigError(path + ".masses", "must not be empty");
  const json& values = require(v, "values", path);
  const std::string vt = string_field(require(values, "type", path + ".values"), path + ".values.type");
  if (vt == "alternating") {
    spec.alternating = true;
  } else if (vt == "constant") {
    spec.alternating = false;
    spec.constant = number(require(values, "value", path + ".values"), path + ".values.value");
  } else {
    throw ConfigError(path + ".values.type", "must be alternating or constant");
  }
  if (v.contains("times")) {
    const json& times = v["times"];
    if (!times.is_array()) throw ConfigError(path + ".times", "must be a list");
    for (std::size_t i = 0; i < times.size(); ++i) {
      const Wide t = wide_int(times[i], path + ".times[" + std::to_string(i) + "]");
      if (t == 0) throw ConfigError(path + ".times[" + std::to_string(i) + "]", "must be >= 1");
      spec.times.push_back(t);
    }
  }
  return spec;
}

inline ExperimentSpec parse_experiment(const json& v, const std::string& path = "experiment") {
  using namespace detail;
  ExperimentSpec e;
  const std::string kind = string_field(require(v, "kind", path), path + ".kind");
  bool found = false;
  for (const auto& [name, k] : experiment_kinds()) {
    if (name == kind) {
      e.kind = k;
      found = true;
    }
  }
  if (!found) {
    std::string names;
    for (const auto& [name, k] : experiment_kinds()) names += (names.empty() ? "" : ", ") + name;
    throw ConfigError(path + ".kind", "must be one of " + names);
  }
  const bool walks = e.kind != ExperimentKind::mass_game && e.kind != ExperimentKind::counterexample;
  if (walks) {
    const json& hs = require(v, "horizons", path);
    if (!hs.is_array() || hs.empty()) throw ConfigError(path + ".horizons", "must be a nonempty list");
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const std::string p = path + ".horizons[" + std::to_string(i) + "]";
      const Tick n = unsigned_int(hs[i], p);
      if (n < 1) throw ConfigError(p, "must be >= 1");
      e.horizons.push_back(n);
    }
  }
  if (e.kind != ExperimentKind::mass_game) {
    e.replicas = unsigned_int(require(v, "replicas", path), path + ".replicas");
    if (e.replicas < 2) throw ConfigError(path + ".replicas", "must be >= 2");
  }
  e.theta_max = optional_number(v, "theta_max", path, 3.0);
  if (!(e.theta_max > 0.0)) throw ConfigError(path + ".theta_max", "must be positive");
  if (e.kind == ExperimentKind::scgf || e.kind == ExperimentKind::rate_function) {
    e.theta = grid(require(v, "theta", path), path + ".theta");
    for (std::size_t i = 0; i < e.theta.size(); ++i) {
      if (std::fabs(e.theta[i]) > e.theta_max) {
        throw ConfigError(path + ".theta[" + std::to_string(i) + "]", "exceeds theta_max");
      }
    }
  }
  if (e.kind == ExperimentKind::rate_function) e.x = grid(require(v, "x", path), path + ".x");
  if (v.contains("method")) {
    const std::string m = string_field(v["method"], path + ".method");
    if (m == "path") {
      e.method = ScgfMethod::path;
    } else if (m == "blockwise") {
      e.method = ScgfMethod::blockwise;
    } else if (m == "exact") {
      e.method = ScgfMethod::exact;
    } else {
      throw ConfigError(path + ".method", "must be path, blockwise or exact");
    }
  }
  if (v.contains("mode")) {
    const std::string m = string_field(v["mode"], path + ".mode");
    if (m == "quenched") {
      e.mode = SamplingMode::quenched;
    } else if (m != "annealed") {
      throw ConfigError(path + ".mode", "must be annealed or quenched");
    }
  }
  e.env_seed = optional_unsigned(v, "env_seed", path, 0);
  e.oracle_depth = optional_unsigned(v, "oracle_depth", path, e.oracle_depth);
  if (e.oracle_depth < 1) throw ConfigError(path + ".oracle_depth", "must be >= 1");
  e.oracle_calibration = optional_unsigned(v, "oracle_calibration", path, e.oracle_calibration);
  if (e.oracle_calibration < 2) throw ConfigError(path + ".oracle_calibration", "must be >= 2");
  e.mixture_draws = optional_unsigned(v, "mixture_draws", path, 0);
  e.blocks = optional_unsigned(v, "blocks", path, e.blocks);
  if (e.blocks < 1) throw ConfigError(path + ".blocks", "must be >= 1");
  e.base = optional_number(v, "base", path, e.base);
  if (!(e.base > 1.0)) throw ConfigError(path + ".base", "must exceed 1");
  if (e.kind == ExperimentKind::mass_game) e.mass_game = parse_mass_game(v, path);
  return e;
}

inline Config parse_config(const json& doc, const std::filesystem::path& base_dir = ".") {
  using namespace detail;
  if (!doc.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  Config c;
  c.document = doc;
  c.experiment = parse_experiment(require(doc, "experiment", "<root>"));
  const bool walks = c.experiment.kind != ExperimentKind::mass_game &&
                     c.experiment.kind != ExperimentKind::counterexample;
  if (walks) {
    c.law = parse_law(require(doc, "law", "<root>"));
    c.map = parse_map(require(doc, "map", "<root>"), base_dir);
  } else {
    if (doc.contains("law")) c.law = parse_law(doc["law"]);
    if (doc.contains("map")) c.map = parse_map(doc["map"], base_dir);
  }
  c.seed = unsigned_int(require(doc, "seed", "<root>"), "seed");
  c.output = doc.contains("output") ? string_field(doc["output"], "output") : kind_name(c.experiment.kind);
  if (c.output.empty() || c.output.find('/') != std::string::npos) {
    throw ConfigError("output", "must be a plain file stem");
  }
  return c;
}

inline Config load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("<file>", "cannot open " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("JSON syntax: ") + e.what());
  }
  return parse_config(doc, file.parent_path().empty() ? std::filesystem::path(".") : file.parent_path());
}

//---------------------------------------------------------------------------//
// CSV rows
//---------------------------------------------------------------------------//

struct CsvRow {
  std::string name;
  std::uint64_t n = 0;
  double grid_value = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t replicas = 0;
  std::uint64_t seed = 0;
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void sort_rows(std::vector<CsvRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const CsvRow& a, const CsvRow& b) {
    return std::tie(a.name, a.n, a.grid_value) < std::tie(b.name, b.n, b.grid_value);
  });
}

inline std::string to_csv(std::vector<CsvRow> rows) {
  sort_rows(rows);
  std::string out = "name,n,grid_value,estimate,std_error,replicas,seed\n";
  for (const auto& r : rows) {
    out += r.name + ',' + std::to_string(r.n) + ',' + format_number(r.grid_value) + ',' +
           format_number(r.estimate) + ',' + format_number(r.std_error) + ',' +
           std::to_string(r.replicas) + ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

//---------------------------------------------------------------------------//
// Experiments shared with the acceptance harness
//---------------------------------------------------------------------------//

struct CounterexampleSummary {
  std::uint64_t blocks = 0;
  std::uint64_t paths = 0;
  std::uint64_t both_signs = 0;  ///< paths with ratios above 1/2 and below -1/2
  double frequency = 0.0;
  double probability = 0.0;      ///< product formula
  double max_deviation = 0.0;    ///< max |X_tau/tau - block value|
};

inline CounterexampleSummary run_counterexample(std::uint64_t K, std::uint64_t paths, double base,
                                                std::uint64_t seed, unsigned workers) {
  struct PathStats {
    bool both = false;
    double deviation = 0.0;
  };
  const GeometricSchedule schedule{base};
  const auto stats = run_replicas<PathStats>(
      paths, resolve_workers(workers), [] { return 0; },
      [&](int&, std::uint64_t i) {
        Stream rng(derive_key(seed, "counterexample", i));
        const auto path = sample_counterexample_path(schedule, K, rng);
        PathStats st;
        bool above = false, below = false;
        for (std::size_t k = 0; k < path.ratios.size(); ++k) {
          above = above || path.ratios[k] > 0.5;
          below = below || path.ratios[k] < -0.5;
          st.deviation = std::max(st.deviation, std::fabs(path.ratios[k] - path.block_values[k]));
        }
        st.both = above && below;
        return st;
      });
  CounterexampleSummary s;
  s.blocks = K;
  s.paths = paths;
  for (const auto& st : stats) {
    s.both_signs += st.both ? 1 : 0;
    s.max_deviation = std::max(s.max_deviation, st.deviation);
  }
  s.frequency = static_cast<double>(s.both_signs) / static_cast<double>(paths);
  s.probability = counterexample_both_signs_probability(schedule, K);
  return s;
}

struct FluctuationOptions {
  Tick oracle_depth = Tick{1} << 14;
  std::uint64_t oracle_calibration = 2000;
  std::uint64_t mixture_draws = 0;  ///< 0: same as replicas
  unsigned workers = 0;
  SamplingMode mode = SamplingMode::annealed;
  std::uint64_t env_seed = 0;
};

struct FluctuationSummary {
  Tick n = 0;
  std::uint64_t replicas = 0;
  RegimeInfo regime;
  MassProfile profile;
  double completion = 0.0;
  double ks = 0.0;
  std::string base;  ///< "gaussian" or "sinai-oracle"
  std::vector<double> standardized;
  std::vector<double> mixture;
};

/// Standardised X_n against the lambda-mixture built from the measured
/// profile. Gaussian base for s > 2 (one-sample KS against Phi), Sinai oracle
/// pool for s = 0 (two-sample KS).
inline FluctuationSummary fluctuation_test(const EnvironmentLaw& law, const ResamplingMap& map, Tick n,
                                           std::uint64_t replicas, std::uint64_t seed,
                                           const FluctuationOptions& opt = {}) {
  FluctuationSummary out;
  out.n = n;
  out.replicas = replicas;
  out.regime = solve_s(law);
  const bool gaussian = out.regime.regime == Regime::diffusive;
  const bool sinai = out.regime.regime == Regime::sinai;
  if (!gaussian && !sinai) {
    throw RegimeMismatch("fluctuation-test covers s = 0 and s > 2, got s = " +
                         std::to_string(out.regime.s));
  }
  const ReplicaBatch batch = run_batch(
      law, map, n, replicas, seed,
      {.workers = opt.workers, .mode = opt.mode, .env_seed = opt.env_seed, .record_blocks = true});
  const MomentReport rep = moments_from_batch(batch);
  out.profile = profile_from_variances(rep.block_variances, rep.boundary_variance);
  out.standardized = standardize(batch.positions);
  const MixtureSpec spec = MixtureSpec::from_profile(out.profile.lambda);
  out.completion = spec.completion();
  const std::uint64_t draws = opt.mixture_draws ? opt.mixture_draws : replicas;
  Stream rng(derive_key(seed, "mixture", 0));
  out.mixture.reserve(draws);
  if (gaussian) {
    out.base = "gaussian";
    for (std::uint64_t i = 0; i < draws; ++i) out.mixture.push_back(sample_mixture(spec, GaussianBase{}, rng));
    out.ks = ks_one_sample(out.standardized, standard_normal_cdf);
  } else {
    out.base = "sinai-oracle";
    SinaiOracle oracle(law, {.depth = opt.oracle_depth,
                             .calibration = opt.oracle_calibration,
                             .seed = derive_key(seed, "oracle-calibration", 0),
                             .workers = opt.workers});
    const SamplePool pool(oracle.batch(draws, derive_key(seed, "oracle-pool", 0)));
    for (std::uint64_t i = 0; i < draws; ++i) out.mixture.push_back(sample_mixture(spec, pool, rng));
    out.ks = ks_two_sample(out.standardized, out.mixture);
  }
  return out;
}

//---------------------------------------------------------------------------//
// Running a config
//---------------------------------------------------------------------------//

inline std::uint64_t horizon_seed(std::uint64_t seed, Tick n) { return derive_key(seed, "horizon", n); }

inline std::vector<CsvRow> execute(const Config& cfg, unsigned workers) {
  const ExperimentSpec& e = cfg.experiment;
  std::vector<CsvRow> rows;
  auto row = [&](std::string name, std::uint64_t n, double grid, double est, double se, std::uint64_t reps) {
    rows.push_back({std::move(name), n, grid, est, se, reps, cfg.seed});
  };
  ReplicaOptions ropt;
  ropt.workers = workers;
  ropt.mode = e.mode;
  ropt.env_seed = e.env_seed;

  switch (e.kind) {
    case ExperimentKind::moments:
      for (Tick n : e.horizons) {
        ropt.record_blocks = false;
        const auto rep = mc_moments(*cfg.law, *cfg.map, n, e.replicas, horizon_seed(cfg.seed, n), ropt);
        const double dn = static_cast<double>(n);
        row("mean", n, 0, rep.mean, rep.mean_se, e.replicas);
        row("variance", n, 0, rep.variance, rep.variance_se, e.replicas);
        row("speed", n, 0, rep.mean / dn, rep.mean_se / dn, e.replicas);
        row("variance_over_n", n, 0, rep.variance / dn, rep.variance_se / dn, e.replicas);
      }
      break;
    case ExperimentKind::profile:
      for (Tick n : e.horizons) {
        const auto p = variance_profile(*cfg.law, *cfg.map, n, e.replicas, horizon_seed(cfg.seed, n), ropt);
        for (std::size_t k = 0; k < p.lambda.size(); ++k) {
          if (k == p.boundary_index) continue;
          row("lambda", n, static_cast<double>(k + 1), p.lambda[k], 0, e.replicas);
        }
        row("lambda_boundary", n, 0, p.boundary(), 0, e.replicas);
        for (std::size_t k = 0; k < p.sorted.size(); ++k) {
          row("lambda_sorted", n, static_cast<double>(k + 1), p.sorted[k], 0, e.replicas);
        }
      }
      break;
    case ExperimentKind::scgf:
    case ExperimentKind::rate_function:
      for (Tick n : e.horizons) {
        const ScgfOptions sopt{.theta_max = e.theta_max, .method = e.method};
        const ScgfTable t = e.method == ScgfMethod::exact
                                ? scgf_exact(*cfg.law, *cfg.map, n, e.theta, sopt)
                                : scgf_estimate(*cfg.law, *cfg.map, n, e.theta, e.replicas,
                                                horizon_seed(cfg.seed, n), sopt, ropt);
        const std::uint64_t reps = e.method == ScgfMethod::exact ? 0 : e.replicas;
        for (std::size_t i = 0; i < t.theta.size(); ++i) {
          row("scgf", n, t.theta[i], t.value[i], t.std_error[i], reps);
        }
        if (e.kind == ExperimentKind::rate_function) {
          const auto r = legendre_transform(t, e.x);
          for (std::size_t i = 0; i < r.x.size(); ++i) {
            row("rate", n, r.x[i], r.value[i], 0, reps);
            row("theta_star", n, r.x[i], r.theta_star[i], 0, reps);
          }
        }
      }
      break;
    case ExperimentKind::recurrence_trace: {
      const auto pts = recurrence_diagnostic(*cfg.law, *cfg.map, e.horizons, e.replicas, cfg.seed, ropt);
      for (const auto& p : pts) {
        row("ratio", p.n, 0, p.ratio, p.ratio_se, e.replicas);
        row("mean", p.n, 0, p.mean, p.mean_se, e.replicas);
        row("sd", p.n, 0, p.sd, 0, e.replicas);
      }
      break;
    }
    case ExperimentKind::fluctuation_test:
      for (Tick n : e.horizons) {
        const auto f = fluctuation_test(*cfg.law, *cfg.map, n, e.replicas, horizon_seed(cfg.seed, n),
                                        {.oracle_depth = e.oracle_depth,
                                         .oracle_calibration = e.oracle_calibration,
                                         .mixture_draws = e.mixture_draws,
                                         .workers = workers,
                                         .mode = e.mode,
                                         .env_seed = e.env_seed});
        row("ks", n, 0, f.ks, 0, e.replicas);
        row("s", n, 0, f.regime.s, 0, e.replicas);
        row("lambda_top", n, 0, f.profile.sorted.front(), 0, e.replicas);
        row("completion_weight", n, 0, f.completion, 0, e.replicas);
      }
      break;
    case ExperimentKind::mass_game: {
      const auto& g = e.mass_game;
      std::vector<std::pair<std::uint64_t, Wide>> times;
      if (g.times.empty()) {
        Wide tau = 0;
        for (std::size_t k = 0; k < g.masses.size(); ++k) {
          tau += g.masses[k];
          times.emplace_back(k + 1, tau);
        }
      } else {
        for (std::size_t i = 0; i < g.times.size(); ++i) times.emplace_back(i + 1, g.times[i]);
      }
      for (const auto& [idx, t] : times) {
        double value = 0.0;
        if (g.alternating) {
          value = static_cast<double>(
              gradual_sum_expected_exact(
                  g.masses, [](std::uint64_t k, Wide) -> std::int64_t { return k % 2 ? -1 : 1; }, t)
                  .value());
        } else {
          const long double c = g.constant;
          value = static_cast<double>(gradual_sum_expected(g.masses, [c](std::uint64_t, Wide) { return c; }, t));
        }
        row("expected_sum", idx, static_cast<double>(t), value, 0, 0);
      }
      break;
    }
    case ExperimentKind::counterexample: {
      const auto s = run_counterexample(e.blocks, e.replicas, e.base, cfg.seed, workers);
      const double p = s.frequency;
      row("both_signs_frequency", s.blocks, 0, p, std::sqrt(p * (1 - p) / static_cast<double>(s.paths)), s.paths);
      row("both_signs_probability", s.blocks, 0, s.probability, 0, s.paths);
      row("max_block_deviation", s.blocks, 0, s.max_deviation, 0, s.paths);
      break;
    }
  }
  sort_rows(rows);
  return rows;
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-256 failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

/// Canonical bytes: keys sorted, no whitespace.
inline std::string config_hash(const json& doc) { return sha256_hex(doc.dump()); }

struct RunOutcome {
  int code = kOk;
  std::string message;
  std::vector<std::filesystem::path> files;
};

inline RunOutcome run_config_file(const std::filesystem::path& config_path, unsigned workers,
                                  const std::filesystem::path& out_dir) {
  RunOutcome res;
  Config cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    res.code = kConfigError;
    res.message = std::string("config error at ") + e.what();
    return res;
  }
  const auto start = std::chrono::steady_clock::now();
  std::vector<CsvRow> rows;
  try {
    rows = execute(cfg, resolve_workers(workers));
  } catch (const std::exception& e) {
    res.code = kRuntimeError;
    res.message = std::string("runtime error: ") + e.what();
    return res;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  const auto csv_path = out_dir / (cfg.output + ".csv");
  const auto manifest_path = out_dir / (cfg.output + ".manifest.json");
  {
    std::ofstream out(csv_path, std::ios::binary);
    out << to_csv(rows);
    if (!out) {
      res.code = kRuntimeError;
      res.message = "cannot write " + csv_path.string();
      return res;
    }
  }
  json manifest;
  manifest["config_hash"] = config_hash(cfg.document);
  manifest["version"] = kVersion;
  manifest["wall_clock_seconds"] = wall;
  manifest["experiment"] = kind_name(cfg.experiment.kind);
  manifest["seed"] = cfg.seed;
  manifest["outputs"] = json::array({csv_path.filename().string()});
  {
    std::ofstream out(manifest_path, std::ios::binary);
    out << manifest.dump(2) << '\n';
    if (!out) {
      res.code = kRuntimeError;
      res.message = "cannot write " + manifest_path.string();
      return res;
    }
  }
  res.files = {csv_path, manifest_path};
  return res;
}

//---------------------------------------------------------------------------//
// Presets
//---------------------------------------------------------------------------//

/// Two-point support used by the critical-phase preset.
inline constexpr double kCriticalPLow = 0.4;
inline constexpr double kCriticalPHigh = 0.8;

struct PresetInfo {
  std::string name;
  std::string description;
};

inline std::vector<PresetInfo> list_presets() {
  return {
      {"identity", "homogenized walk: identity map, ballistic two-point law, moments"},
      {"frozen", "plain RWRE: frozen map, ballistic two-point law, moments"},
      {"poly(A,a)", "polynomial map T_k = A k^a (default A=1, a=1), variance profile"},
      {"exp(B,b)", "exponential map tau(k) = B e^(b k) (default B=1, b=ln 2), Sinai law, variance profile"},
      {"counterexample-4k", "strong-LLN counterexample: tau(k) = 4^k - 1, 10^4 blocks, 500 paths"},
      {"critical(s)", "critical polynomial exponent a = 1/(s-1) for a law with s in (1,2), moments"},
  };
}

namespace detail {

/// Splits "poly(2,1.5)" into ("poly", {2, 1.5}). Placeholder arguments such as
/// "poly(A,a)" yield an empty list.
inline std::pair<std::string, std::vector<double>> split_preset(const std::string& name) {
  const auto open = name.find('(');
  if (open == std::string::npos) return {name, {}};
  if (name.back() != ')') throw ConfigError("preset", "malformed preset name " + name);
  const std::string head = name.substr(0, open);
  const std::string inner = name.substr(open + 1, name.size() - open - 2);
  std::vector<double> args;
  std::stringstream ss(inner);
  std::string tok;
  bool placeholder = false;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      args.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      placeholder = true;
    }
  }
  if (placeholder) args.clear();
  return {head, args};
}

inline json ballistic_law() { return {{"type", "two_point"}, {"p_low", 0.4}, {"p_high", 0.8}, {"weight_low", 0.5}}; }
inline json sinai_law() { return {{"type", "two_point"}, {"p_low", 0.25}, {"p_high", 0.75}, {"weight_low", 0.5}}; }

}  // namespace detail

inline json preset_config(const std::string& full_name) {
  const auto [name, args] = detail::split_preset(full_name);
  auto arg = [&](std::size_t i, double fallback) { return i < args.size() ? args[i] : fallback; };
  json cfg;
  cfg["seed"] = 20240601;
  if (name == "identity" || name == "frozen") {
    cfg["law"] = detail::ballistic_law();
    cfg["map"] = {{"type", name}};
    cfg["experiment"] = {{"kind", "moments"}, {"horizons", {1000, 10000}}, {"replicas", 2000}};
  } else if (name == "poly") {
    cfg["law"] = detail::ballistic_law();
    cfg["map"] = {{"type", "polynomial"}, {"A", arg(0, 1.0)}, {"a", arg(1, 1.0)}};
    cfg["experiment"] = {{"kind", "profile"}, {"horizons", {10000}}, {"replicas", 1000}};
  } else if (name == "exp") {
    cfg["law"] = detail::sinai_law();
    cfg["map"] = {{"type", "exponential"}, {"B", arg(0, 1.0)}, {"b", arg(1, std::log(2.0))}};
    cfg["experiment"] = {{"kind", "profile"}, {"horizons", {4096}}, {"replicas", 1000}};
  } else if (name == "counterexample-4k") {
    cfg["experiment"] = {{"kind", "counterexample"}, {"blocks", 10000}, {"replicas", 500}, {"base", 4.0}};
  } else if (name == "critical") {
    const double s = arg(0, 1.5);
    if (!(s > 1.0 && s < 2.0)) throw ConfigError("preset", "critical(s) needs s in (1,2)");
    cfg["law"] = {{"type", "two_point"}, {"p_low", kCriticalPLow}, {"p_high", kCriticalPHigh}, {"s", s}};
    cfg["map"] = {{"type", "polynomial"}, {"A", 1.0}, {"a", 1.0 / (s - 1.0)}};
    cfg["experiment"] = {{"kind", "moments"}, {"horizons", {1000, 10000}}, {"replicas", 1000}};
  } else {
    throw ConfigError("preset", "unknown preset " + full_name);
  }
  cfg["output"] = name == "counterexample-4k" ? "counterexample" : name;
  return cfg;
}

}  // namespace rwcre::lab

#endif  // RWCRE_RUNNER_HPP
