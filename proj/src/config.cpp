#include "qsep/config.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "qsep/constellation.hpp"
#include "qsep/errors.hpp"

namespace qsep {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto pos = s.find(sep);
    out.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos)
      return out;
    s.remove_prefix(pos + 1);
  }
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    return std::nullopt;
  return v;
}

double require_double(std::string_view s) {
  const auto v = to_double(s);
  if (!v || !std::isfinite(*v))
    throw ConfigError("expected a finite number, got '" + std::string(s) + "'");
  return *v;
}

// Accepts "1000000" and "1e6" but not "1.5".
std::uint64_t require_count(std::string_view s) {
  s = trim(s);
  std::uint64_t u = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), u);
  if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty())
    return u;
  const auto v = to_double(s);
  if (!v || *v < 0.0 || *v != std::floor(*v) || *v > 1.8e19)
    throw ConfigError("expected a non-negative integer, got '" + std::string(s) + "'");
  return static_cast<std::uint64_t>(*v);
}

unsigned require_small(std::string_view s) {
  const std::uint64_t v = require_count(s);
  if (v > 1'000'000)
    throw ConfigError("value " + std::to_string(v) + " is out of range");
  return static_cast<unsigned>(v);
}

int require_int(std::string_view s) {
  s = trim(s);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("expected an integer, got '" + std::string(s) + "'");
  return v;
}

struct Entry {
  std::string value;
  int line;
};

using Section = std::map<std::string, Entry>;

const std::map<std::string, std::vector<std::string>> &known_keys() {
  static const std::map<std::string, std::vector<std::string>> keys{
      {"system", {"n_r", "order", "bits"}},
      {"channel", {"kind", "alpha", "phi", "covariance_file"}},
      {"simulation",
       {"rho_grid_db", "seed", "max_trials", "target_errors", "chunk_size", "detectors",
        "quantizer_fault_shift"}},
      {"asymptote", {"k"}},
      {"validate",
       {"equivalence_rho_db", "equivalence_trials", "z_threshold", "identity_rho_db",
        "identity_trials", "residual_draws", "residual_slope_tolerance", "eta_realizations",
        "eta_noise_trials", "eta_rho_db", "sandwich_window_db"}},
  };
  return keys;
}

class Parser {
public:
  Parser(std::string origin, std::filesystem::path base_dir)
      : origin_(std::move(origin)), base_dir_(std::move(base_dir)) {}

  ExperimentConfig run(std::string_view text) {
    tokenize(text);
    ExperimentConfig cfg;
    read_system(cfg.sim);
    read_channel(cfg);
    read_simulation(cfg.sim);
    read_asymptote(cfg);
    read_validate(cfg.validate);
    try {
      cfg.sim.validate();
    } catch (const ConfigError &e) {
      throw ConfigError(origin_ + ": " + e.what());
    }
    return cfg;
  }

private:
  std::string origin_;
  std::filesystem::path base_dir_;
  std::map<std::string, Section> sections_;

  [[noreturn]] void fail(int line, const std::string &field, const std::string &msg) const {
    throw ConfigError(origin_ + ":" + std::to_string(line) + ": " + field + ": " + msg);
  }

  void tokenize(std::string_view text) {
    std::string current;
    int line_no = 0;
    while (!text.empty()) {
      ++line_no;
      const auto nl = text.find('\n');
      std::string_view line = text.substr(0, nl);
      text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
      if (const auto c = line.find_first_of("#;"); c != std::string_view::npos)
        line = line.substr(0, c);
      line = trim(line);
      if (line.empty())
        continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          fail(line_no, "section", "unterminated section header");
        current = std::string(trim(line.substr(1, line.size() - 2)));
        if (!known_keys().contains(current))
          fail(line_no, "section", "unknown section [" + current + "]");
        sections_[current];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        fail(line_no, "syntax", "expected 'key = value'");
      const std::string key(trim(line.substr(0, eq)));
      const std::string value(trim(line.substr(eq + 1)));
      if (current.empty())
        fail(line_no, key, "key outside of any section");
      const auto &allowed = known_keys().at(current);
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        fail(line_no, key, "unknown key in [" + current + "]");
      if (value.empty())
        fail(line_no, key, "empty value");
      auto &sec = sections_[current];
      if (auto it = sec.find(key); it != sec.end())
        fail(line_no, key, "duplicate key (first set on line " +
                               std::to_string(it->second.line) + ")");
      sec.emplace(key, Entry{value, line_no});
    }
  }

  const Entry *find(const std::string &section, const std::string &key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end())
      return nullptr;
    const auto e = s->second.find(key);
    return e == s->second.end() ? nullptr : &e->second;
  }

  // Applies fn to the entry if present, tagging any ConfigError with its line.
  template <class Fn>
  void with(const std::string &section, const std::string &key, Fn fn) const {
    const Entry *e = find(section, key);
    if (!e)
      return;
    try {
      fn(e->value);
    } catch (const ConfigError &err) {
      fail(e->line, key, err.what());
    } catch (const Error &err) {
      fail(e->line, key, err.what());
    }
  }

  int line_of(const std::string &section, const std::string &key) const {
    const Entry *e = find(section, key);
    return e ? e->line : 0;
  }

  void read_system(SimConfig &sim) const {
    with("system", "n_r", [&](const std::string &v) {
      sim.n_r = require_small(v);
      if (sim.n_r < 1)
        throw ConfigError("N_r must be >= 1");
    });
    with("system", "bits", [&](const std::string &v) {
      sim.bits = require_small(v);
      if (sim.bits < 1 || sim.bits > 24)
        throw ConfigError("n must be in 1..24");
    });
    with("system", "order", [&](const std::string &v) {
      sim.order = require_small(v);
      if (sim.order < 2 || !is_power_of_two(sim.order))
        throw ConfigError("M must be a power of two");
      if (static_cast<unsigned long long>(sim.order) > (1ULL << sim.bits))
        throw ConfigError("M must not exceed 2^n (n = " + std::to_string(sim.bits) + ")");
    });
  }

  void read_channel(ExperimentConfig &cfg) const {
    auto &corr = cfg.sim.correlation;
    with("channel", "kind", [&](const std::string &v) {
      try {
        corr.kind = correlation_kind_from_string(v);
      } catch (const Error &) {
        throw ConfigError("unknown kind '" + v + "' (expected identity, exponential or explicit)");
      }
    });
    const bool exponential = corr.kind == CorrelationKind::exponential;
    for (const char *key : {"alpha", "phi"})
      if (!exponential && find("channel", key))
        fail(line_of("channel", key), key, "only applies to kind = exponential");
    with("channel", "alpha", [&](const std::string &v) {
      corr.alpha = require_double(v);
      if (!(corr.alpha >= 0.0 && corr.alpha < 1.0))
        throw ConfigError("alpha must lie in [0, 1)");
    });
    with("channel", "phi", [&](const std::string &v) { corr.phi = parse_angle(v); });

    const bool explicit_kind = corr.kind == CorrelationKind::explicit_matrix;
    if (explicit_kind && !find("channel", "covariance_file"))
      fail(line_of("channel", "kind"), "covariance_file", "required for kind = explicit");
    if (!explicit_kind && find("channel", "covariance_file"))
      fail(line_of("channel", "covariance_file"), "covariance_file",
           "only applies to kind = explicit");
    with("channel", "covariance_file", [&](const std::string &v) {
      cfg.covariance_file = v;
      std::filesystem::path p(v);
      if (p.is_relative())
        p = base_dir_ / p;
      try {
        corr.matrix = load_covariance_file(p);
      } catch (const Error &e) {
        throw ConfigError(e.what());
      }
      if (corr.matrix.rows() != cfg.sim.n_r)
        throw ConfigError("covariance is " + std::to_string(corr.matrix.rows()) + "x" +
                          std::to_string(corr.matrix.rows()) + " but n_r = " +
                          std::to_string(cfg.sim.n_r));
      // Reject non-PD matrices here rather than at the first simulation.
      try {
        (void)build_covariance(corr, cfg.sim.n_r);
      } catch (const Error &e) {
        throw ConfigError(e.what());
      }
    });
  }

  void read_simulation(SimConfig &sim) const {
    if (!find("simulation", "rho_grid_db"))
      throw ConfigError(origin_ + ": rho_grid_db: missing (required in [simulation])");
    with("simulation", "rho_grid_db",
         [&](const std::string &v) { sim.rho_grid_db = parse_grid(v); });
    with("simulation", "seed", [&](const std::string &v) { sim.seed = require_count(v); });
    with("simulation", "chunk_size", [&](const std::string &v) {
      sim.chunk_size = require_count(v);
      if (sim.chunk_size < 1)
        throw ConfigError("chunk_size must be >= 1");
    });
    with("simulation", "max_trials", [&](const std::string &v) {
      sim.max_trials = require_count(v);
      if (sim.max_trials < sim.chunk_size)
        throw ConfigError("max_trials must be >= chunk_size (" +
                          std::to_string(sim.chunk_size) + ")");
    });
    with("simulation", "target_errors", [&](const std::string &v) {
      sim.target_errors = require_count(v);
      if (sim.target_errors < 1)
        throw ConfigError("target_errors must be >= 1");
    });
    with("simulation", "detectors", [&](const std::string &v) {
      sim.detectors.clear();
      for (auto name : split(v, ',')) {
        Detector d;
        try {
          d = detector_from_string(std::string(name));
        } catch (const Error &e) {
          throw ConfigError(e.what());
        }
        if (sim.enabled(d))
          throw ConfigError("'" + std::string(name) + "' listed twice");
        sim.detectors.push_back(d);
      }
    });
    with("simulation", "quantizer_fault_shift",
         [&](const std::string &v) { sim.quantizer_fault_shift = require_int(v); });
  }

  void read_asymptote(ExperimentConfig &cfg) const {
    with("asymptote", "k", [&](const std::string &v) {
      cfg.k = require_double(v);
      if (!(cfg.k >= 1.0 && cfg.k <= 2.0))
        throw ConfigError("k must lie in [1, 2]");
    });
  }

  void read_validate(ValidateSettings &vs) const {
    const std::string s = "validate";
    with(s, "equivalence_rho_db",
         [&](const std::string &v) { vs.equivalence_rho_db = require_double(v); });
    with(s, "equivalence_trials", [&](const std::string &v) {
      vs.equivalence_trials = require_count(v);
      if (vs.equivalence_trials < 100'000)
        throw ConfigError("the equivalence test needs at least 1e5 trials");
    });
    with(s, "z_threshold", [&](const std::string &v) {
      vs.z_threshold = require_double(v);
      if (!(vs.z_threshold > 0.0))
        throw ConfigError("z_threshold must be positive");
    });
    with(s, "identity_rho_db",
         [&](const std::string &v) { vs.identity_rho_db = require_double(v); });
    with(s, "identity_trials",
         [&](const std::string &v) { vs.identity_trials = require_count(v); });
    with(s, "residual_draws", [&](const std::string &v) { vs.residual_draws = require_small(v); });
    with(s, "residual_slope_tolerance",
         [&](const std::string &v) { vs.residual_slope_tolerance = require_double(v); });
    with(s, "eta_realizations",
         [&](const std::string &v) { vs.eta_realizations = require_small(v); });
    with(s, "eta_noise_trials",
         [&](const std::string &v) { vs.eta_noise_trials = require_count(v); });
    with(s, "eta_rho_db", [&](const std::string &v) { vs.eta_rho_db = require_double(v); });
    with(s, "sandwich_window_db", [&](const std::string &v) {
      const auto parts = split(v, ':');
      if (parts.size() != 2)
        throw ConfigError("expected 'low:high'");
      const Interval w{require_double(parts[0]), require_double(parts[1])};
      if (!(w.low <= w.high))
        throw ConfigError("window low must not exceed high");
      vs.sandwich_window_db = w;
    });
  }
};

json interval_json(const std::optional<Interval> &w) {
  if (!w)
    return nullptr;
  return json::array({w->low, w->high});
}

json config_json(const ExperimentConfig &c) {
  const SimConfig &s = c.sim;
  json channel{{"kind", to_string(s.correlation.kind)},
               {"alpha", s.correlation.alpha},
               {"phi", s.correlation.phi}};
  if (s.correlation.kind == CorrelationKind::explicit_matrix) {
    channel["covariance_file"] = c.covariance_file;
    json rows = json::array();
    const auto &k = s.correlation.matrix;
    for (std::size_t i = 0; i < k.rows(); ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < k.cols(); ++j)
        row.push_back(json::array({k(i, j).real(), k(i, j).imag()}));
      rows.push_back(row);
    }
    channel["matrix"] = rows;
  }
  json detectors = json::array();
  for (auto d : s.detectors)
    detectors.push_back(to_string(d));
  const ValidateSettings &v = c.validate;
  return {
      {"system", {{"n_r", s.n_r}, {"order", s.order}, {"bits", s.bits}}},
      {"channel", channel},
      {"simulation",
       {{"rho_grid_db", s.rho_grid_db},
        {"seed", s.seed},
        {"max_trials", s.max_trials},
        {"target_errors", s.target_errors},
        {"chunk_size", s.chunk_size},
        {"detectors", detectors},
        {"quantizer_fault_shift", s.quantizer_fault_shift}}},
      {"asymptote", {{"k", c.k}}},
      {"validate",
       {{"equivalence_rho_db", v.equivalence_rho_db},
        {"equivalence_trials", v.equivalence_trials},
        {"z_threshold", v.z_threshold},
        {"identity_rho_db", v.identity_rho_db},
        {"identity_trials", v.identity_trials},
        {"residual_draws", v.residual_draws},
        {"residual_slope_tolerance", v.residual_slope_tolerance},
        {"eta_realizations", v.eta_realizations},
        {"eta_noise_trials", v.eta_noise_trials},
        {"eta_rho_db", v.eta_rho_db},
        {"sandwich_window_db", interval_json(v.sandwich_window_db)}}},
  };
}

ExperimentConfig config_from_json(const json &j) {
  ExperimentConfig c;
  SimConfig &s = c.sim;
  const json &sys = j.at("system");
  s.n_r = sys.at("n_r").get<unsigned>();
  s.order = sys.at("order").get<unsigned>();
  s.bits = sys.at("bits").get<unsigned>();

  const json &ch = j.at("channel");
  s.correlation.kind = correlation_kind_from_string(ch.at("kind").get<std::string>());
  s.correlation.alpha = ch.at("alpha").get<double>();
  s.correlation.phi = ch.at("phi").get<double>();
  if (s.correlation.kind == CorrelationKind::explicit_matrix) {
    c.covariance_file = ch.at("covariance_file").get<std::string>();
    const json &rows = ch.at("matrix");
    ComplexMatrix k(rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t jj = 0; jj < rows.size(); ++jj)
        k(i, jj) = cplx(rows.at(i).at(jj).at(0).get<double>(),
                        rows.at(i).at(jj).at(1).get<double>());
    s.correlation.matrix = std::move(k);
  }

  const json &sim = j.at("simulation");
  s.rho_grid_db = sim.at("rho_grid_db").get<std::vector<double>>();
  s.seed = sim.at("seed").get<std::uint64_t>();
  s.max_trials = sim.at("max_trials").get<std::uint64_t>();
  s.target_errors = sim.at("target_errors").get<std::uint64_t>();
  s.chunk_size = sim.at("chunk_size").get<std::uint64_t>();
  s.detectors.clear();
  for (const auto &d : sim.at("detectors"))
    s.detectors.push_back(detector_from_string(d.get<std::string>()));
  s.quantizer_fault_shift = sim.at("quantizer_fault_shift").get<int>();

  c.k = j.at("asymptote").at("k").get<double>();

  const json &v = j.at("validate");
  ValidateSettings &vs = c.validate;
  vs.equivalence_rho_db = v.at("equivalence_rho_db").get<double>();
  vs.equivalence_trials = v.at("equivalence_trials").get<std::uint64_t>();
  vs.z_threshold = v.at("z_threshold").get<double>();
  vs.identity_rho_db = v.at("identity_rho_db").get<double>();
  vs.identity_trials = v.at("identity_trials").get<std::uint64_t>();
  vs.residual_draws = v.at("residual_draws").get<unsigned>();
  vs.residual_slope_tolerance = v.at("residual_slope_tolerance").get<double>();
  vs.eta_realizations = v.at("eta_realizations").get<unsigned>();
  vs.eta_noise_trials = v.at("eta_noise_trials").get<std::uint64_t>();
  vs.eta_rho_db = v.at("eta_rho_db").get<double>();
  if (const json &w = v.at("sandwich_window_db"); !w.is_null())
    vs.sandwich_window_db = Interval{w.at(0).get<double>(), w.at(1).get<double>()};
  return c;
}

} // namespace

std::vector<double> parse_grid(std::string_view text) {
  text = trim(text);
  std::vector<double> out;
  if (text.find(':') != std::string_view::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3)
      throw ConfigError("range must be 'start:step:stop'");
    const double a = require_double(parts[0]);
    const double step = require_double(parts[1]);
    const double b = require_double(parts[2]);
    if (!(step > 0.0))
      throw ConfigError("range step must be positive");
    if (b < a)
      throw ConfigError("range stop is below start");
    const double span = (b - a) / step;
    if (span > 10'000)
      throw ConfigError("range has too many points");
    // Points are a + i*step so that no error accumulates along the grid.
    const auto count = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i)
      out.push_back(a + step * static_cast<double>(i));
  } else {
    for (auto part : split(text, ','))
      out.push_back(require_double(part));
  }
  for (std::size_t i = 1; i < out.size(); ++i)
    if (!(out[i] > out[i - 1]))
      throw ConfigError("SNR grid must be strictly increasing");
  return out;
}

double parse_angle(std::string_view text) {
  const std::string_view s = trim(text);
  if (auto v = to_double(s)) {
    if (!std::isfinite(*v))
      throw ConfigError("angle must be finite");
    return *v;
  }
  // [sign][coef][*]pi[/den]
  const auto pi = s.find("pi");
  if (pi == std::string_view::npos)
    throw ConfigError("cannot read angle '" + std::string(s) + "'");
  std::string_view coef = trim(s.substr(0, pi));
  std::string_view rest = trim(s.substr(pi + 2));
  if (!coef.empty() && coef.back() == '*')
    coef = trim(coef.substr(0, coef.size() - 1));
  double c = 1.0;
  if (coef == "-")
    c = -1.0;
  else if (!coef.empty() && coef != "+")
    c = require_double(coef);
  double den = 1.0;
  if (!rest.empty()) {
    if (rest.front() != '/')
      throw ConfigError("cannot read angle '" + std::string(s) + "'");
    den = require_double(rest.substr(1));
    if (den == 0.0)
      throw ConfigError("angle denominator is zero");
  }
  return c * std::numbers::pi / den;
}

ExperimentConfig parse_config(std::string_view text, const std::string &origin,
                              const std::filesystem::path &base_dir) {
  return Parser(origin, base_dir).run(text);
}

ExperimentConfig load_config(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad())
    throw IoError("error reading config file " + path.string());
  return parse_config(buf.str(), path.string(), path.parent_path());
}

std::string manifest_to_json(const RunManifest &m) {
  json analytic = json::array();
  for (const auto &g : m.analytic)
    analytic.push_back({{"regime", to_string(g.regime)},
                        {"G_d", g.diversity},
                        {"G_c", g.coding},
                        {"k", g.k_used}});
  const json j{{"command", m.command},         {"tool_version", m.tool_version},
               {"started_at", m.started_at},   {"workers", m.workers},
               {"config", config_json(m.config)}, {"analytic", analytic},
               {"outputs", m.outputs}};
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.started_at = j.at("started_at").get<std::string>();
    m.workers = j.at("workers").get<unsigned>();
    m.config = config_from_json(j.at("config"));
    for (const auto &g : j.at("analytic")) {
      GainResult r;
      r.regime = gain_regime_from_string(g.at("regime").get<std::string>());
      r.diversity = g.at("G_d").get<double>();
      r.coding = g.at("G_c").get<double>();
      r.k_used = g.at("k").get<double>();
      m.analytic.push_back(r);
    }
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception &e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  } catch (const Error &e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
}

std::string current_utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

} // namespace qsep
