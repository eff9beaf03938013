#include "bcl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace bcl {

namespace {

std::vector<std::string> tokens_of(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, int line, const std::string& field) {
  double v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw ConfigError(line, field, "expected a number, got '" + tok + "'");
  return v;
}

uint64_t parse_u64(const std::string& tok, int line, const std::string& field) {
  uint64_t v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw ConfigError(line, field, "expected a non-negative integer, got '" + tok + "'");
  return v;
}

int parse_int(const std::string& tok, int line, const std::string& field) {
  int v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw ConfigError(line, field, "expected an integer, got '" + tok + "'");
  return v;
}

bool parse_bool(const std::string& tok, int line, const std::string& field) {
  if (tok == "true" || tok == "1") return true;
  if (tok == "false" || tok == "0") return false;
  throw ConfigError(line, field, "expected true/false, got '" + tok + "'");
}

std::vector<std::pair<int, double>> parse_pmf_table(const std::vector<std::string>& toks,
                                                    size_t begin, size_t end, int line,
                                                    const std::string& field) {
  std::vector<std::pair<int, double>> table;
  for (size_t i = begin; i < end; ++i) {
    const auto colon = toks[i].find(':');
    if (colon == std::string::npos)
      throw ConfigError(line, field, "expected n:prob entries, got '" + toks[i] + "'");
    table.emplace_back(parse_int(toks[i].substr(0, colon), line, field),
                       parse_double(toks[i].substr(colon + 1), line, field));
  }
  if (table.empty()) throw ConfigError(line, field, "empty offspring table");
  return table;
}

}  // namespace

std::string config_hash(const std::string& text) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = hex[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  cfg.raw_text = text;
  cfg.hash_hex = config_hash(text);

  std::istringstream is(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(line_no, "section", "malformed section header '" + line + "'");
      section = line.substr(1, line.size() - 2);
      if (section != "model" && section != "function" && section != "scenario" &&
          section != "thresholds" && section != "output")
        throw ConfigError(line_no, section, "unknown section");
      if (section == "function") cfg.has_function = true;
      if (section == "scenario") cfg.has_scenario = true;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(line_no, "key", "expected 'key = value', got '" + line + "'");
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    std::string value = line.substr(eq + 1);
    const auto vfirst = value.find_first_not_of(" \t");
    value = vfirst == std::string::npos ? "" : value.substr(vfirst);
    const auto toks = tokens_of(value);

    auto need_one = [&]() -> const std::string& {
      if (toks.size() != 1)
        throw ConfigError(line_no, key, "expected a single value");
      return toks[0];
    };

    if (section == "model") {
      if (key == "b") cfg.b = parse_double(need_one(), line_no, key);
      else if (key == "sigma2") cfg.sigma2 = parse_double(need_one(), line_no, key);
      else if (key == "d") cfg.d = parse_int(need_one(), line_no, key);
      else if (key == "k_max") cfg.k_max = parse_int(need_one(), line_no, key);
      else if (key == "basis_n") cfg.basis_n = parse_int(need_one(), line_no, key);
      else if (key == "quad_order") cfg.quad_order = parse_int(need_one(), line_no, key);
      else if (key == "beta") {
        if (toks.empty()) throw ConfigError(line_no, key, "missing beta form");
        cfg.beta_form = toks[0];
        cfg.beta_params.clear();
        for (size_t i = 1; i < toks.size(); ++i)
          cfg.beta_params.push_back(parse_double(toks[i], line_no, key));
        if (cfg.beta_form == "const" || cfg.beta_form == "bump") {
          if (cfg.beta_params.size() != 1)
            throw ConfigError(line_no, key, cfg.beta_form + " takes one parameter");
        } else if (cfg.beta_form == "shifted_bump") {
          if (cfg.beta_params.size() != 2)
            throw ConfigError(line_no, key, "shifted_bump takes two parameters");
        } else {
          throw ConfigError(line_no, key, "unknown beta form '" + cfg.beta_form + "'");
        }
      } else if (key == "offspring") {
        if (toks.empty()) throw ConfigError(line_no, key, "missing offspring form");
        cfg.offspring_form = toks[0];
        if (cfg.offspring_form == "table") {
          cfg.offspring_a = parse_pmf_table(toks, 1, toks.size(), line_no, key);
        } else if (cfg.offspring_form == "mix") {
          const auto slash = std::find(toks.begin(), toks.end(), "/");
          if (slash == toks.end())
            throw ConfigError(line_no, key, "mix needs 'tableA / tableB'");
          const size_t split_at = static_cast<size_t>(slash - toks.begin());
          cfg.offspring_a = parse_pmf_table(toks, 1, split_at, line_no, key);
          cfg.offspring_b = parse_pmf_table(toks, split_at + 1, toks.size(), line_no, key);
        } else {
          throw ConfigError(line_no, key, "unknown offspring form '" + cfg.offspring_form + "'");
        }
      } else {
        throw ConfigError(line_no, key, "unknown key in [model]");
      }
    } else if (section == "function") {
      if (key == "form") {
        if (toks.empty()) throw ConfigError(line_no, key, "missing function form");
        cfg.function_form = toks[0];
        if (cfg.function_form == "eigen") {
          if (toks.size() != 3) throw ConfigError(line_no, key, "eigen takes 'k j'");
          cfg.function_pairs = {{parse_int(toks[1], line_no, key),
                                 parse_int(toks[2], line_no, key), 1.0}};
        } else if (cfg.function_form == "sum") {
          cfg.function_pairs.clear();
          for (size_t i = 1; i < toks.size(); ++i) {
            const auto& t = toks[i];
            const auto c1 = t.find(':');
            const auto c2 = t.find(':', c1 == std::string::npos ? 0 : c1 + 1);
            if (c1 == std::string::npos || c2 == std::string::npos)
              throw ConfigError(line_no, key, "sum takes k:j:w entries");
            cfg.function_pairs.emplace_back(
                parse_int(t.substr(0, c1), line_no, key),
                parse_int(t.substr(c1 + 1, c2 - c1 - 1), line_no, key),
                parse_double(t.substr(c2 + 1), line_no, key));
          }
          if (cfg.function_pairs.empty())
            throw ConfigError(line_no, key, "sum needs at least one k:j:w entry");
        } else if (cfg.function_form == "poly") {
          cfg.poly_coeffs.clear();
          for (size_t i = 1; i < toks.size(); ++i)
            cfg.poly_coeffs.push_back(parse_double(toks[i], line_no, key));
          if (cfg.poly_coeffs.empty())
            throw ConfigError(line_no, key, "poly needs coefficients");
        } else {
          throw ConfigError(line_no, key, "unknown function form '" + cfg.function_form + "'");
        }
      } else if (key == "expect_regime") {
        cfg.expect_regime = need_one();
        if (cfg.expect_regime != "small" && cfg.expect_regime != "critical" &&
            cfg.expect_regime != "large")
          throw ConfigError(line_no, key, "expected small|critical|large");
      } else {
        throw ConfigError(line_no, key, "unknown key in [function]");
      }
    } else if (section == "scenario") {
      if (key == "t") cfg.t = parse_double(need_one(), line_no, key);
      else if (key == "extension") cfg.extension = parse_double(need_one(), line_no, key);
      else if (key == "replicates") cfg.replicates = parse_u64(need_one(), line_no, key);
      else if (key == "pop_cap") cfg.pop_cap = parse_u64(need_one(), line_no, key);
      else if (key == "event_budget") cfg.event_budget = parse_u64(need_one(), line_no, key);
      else if (key == "seed") cfg.seed = parse_u64(need_one(), line_no, key);
      else if (key == "survival_threshold")
        cfg.survival_threshold = parse_double(need_one(), line_no, key);
      else if (key == "x0") {
        cfg.x0.clear();
        for (const auto& t : toks) cfg.x0.push_back(parse_double(t, line_no, key));
      } else if (key == "snapshots") {
        cfg.snapshots.clear();
        for (const auto& t : toks) cfg.snapshots.push_back(parse_double(t, line_no, key));
      } else {
        throw ConfigError(line_no, key, "unknown key in [scenario]");
      }
    } else if (section == "thresholds") {
      if (key == "ks_p_min") cfg.thresholds.ks_p_min = parse_double(need_one(), line_no, key);
      else if (key == "variance_rel_tol")
        cfg.thresholds.var_rel_tol = parse_double(need_one(), line_no, key);
      else if (key == "se_multiplier")
        cfg.thresholds.se_multiplier = parse_double(need_one(), line_no, key);
      else if (key == "min_samples")
        cfg.thresholds.min_samples = parse_u64(need_one(), line_no, key);
      else if (key == "variance_scale")
        cfg.thresholds.variance_scale = parse_double(need_one(), line_no, key);
      else throw ConfigError(line_no, key, "unknown key in [thresholds]");
    } else if (section == "output") {
      if (key == "directory") cfg.out_dir = need_one();
      else if (key == "histogram_bins")
        cfg.histogram_bins = parse_int(need_one(), line_no, key);
      else if (key == "trajectory_csv")
        cfg.trajectory_csv = parse_bool(need_one(), line_no, key);
      else throw ConfigError(line_no, key, "unknown key in [output]");
    } else {
      throw ConfigError(line_no, key, "key outside any section");
    }
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "file", "cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

namespace {

double squared_norm(const double* x, int d) {
  double s = 0;
  for (int c = 0; c < d; ++c) s += x[c] * x[c];
  return s;
}

std::vector<double> dense_pmf(const std::vector<std::pair<int, double>>& table, int n_max) {
  std::vector<double> pmf(n_max + 1, 0.0);
  for (const auto& [n, p] : table) pmf[n] = p;
  return pmf;
}

}  // namespace

ModelSpec build_model(const ExperimentConfig& cfg, bool allow_noncritical) {
  OUParams ou{cfg.b, cfg.sigma2, cfg.d};

  BranchingMechanism mech;
  const int d = cfg.d;
  int n_max = 0;
  for (const auto& [n, p] : cfg.offspring_a) n_max = std::max(n_max, n);
  for (const auto& [n, p] : cfg.offspring_b) n_max = std::max(n_max, n);
  if (n_max > 16) throw ConfigError(0, "offspring", "offspring n_max must be <= 16");
  mech.n_max = n_max;

  const bool beta_const = cfg.beta_form == "const";
  if (beta_const) {
    const double c = cfg.beta_params[0];
    mech.beta = [c](const double*) { return c; };
    mech.beta_sup = c;
  } else if (cfg.beta_form == "bump") {
    const double c = cfg.beta_params[0];
    mech.beta = [c, d](const double* x) { return c * std::exp(-squared_norm(x, d)); };
    mech.beta_sup = c;
  } else {  // shifted_bump
    const double c0 = cfg.beta_params[0], c1 = cfg.beta_params[1];
    mech.beta = [c0, c1, d](const double* x) {
      return c0 + c1 * std::exp(-squared_norm(x, d));
    };
    mech.beta_sup = c0 + std::max(0.0, c1);
  }

  const bool offspring_const = cfg.offspring_form == "table";
  if (offspring_const) {
    const auto pmf = dense_pmf(cfg.offspring_a, n_max);
    mech.offspring = [pmf](const double*, std::span<double> out) {
      for (size_t n = 0; n < pmf.size(); ++n) out[n] = pmf[n];
    };
  } else {
    const auto pa = dense_pmf(cfg.offspring_a, n_max);
    const auto pb = dense_pmf(cfg.offspring_b, n_max);
    mech.offspring = [pa, pb, d](const double* x, std::span<double> out) {
      const double w = std::exp(-squared_norm(x, d));
      for (size_t n = 0; n < pa.size(); ++n) out[n] = w * pa[n] + (1.0 - w) * pb[n];
    };
  }
  mech.spatially_constant = beta_const && offspring_const;

  ModelSpecOptions opts;
  opts.k_max = cfg.k_max;
  opts.basis_size = cfg.basis_n;
  opts.quad_order = cfg.quad_order;
  opts.allow_noncritical = allow_noncritical;
  return ModelSpec::build(ou, mech, opts);
}

FunctionExpansion build_function(const ExperimentConfig& cfg, const ModelSpec& model) {
  if (!cfg.has_function || cfg.function_form.empty())
    throw ConfigError(0, "function", "missing [function] section");
  FunctionExpansion f;
  if (cfg.function_form == "eigen" || cfg.function_form == "sum") {
    std::vector<std::tuple<int, int, double>> zero_based;
    for (const auto& [k, j, w] : cfg.function_pairs) {
      if (k < 1 || j < 1)
        throw ConfigError(0, "function", "eigenfunction indices are 1-based");
      zero_based.emplace_back(k - 1, j - 1, w);
    }
    f = expansion_from_pairs(model.basis, zero_based);
  } else if (cfg.function_form == "poly") {
    if (model.ou.d != 1)
      throw ConfigError(0, "function", "poly presets require d = 1");
    const auto coeffs = cfg.poly_coeffs;
    f = expand(
        [coeffs](const double* x) {
          double acc = 0, p = 1;
          for (double c : coeffs) {
            acc += c * p;
            p *= x[0];
          }
          return acc;
        },
        model.basis);
  } else {
    throw ConfigError(0, "function", "unknown function form");
  }
  return split(f);
}

Scenario build_scenario(const ExperimentConfig& cfg, ModelSpec model, FunctionExpansion f) {
  if (!cfg.has_scenario) throw ConfigError(0, "scenario", "missing [scenario] section");
  Scenario sc = Scenario::make(std::move(model), std::move(f), cfg.t, cfg.extension,
                               cfg.replicates, cfg.seed);
  sc.pop_cap = cfg.pop_cap;
  sc.event_budget = cfg.event_budget;
  sc.survival_threshold = cfg.survival_threshold;
  if (!cfg.x0.empty()) {
    if (static_cast<int>(cfg.x0.size()) != sc.model.ou.d)
      throw ConfigError(0, "x0", "x0 must have d coordinates");
    sc.x0 = cfg.x0;
  }
  return sc;
}

}  // namespace bcl
