#pragma once

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "mixboot/bootstrap.hpp"
#include "mixboot/digest.hpp"
#include "mixboot/errors.hpp"
#include "mixboot/estimators.hpp"
#include "mixboot/mixing.hpp"

namespace mixboot {

using json = nlohmann::ordered_json;

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Parses the whole token as a double; false on trailing junk.
inline bool parse_number(std::string_view tok, double& out) {
  std::string s(tok);
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return end != s.c_str() && *end == '\0' && errno != ERANGE;
}

}  // namespace detail

/// Parses a single-column CSV (optional header) or whitespace-separated
/// numbers. Errors name the 1-based line.
inline Dataset parse_dataset(std::string_view text, std::string digest) {
  std::vector<double> values;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  bool first_content = true;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = detail::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++lineno;
    if (line.empty() || line.front() == '#') {
      if (eol == text.size()) break;
      continue;
    }
    if (line.find(',') != std::string_view::npos) {
      const auto body = detail::trim(line.substr(0, line.find(',')));
      const auto rest = detail::trim(line.substr(line.find(',') + 1));
      if (!rest.empty())
        throw DataError("line " + std::to_string(lineno) + ": expected a single column");
      line = body;
    }
    std::vector<double> row;
    bool numeric = true;
    std::istringstream ss{std::string(line)};
    for (std::string tok; ss >> tok;) {
      double v = 0.0;
      if (!detail::parse_number(tok, v)) {
        numeric = false;
        break;
      }
      if (!std::isfinite(v))
        throw DataError("line " + std::to_string(lineno) + ": non-finite value '" + tok + "'");
      row.push_back(v);
    }
    if (!numeric) {
      if (first_content) {  // header
        first_content = false;
        continue;
      }
      throw DataError("line " + std::to_string(lineno) + ": not a number: '" + std::string(line) +
                      "'");
    }
    first_content = false;
    values.insert(values.end(), row.begin(), row.end());
    if (eol == text.size()) break;
  }
  if (values.empty()) throw DataError("no data values found");
  return Dataset(std::move(values), std::move(digest));
}

// Digest is taken over the raw file bytes.
inline Dataset ingest(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return parse_dataset(bytes, digest_hex(bytes));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline std::string dataset_to_csv(const Dataset& d) {
  std::string out = "y\n";
  for (double v : d.values()) out += format_double(v) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// JSON

template <MixingDistribution G>
json mixing_to_json(const G& g) {
  json j;
  j["kind"] = std::is_same_v<G, GridMixing> ? "grid" : "discrete";
  j["atoms"] = std::vector<double>(g.atom_values().begin(), g.atom_values().end());
  j["weights"] = std::vector<double>(g.weights().begin(), g.weights().end());
  return j;
}

inline json mixing_to_json(const std::variant<DiscreteMixing, GridMixing>& g) {
  return std::visit([](const auto& m) { return mixing_to_json(m); }, g);
}

inline std::variant<DiscreteMixing, GridMixing> mixing_from_json(const json& j) {
  auto atoms = j.at("atoms").get<std::vector<double>>();
  auto weights = j.at("weights").get<std::vector<double>>();
  if (j.at("kind") == "grid") return GridMixing(std::move(atoms), std::move(weights));
  return DiscreteMixing(std::move(atoms), std::move(weights));
}

inline json kernel_to_json(const Kernel& k) {
  json j;
  j["family"] = std::string(k.name());
  if (k.is_gaussian()) j["sigma2"] = k.variance();
  return j;
}

inline Kernel kernel_from_json(const json& j) {
  switch (parse_family(j.at("family").get<std::string>())) {
    case Family::GaussianLocation:
      return Kernel::gaussian_location(std::sqrt(j.at("sigma2").get<double>()));
    case Family::GaussianCommonVariance:
      return Kernel::gaussian_common_variance(j.at("sigma2").get<double>());
    case Family::Exponential:
      return Kernel::exponential();
    case Family::PointMass:
      return Kernel::point_mass();
  }
  throw ConfigError("bad kernel");
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json report_to_json(const EstimatorReport& r, const Kernel& kernel,
                           const std::string& config_digest = {}) {
  json j;
  j["method"] = r.method;
  j["kernel"] = kernel_to_json(kernel);
  j["estimate"] = mixing_to_json(r.estimate);
  j["log_likelihood"] = r.log_likelihood;
  j["iterations"] = r.iterations;
  j["optimality_gap"] = optional_json(r.optimality_gap);
  j["sigma2"] = optional_json(r.sigma2);
  j["r_selected"] = optional_json(r.r_selected);
  json table = json::array();
  for (const auto& row : r.bic_table) {
    json jr;
    jr["r"] = row.r;
    jr["ok"] = row.ok;
    jr["log_likelihood"] = row.ok ? json(row.log_likelihood) : json(nullptr);
    jr["dof"] = row.dof;
    jr["bic"] = row.ok ? json(row.bic) : json(nullptr);
    table.push_back(jr);
  }
  j["bic_table"] = table;
  if (!r.bic_table.empty()) j["bic_rule"] = "2 log L - log(n) d, d = 2r";
  if (!r.step_rule.empty()) j["step_rule"] = r.step_rule;
  j["seed"] = optional_json(r.seed);
  j["data_digest"] = r.data_digest;
  if (!config_digest.empty()) j["config_digest"] = config_digest;
  return j;
}

struct LoadedReport {
  EstimatorReport report;
  Kernel kernel;
};

inline LoadedReport report_from_json(const json& j) {
  EstimatorReport r(j.at("method").get<std::string>(), mixing_from_json(j.at("estimate")));
  r.log_likelihood = j.at("log_likelihood").get<double>();
  r.iterations = j.at("iterations").get<std::size_t>();
  if (!j.at("optimality_gap").is_null()) r.optimality_gap = j["optimality_gap"].get<double>();
  if (!j.at("sigma2").is_null()) r.sigma2 = j["sigma2"].get<double>();
  if (!j.at("r_selected").is_null()) r.r_selected = j["r_selected"].get<std::size_t>();
  for (const auto& jr : j.at("bic_table")) {
    BicRow row;
    row.r = jr.at("r").get<std::size_t>();
    row.ok = jr.at("ok").get<bool>();
    row.dof = jr.at("dof").get<std::size_t>();
    if (row.ok) {
      row.log_likelihood = jr.at("log_likelihood").get<double>();
      row.bic = jr.at("bic").get<double>();
    }
    r.bic_table.push_back(row);
  }
  if (j.contains("step_rule")) r.step_rule = j["step_rule"].get<std::string>();
  if (!j.at("seed").is_null()) r.seed = j["seed"].get<std::uint64_t>();
  r.data_digest = j.at("data_digest").get<std::string>();
  return {std::move(r), kernel_from_json(j.at("kernel"))};
}

// ---------------------------------------------------------------------------
// Replicate sets

// Snapshot of everything that determines the replicate draws (no worker count).
inline json bootstrap_config_to_json(const BootstrapConfig& c) {
  json j;
  j["scheme"] = std::string(scheme_name(c.scheme));
  j["replicates"] = c.replicates;
  j["inner_iters"] = c.inner_iters;
  j["g_mode"] = std::string(step_mode_name(c.policy.mode));
  j["eta_offset"] = c.policy.offset;
  j["eta_rule"] = c.scheme == Scheme::Bbm ? "eta_m = 1/(m + eta_offset + 1)" : "eta_m = 1/(m + 2)";
  j["root_seed"] = c.root_seed;
  j["seed_rule"] = "seed_k = splitmix64(root_seed ^ splitmix64(k + 1))";
  j["sigma2_start"] = optional_json(c.sigma2);
  if (c.sigma2) {
    j["sigma2_min"] = c.sigma2_min;
    j["sigma2_step_rule"] = "beta_sigma = eta_m * sigma^4";
  }
  j["randomize_order"] = c.randomize_order;
  return j;
}

inline BootstrapConfig bootstrap_config_from_json(const json& j) {
  BootstrapConfig c;
  c.scheme = j.at("scheme") == "bbm" ? Scheme::Bbm : Scheme::NewtonContinuation;
  c.replicates = j.at("replicates").get<std::size_t>();
  c.inner_iters = j.at("inner_iters").get<std::size_t>();
  c.policy.mode = parse_step_mode(j.at("g_mode").get<std::string>());
  c.policy.offset = j.at("eta_offset").get<std::size_t>();
  c.root_seed = j.at("root_seed").get<std::uint64_t>();
  if (!j.at("sigma2_start").is_null()) {
    c.sigma2 = j["sigma2_start"].get<double>();
    c.sigma2_min = j.at("sigma2_min").get<double>();
  }
  c.randomize_order = j.at("randomize_order").get<bool>();
  return c;
}

inline std::string provenance_line(const std::string& config_digest, const std::string& data_digest) {
  return "# config_digest=" + config_digest + " data_digest=" + data_digest + "\n";
}

// Columns: replicate_id, atom_index, atom, weight, sigma2 (empty when absent).
inline std::string replicates_to_csv(const ReplicateSet& set, const std::string& config_digest) {
  std::ostringstream os;
  os << provenance_line(config_digest, set.data_digest);
  os << "replicate_id,atom_index,atom,weight,sigma2\n";
  for (std::size_t k = 0; k < set.size(); ++k) {
    const auto& rep = set.replicates[k];
    const std::string s2 = rep.sigma2 ? format_double(*rep.sigma2) : "";
    std::visit(
        [&](const auto& g) {
          for (std::size_t j = 0; j < g.size(); ++j)
            os << k << ',' << j << ',' << format_double(g.location(j)) << ','
               << format_double(g.weight(j)) << ',' << s2 << '\n';
        },
        rep.draw);
  }
  return os.str();
}

inline json replicates_manifest(const ReplicateSet& set, const std::string& config_digest) {
  json j;
  j["config"] = bootstrap_config_to_json(set.config);
  j["kernel"] = kernel_to_json(set.kernel);
  j["source"] = mixing_to_json(set.source);
  j["data_digest"] = set.data_digest;
  j["config_digest"] = config_digest;
  j["replicates_file"] = "replicates.csv";
  json seeds = json::array(), diag = json::array();
  for (const auto& r : set.replicates) {
    seeds.push_back(r.seed);
    json d;
    d["clamps"] = r.diagnostics.clamps;
    d["max_weight_change_tail"] = r.diagnostics.max_weight_change_tail;
    d["converged"] = r.diagnostics.converged;
    diag.push_back(d);
  }
  j["seeds"] = seeds;
  if (set.config.scheme == Scheme::Bbm) j["diagnostics"] = diag;
  return j;
}

// Rebuilds a ReplicateSet from its manifest and CSV.
inline ReplicateSet read_replicate_set(const json& manifest, std::string_view csv) {
  ReplicateSet set{bootstrap_config_from_json(manifest.at("config")),
                   kernel_from_json(manifest.at("kernel")),
                   mixing_from_json(manifest.at("source")),
                   manifest.at("data_digest").get<std::string>(),
                   {}};
  const auto seeds = manifest.at("seeds").get<std::vector<std::uint64_t>>();
  const bool grid = set.config.scheme == Scheme::NewtonContinuation;
  std::vector<std::vector<double>> atoms(seeds.size()), weights(seeds.size());
  std::vector<std::optional<double>> s2(seeds.size());
  std::istringstream in{std::string(csv)};
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() == 4) cells.emplace_back();
    if (cells.size() != 5) throw DataError("replicates CSV: bad row '" + line + "'");
    const auto k = static_cast<std::size_t>(std::stoull(cells[0]));
    if (k >= seeds.size()) throw DataError("replicates CSV: replicate id out of range");
    atoms[k].push_back(std::stod(cells[2]));
    weights[k].push_back(std::stod(cells[3]));
    if (!cells[4].empty()) s2[k] = std::stod(cells[4]);
  }
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    Replicate r{seeds[k],
                grid ? std::variant<DiscreteMixing, GridMixing>(GridMixing(atoms[k], weights[k]))
                     : std::variant<DiscreteMixing, GridMixing>(DiscreteMixing(atoms[k], weights[k])),
                s2[k],
                {}};
    set.replicates.push_back(std::move(r));
  }
  return set;
}

// Columns: grid_point, stat_name, value.
inline std::string bands_to_csv(const Bands& b, const std::string& config_digest,
                                const std::string& data_digest) {
  std::ostringstream os;
  os << provenance_line(config_digest, data_digest);
  os << "grid_point,stat_name,value\n";
  for (std::size_t p = 0; p < b.grid.size(); ++p)
    for (const auto& row : b.rows)
      os << format_double(b.grid[p]) << ',' << row.stat << ',' << format_double(row.values[p])
         << '\n';
  return os.str();
}

}  // namespace mixboot
